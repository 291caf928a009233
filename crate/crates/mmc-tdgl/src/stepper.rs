//! Time integration: the step loop, the energy-derivative estimators feeding
//! the adaptive controller, the two-regime step-size rule, initial-condition
//! generators, and the ensemble driver.
//!
//! The controller adjusts the step from the energy decay rate,
//!
//! ```text
//! s_{k+1} = max{ s_min, s_max / sqrt(1 + alpha_k |U'(t_k)|^2) },
//! ```
//!
//! where `U'` is evaluated as minus the discrete gradient norm of the
//! converged chemical potential, and `alpha_k` switches between two regimes:
//! before the sharp energy decay it grows with the (backward-difference)
//! second derivative, `alpha_k = alpha_min - A U''` when `U'' < 0`; once the
//! decay has happened — detected by `|U'|` falling back below a threshold it
//! previously exceeded — a small constant `alpha` is latched permanently so
//! the steps can grow. The latch engages at most once and never reverts.

use rayon::prelude::*;

use crate::energy::{check_domain, chemical_potential, discrete_energy, EnergyReport};
use crate::error::{Error, Result};
use crate::grid::CellField;
use crate::noise::{keyed_rng, sample_noise, Stream};
use crate::params::{GridGeometry, ModelParams};
use crate::solver::{newton_solve, NewtonSettings};

/// Relative slack allowed on the per-step energy decay check.
pub const ENERGY_DECAY_TOL: f64 = 1e-10;

/// Two-regime adaptive step-size policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptivePolicy {
    pub s_min: f64,
    pub s_max: f64,
    /// Floor of the regime-1 magnification factor.
    pub alpha_min: f64,
    /// Gain applied to negative `U''` in regime 1.
    pub curvature_gain: f64,
    /// `|U'|` level that marks the sharp decay; crossing down through it
    /// after having exceeded it latches regime 2.
    pub switch_threshold: f64,
    /// Constant magnification factor after the latch.
    pub alpha_regime2: f64,
}

impl Default for AdaptivePolicy {
    fn default() -> Self {
        AdaptivePolicy {
            s_min: 0.001,
            s_max: 0.1,
            alpha_min: 1e5,
            curvature_gain: 1e6,
            switch_threshold: 3.0,
            alpha_regime2: 100.0,
        }
    }
}

impl AdaptivePolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.s_min > 0.0 && self.s_min <= self.s_max) {
            return Err(Error::invalid("s_min", "need 0 < s_min <= s_max"));
        }
        if !(self.alpha_min > 0.0) {
            return Err(Error::invalid("alpha_min", "must be positive"));
        }
        if !(self.curvature_gain >= 0.0) {
            return Err(Error::invalid("A", "must be nonnegative"));
        }
        if !(self.alpha_regime2 > 0.0) {
            return Err(Error::invalid("alpha_regime2", "must be positive"));
        }
        Ok(())
    }
}

/// Step-size selection mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepMode {
    Constant { dt: f64 },
    Adaptive(AdaptivePolicy),
}

/// Per-step ledger entry. Record 0 describes the initial state with the
/// conventions `s_0 = 0`, `U'(t_0) = U''(t_0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub t: f64,
    pub dt: f64,
    pub energy: EnergyReport,
    pub uprime: f64,
    pub udoubleprime: f64,
    /// Controller magnification factor; NaN in constant-step mode.
    pub alpha: f64,
    pub newton_iters: usize,
    pub gmres_iters: usize,
}

/// A field captured when the trajectory first reached a scheduled time.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub scheduled_t: f64,
    pub t: f64,
    pub k: usize,
    pub field: CellField,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: CellField,
    /// Step index at which the regime-2 latch engaged, if it did.
    pub regime_switch_step: Option<usize>,
}

/// Discrete energy decay rate `U'(t_k)` of a completed step: minus the
/// squared discrete gradient norm of the converged chemical potential.
/// Always nonpositive.
pub fn energy_derivative(mu: &CellField) -> f64 {
    let dx = mu.diff_x();
    let dy = mu.diff_y();
    -(dx.inner(&dx) + dy.inner(&dy))
}

/// Backward difference `U''(t_k) = (U'(t_k) - U'(t_{k-1})) / s_k`.
pub fn second_derivative(uprime: f64, uprime_prev: f64, dt: f64) -> f64 {
    (uprime - uprime_prev) / dt
}

/// Regime-1 magnification factor.
pub fn alpha_value(udoubleprime: f64, policy: &AdaptivePolicy) -> f64 {
    if udoubleprime >= 0.0 {
        policy.alpha_min
    } else {
        policy.alpha_min - policy.curvature_gain * udoubleprime
    }
}

/// Step-size formula, clamped into `[s_min, s_max]`.
pub fn next_step_size(uprime: f64, alpha: f64, policy: &AdaptivePolicy) -> f64 {
    let s = policy.s_max / (1.0 + alpha * uprime * uprime).sqrt();
    s.max(policy.s_min).min(policy.s_max)
}

/// Uniform state disturbed cellwise by i.i.d. uniform draws on
/// `[-amplitude, amplitude]`, keyed by the run seed.
pub fn disturbed_uniform(
    geom: GridGeometry,
    base: f64,
    amplitude: f64,
    run_seed: u64,
) -> CellField {
    use rand::Rng;
    let mut rng = keyed_rng(run_seed, 0, 0, Stream::InitialCondition);
    let field = CellField::from_fn(geom, |_, _| base + rng.gen_range(-amplitude..=amplitude));
    field.assert_finite("initial condition");
    field
}

/// Restricts a fine-grid field onto a coarser grid by cell-center
/// subsampling: coarse cell (i, j) takes the fine cell containing its
/// center. Requires integer refinement ratios and identical domains.
pub fn restrict(fine: &CellField, coarse: GridGeometry) -> Result<CellField> {
    let fg = fine.geometry();
    if fg.lx() != coarse.lx() || fg.ly() != coarse.ly() {
        return Err(Error::invalid(
            "grid",
            "restriction requires identical domains",
        ));
    }
    if !fg.nx().is_multiple_of(coarse.nx()) || !fg.ny().is_multiple_of(coarse.ny()) {
        return Err(Error::invalid(
            "grid",
            format!(
                "restriction requires integer refinement ratios ({}x{} onto {}x{})",
                fg.nx(),
                fg.ny(),
                coarse.nx(),
                coarse.ny()
            ),
        ));
    }
    let rx = fg.nx() / coarse.nx();
    let ry = fg.ny() / coarse.ny();
    Ok(CellField::from_fn(coarse, |i, j| {
        fine.get(((2 * i + 1) * rx) / 2, ((2 * j + 1) * ry) / 2)
    }))
}

/// A fully specified single-trajectory simulation.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub params: ModelParams,
    pub initial: CellField,
    pub mode: StepMode,
    pub t_end: f64,
    pub solver: NewtonSettings,
    pub seed: u64,
    /// Sorted times at which to capture the state; each is matched by the
    /// first step whose time reaches or crosses it.
    pub snapshot_times: Vec<f64>,
}

impl Simulation {
    /// Runs one trajectory; `sample` indexes the noise lineage and is 0 for
    /// plain single runs.
    pub fn run(&self, sample: u64) -> Result<Trajectory> {
        let (trajectory, err) = self.run_partial(sample);
        match err {
            None => Ok(trajectory),
            Some(e) => Err(e),
        }
    }

    /// Like [`Simulation::run`], but on failure also hands back the
    /// trajectory accumulated so far, so callers can write a partial ledger.
    pub fn run_partial(&self, sample: u64) -> (Trajectory, Option<Error>) {
        let empty = Trajectory {
            records: Vec::new(),
            snapshots: Vec::new(),
            final_state: self.initial.clone(),
            regime_switch_step: None,
        };
        match self.advance(sample) {
            Ok(t) => (t, None),
            Err((partial, e)) => (partial.unwrap_or(empty), Some(e)),
        }
    }

    #[allow(clippy::type_complexity, clippy::result_large_err)]
    fn advance(&self, sample: u64) -> std::result::Result<Trajectory, (Option<Trajectory>, Error)> {
        let p = &self.params;
        let eps = p.noise_strength;
        let fail = |e: Error| (None, e);
        if eps > 0.0 {
            if let StepMode::Adaptive(_) = self.mode {
                return Err(fail(Error::ConfigInvalid {
                    field: "time.mode".into(),
                    message: "adaptive stepping unsupported with noise".into(),
                }));
            }
        }
        if let StepMode::Adaptive(policy) = &self.mode {
            policy.validate().map_err(fail)?;
        }
        check_domain(&self.initial, p).map_err(fail)?;

        let geom = self.initial.geometry();
        let mut schedule: Vec<f64> = self.snapshot_times.clone();
        schedule.sort_by(|a, b| a.partial_cmp(b).unwrap());
        schedule.dedup();
        let mut next_snapshot = 0usize;

        let mut records = Vec::new();
        let mut snapshots = Vec::new();
        let mut regime_switch_step = None;

        let mut phi = self.initial.clone();
        let mut t = 0.0f64;
        let energy0 = discrete_energy(&phi, p).map_err(fail)?;
        let alpha0 = match &self.mode {
            StepMode::Constant { .. } => f64::NAN,
            StepMode::Adaptive(policy) => policy.alpha_min,
        };
        records.push(StepRecord {
            k: 0,
            t: 0.0,
            dt: 0.0,
            energy: energy0,
            uprime: 0.0,
            udoubleprime: 0.0,
            alpha: alpha0,
            newton_iters: 0,
            gmres_iters: 0,
        });
        while next_snapshot < schedule.len() && schedule[next_snapshot] <= 0.0 {
            snapshots.push(Snapshot {
                scheduled_t: schedule[next_snapshot],
                t: 0.0,
                k: 0,
                field: phi.clone(),
            });
            next_snapshot += 1;
        }

        let mut f_prev = energy0.f;
        let mut uprime_prev = 0.0f64;
        let mut threshold_exceeded = false;
        let mut latched = false;
        let mut dt = match &self.mode {
            StepMode::Constant { dt } => *dt,
            // No decay information yet; the formula at U' = 0 gives s_max.
            StepMode::Adaptive(policy) => next_step_size(0.0, policy.alpha_min, policy),
        };

        let mut k = 1usize;
        // On a mid-run failure, hand back everything recorded so far.
        macro_rules! try_partial {
            ($expr:expr) => {
                match $expr {
                    Ok(v) => v,
                    Err(e) => {
                        return Err((
                            Some(Trajectory {
                                records,
                                snapshots,
                                final_state: phi,
                                regime_switch_step,
                            }),
                            e,
                        ))
                    }
                }
            };
        }
        // Relative slack so that accumulated round-off in t cannot force a
        // spurious extra step when T is an exact multiple of the step size.
        let t_stop = self.t_end - 1e-12 * self.t_end.abs().max(1.0);
        while t < t_stop {
            let xi = if eps > 0.0 {
                Some(try_partial!(sample_noise(
                    geom, dt, self.seed, sample, k as u64
                )))
            } else {
                None
            };
            let (phi_next, solve_report) =
                try_partial!(newton_solve(&phi, dt, eps, xi.as_ref(), p, &self.solver));
            t += dt;

            let mu = try_partial!(chemical_potential(&phi_next, &phi, p));
            let uprime = energy_derivative(&mu);
            let energy = try_partial!(discrete_energy(&phi_next, p));
            if eps == 0.0 {
                let tol = ENERGY_DECAY_TOL * f_prev.abs().max(1.0);
                if energy.f > f_prev + tol {
                    let err = Error::EnergyIncrease {
                        k,
                        t,
                        from: f_prev,
                        to: energy.f,
                        tol,
                    };
                    return Err((
                        Some(Trajectory {
                            records,
                            snapshots,
                            final_state: phi,
                            regime_switch_step,
                        }),
                        err,
                    ));
                }
            }

            let udoubleprime = second_derivative(uprime, uprime_prev, dt);
            let alpha = match &self.mode {
                StepMode::Constant { .. } => f64::NAN,
                StepMode::Adaptive(policy) => {
                    if uprime.abs() > policy.switch_threshold {
                        threshold_exceeded = true;
                    }
                    if !latched && threshold_exceeded && uprime.abs() < policy.switch_threshold {
                        latched = true;
                        regime_switch_step = Some(k);
                    }
                    if latched {
                        policy.alpha_regime2
                    } else {
                        alpha_value(udoubleprime, policy)
                    }
                }
            };

            records.push(StepRecord {
                k,
                t,
                dt,
                energy,
                uprime,
                udoubleprime,
                alpha,
                newton_iters: solve_report.newton_iters,
                gmres_iters: solve_report.total_gmres_iters,
            });
            phi = phi_next;
            while next_snapshot < schedule.len() && t >= schedule[next_snapshot] {
                snapshots.push(Snapshot {
                    scheduled_t: schedule[next_snapshot],
                    t,
                    k,
                    field: phi.clone(),
                });
                next_snapshot += 1;
            }

            f_prev = energy.f;
            uprime_prev = uprime;
            dt = match &self.mode {
                StepMode::Constant { dt } => *dt,
                StepMode::Adaptive(policy) => next_step_size(uprime, alpha, policy),
            };
            k += 1;
        }

        // The loop may stop with t marginally below T by the round-off
        // slack; scheduled times up to T still belong to the final state.
        while next_snapshot < schedule.len() && schedule[next_snapshot] <= self.t_end {
            snapshots.push(Snapshot {
                scheduled_t: schedule[next_snapshot],
                t,
                k: k - 1,
                field: phi.clone(),
            });
            next_snapshot += 1;
        }

        Ok(Trajectory {
            records,
            snapshots,
            final_state: phi,
            regime_switch_step,
        })
    }

    /// Runs `n_samples` trajectories with sample-indexed noise lineages and
    /// reduces the pointwise-in-time mean energy in sample order.
    pub fn run_ensemble(&self, n_samples: usize) -> Result<Ensemble> {
        if !(self.params.noise_strength > 0.0) {
            return Err(Error::invalid(
                "epsilon",
                "ensembles require a positive noise strength",
            ));
        }
        if !matches!(self.mode, StepMode::Constant { .. }) {
            return Err(Error::ConfigInvalid {
                field: "time.mode".into(),
                message: "ensembles run with uniform time steps".into(),
            });
        }
        if n_samples == 0 {
            return Err(Error::invalid("n_samples", "need at least one sample"));
        }

        let results: Vec<Result<Trajectory>> = (0..n_samples as u64)
            .into_par_iter()
            .map(|sample| self.run(sample))
            .collect();
        let mut trajectories = Vec::with_capacity(n_samples);
        for (sample, r) in results.into_iter().enumerate() {
            match r {
                Ok(t) => trajectories.push(t),
                Err(e) => {
                    return Err(Error::SampleFailed {
                        sample: sample as u64,
                        source: Box::new(e),
                    })
                }
            }
        }

        let len = trajectories[0].records.len();
        for t in &trajectories {
            assert_eq!(t.records.len(), len, "uniform steps must align records");
        }
        // Fixed reduction order: samples in index order at each time level.
        let mean_energy = (0..len)
            .map(|k| {
                trajectories
                    .iter()
                    .map(|t| t.records[k].energy.f)
                    .sum::<f64>()
                    / n_samples as f64
            })
            .collect();

        Ok(Ensemble {
            trajectories,
            mean_energy,
        })
    }
}

/// Ensemble result: the member trajectories and the mean energy series.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub trajectories: Vec<Trajectory>,
    pub mean_energy: Vec<f64>,
}
