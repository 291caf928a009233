//! One time-step solve of the fully discrete convex-splitting scheme.
//!
//! Advancing `phi_prev` by a step `s` means finding `phi` with
//!
//! ```text
//! phi - phi_prev = s lap_h(mu) + s eps xi,
//! mu = delta Fc(phi) - delta Fe(phi_prev),
//! ```
//!
//! which is strictly convex and uniquely solvable for any `s > 0`. The
//! nonlinear system is solved by Newton iteration started from `phi_prev`;
//! each Newton equation is solved matrix-free by restarted GMRES with
//! modified Gram-Schmidt orthogonalization and Givens-rotation least squares.
//!
//! The Newton update is damped only to keep iterates inside the admissible
//! concentration interval, where the logarithms of the energy are defined;
//! whenever the full step already stays inside, plain undamped Newton is
//! recovered.

use crate::energy::{
    check_domain, convex_potential, expansive_potential, ConvexHessian, DOMAIN_GUARD,
};
use crate::error::{Error, Result};
use crate::grid::CellField;
use crate::params::ModelParams;

/// Newton/GMRES tolerances and caps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    /// Stop when the max-norm of the Newton step falls below this.
    pub tol_newton: f64,
    pub max_newton_iters: usize,
    /// Relative residual target of the inner linear solve.
    pub tol_gmres: f64,
    pub gmres_restart: usize,
    pub max_gmres_restarts: usize,
    /// Half-width of the admissible-interval guard used by the damping rule.
    pub domain_guard: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tol_newton: 1e-9,
            max_newton_iters: 50,
            tol_gmres: 1e-8,
            gmres_restart: 40,
            max_gmres_restarts: 25,
            domain_guard: DOMAIN_GUARD,
        }
    }
}

/// Per-step solve ledger.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepSolveReport {
    pub newton_iters: usize,
    pub total_gmres_iters: usize,
    pub final_step_norm: f64,
    pub final_residual_norm: f64,
    pub damping_events: usize,
}

/// Nonlinear residual of the scheme at a trial state `phi`:
/// `R(phi) = phi - phi_prev - s lap_h(delta Fc(phi) - delta Fe(phi_prev)) - s eps xi`.
/// In deterministic mode (`noise_strength = 0`) the noise field is ignored.
pub fn residual(
    phi: &CellField,
    phi_prev: &CellField,
    dt: f64,
    noise_strength: f64,
    xi: Option<&CellField>,
    p: &ModelParams,
) -> Result<CellField> {
    let mu = {
        let mut mu = convex_potential(phi, p)?;
        mu.add_scaled(-1.0, &expansive_potential(phi_prev, p));
        mu
    };
    let mut r = phi.clone();
    r.add_scaled(-1.0, phi_prev);
    r.add_scaled(-dt, &mu.laplacian());
    if noise_strength > 0.0 {
        let xi = xi.expect("noise field required when noise strength is positive");
        r.add_scaled(-dt * noise_strength, xi);
    }
    Ok(r)
}

/// Jacobian of the residual applied to a direction, matrix-free:
/// `psi - s lap_h(H(phi) psi)`.
pub fn newton_operator(
    phi: &CellField,
    dir: &CellField,
    dt: f64,
    p: &ModelParams,
) -> Result<CellField> {
    let hess = ConvexHessian::new(phi, p)?;
    Ok(apply_jacobian(&hess, dir, dt))
}

fn apply_jacobian(hess: &ConvexHessian, dir: &CellField, dt: f64) -> CellField {
    let mut out = dir.clone();
    out.add_scaled(-dt, &hess.apply(dir).laplacian());
    out
}

fn dot(a: &CellField, b: &CellField) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice().iter())
        .map(|(&x, &y)| x * y)
        .sum()
}

fn l2(a: &CellField) -> f64 {
    dot(a, a).sqrt()
}

/// Result of a converged GMRES solve. `rel_residual` is recomputed from a
/// fresh operator application at the returned solution, never read off the
/// Givens estimate.
#[derive(Debug)]
pub struct GmresOutcome {
    pub solution: CellField,
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Restarted GMRES for `apply(x) = rhs`, zero initial guess.
pub fn gmres<A>(
    apply: A,
    rhs: &CellField,
    tol: f64,
    restart: usize,
    max_restarts: usize,
) -> Result<GmresOutcome>
where
    A: Fn(&CellField) -> CellField,
{
    assert!(restart >= 1, "restart length must be at least 1");
    let bnorm = l2(rhs);
    if bnorm == 0.0 {
        return Ok(GmresOutcome {
            solution: CellField::zeros(rhs.geometry()),
            iterations: 0,
            rel_residual: 0.0,
        });
    }

    let mut x = CellField::zeros(rhs.geometry());
    let mut total_iters = 0usize;
    let mut best: Option<(CellField, f64)> = None;

    for cycle in 0..=max_restarts {
        // True residual; the convergence decision and the reported value
        // always come from here.
        let mut r = rhs.clone();
        r.add_scaled(-1.0, &apply(&x));
        let rnorm = l2(&r);
        let rel = rnorm / bnorm;
        if best.as_ref().is_none_or(|(_, b)| rel < *b) {
            best = Some((x.clone(), rel));
        }
        if rel <= tol {
            return Ok(GmresOutcome {
                solution: x,
                iterations: total_iters,
                rel_residual: rel,
            });
        }
        if cycle == max_restarts {
            break;
        }

        // Arnoldi with modified Gram-Schmidt; H stored by columns.
        let mut basis: Vec<CellField> = Vec::with_capacity(restart + 1);
        let mut hcols: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let mut cs = vec![0.0f64; restart];
        let mut sn = vec![0.0f64; restart];
        let mut g = vec![0.0f64; restart + 1];
        g[0] = rnorm;
        let mut v0 = r;
        v0.scale(1.0 / rnorm);
        basis.push(v0);

        let mut kdim = 0usize;
        for k in 0..restart {
            total_iters += 1;
            let mut w = apply(&basis[k]);
            let mut col = vec![0.0f64; k + 2];
            for (j, vj) in basis.iter().enumerate() {
                let hjk = dot(&w, vj);
                w.add_scaled(-hjk, vj);
                col[j] = hjk;
            }
            let hk1 = l2(&w);
            col[k + 1] = hk1;

            // Previous rotations, then a new one to annihilate col[k+1].
            for j in 0..k {
                let t = cs[j] * col[j] + sn[j] * col[j + 1];
                col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1];
                col[j] = t;
            }
            let (c, s) = givens(col[k], col[k + 1]);
            cs[k] = c;
            sn[k] = s;
            col[k] = c * col[k] + s * col[k + 1];
            col[k + 1] = 0.0;
            let t = c * g[k] + s * g[k + 1];
            g[k + 1] = -s * g[k] + c * g[k + 1];
            g[k] = t;

            hcols.push(col);
            kdim = k + 1;

            if hk1 == 0.0 {
                // Invariant subspace reached; the least-squares problem is
                // exact at this dimension.
                break;
            }
            if k + 1 < restart + 1 {
                let mut v = w;
                v.scale(1.0 / hk1);
                basis.push(v);
            }
            if g[k + 1].abs() / bnorm <= tol {
                break;
            }
        }

        // Back-substitution for the Krylov coefficients.
        let mut y = vec![0.0f64; kdim];
        for i in (0..kdim).rev() {
            let mut s = g[i];
            for (j, yj) in y.iter().enumerate().take(kdim).skip(i + 1) {
                s -= hcols[j][i] * yj;
            }
            let d = hcols[i][i];
            y[i] = if d != 0.0 { s / d } else { 0.0 };
        }
        for (j, yj) in y.iter().enumerate() {
            x.add_scaled(*yj, &basis[j]);
        }
    }

    let (best_x, achieved) = best.expect("at least one residual evaluation");
    Err(Error::GmresStagnated {
        achieved,
        target: tol,
        iters: total_iters,
        best: best_x,
    })
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else if a.abs() > b.abs() {
        let t = b / a;
        let c = 1.0 / (1.0 + t * t).sqrt();
        (c, c * t)
    } else {
        let t = a / b;
        let s = 1.0 / (1.0 + t * t).sqrt();
        (s * t, s)
    }
}

/// Advances one time step: Newton iteration started from `phi_prev`.
pub fn newton_solve(
    phi_prev: &CellField,
    dt: f64,
    noise_strength: f64,
    xi: Option<&CellField>,
    p: &ModelParams,
    settings: &NewtonSettings,
) -> Result<(CellField, StepSolveReport)> {
    newton_solve_from(
        phi_prev.clone(),
        phi_prev,
        dt,
        noise_strength,
        xi,
        p,
        settings,
    )
}

/// Newton iteration from an explicit starting iterate. The converged state
/// does not depend on the start (the scheme is uniquely solvable); this entry
/// point exists so that independence can be probed.
#[allow(clippy::too_many_arguments)]
pub fn newton_solve_from(
    start: CellField,
    phi_prev: &CellField,
    dt: f64,
    noise_strength: f64,
    xi: Option<&CellField>,
    p: &ModelParams,
    settings: &NewtonSettings,
) -> Result<(CellField, StepSolveReport)> {
    assert!(dt > 0.0, "time step must be positive");
    check_domain(phi_prev, p)?;
    let guard = settings.domain_guard.max(DOMAIN_GUARD);
    let (lo, hi) = (guard, p.phi_max() - guard);
    const LAMBDA_MIN: f64 = 1.0 / (1u64 << 30) as f64;

    // delta Fe(phi_prev) is fixed across the Newton iteration.
    let exp_prev = expansive_potential(phi_prev, p);
    let eval_residual = |x: &CellField| -> Result<CellField> {
        let mut mu = convex_potential(x, p)?;
        mu.add_scaled(-1.0, &exp_prev);
        let mut r = x.clone();
        r.add_scaled(-1.0, phi_prev);
        r.add_scaled(-dt, &mu.laplacian());
        if noise_strength > 0.0 {
            let xi = xi.expect("noise field required when noise strength is positive");
            r.add_scaled(-dt * noise_strength, xi);
        }
        Ok(r)
    };

    let mut x = start;
    let mut report = StepSolveReport::default();
    let mut step_norm = f64::INFINITY;

    for iter in 1..=settings.max_newton_iters {
        let hess = ConvexHessian::new(&x, p)?;
        let mut rhs = eval_residual(&x)?;
        rhs.scale(-1.0);

        let outcome = gmres(
            |v| apply_jacobian(&hess, v, dt),
            &rhs,
            settings.tol_gmres,
            settings.gmres_restart,
            settings.max_gmres_restarts,
        )?;
        report.total_gmres_iters += outcome.iterations;
        let step = outcome.solution;
        step_norm = step.norm_inf();

        // Halve the damping factor until the update stays inside the
        // admissible interval.
        let mut lambda = 1.0f64;
        loop {
            let inside = x
                .as_slice()
                .iter()
                .zip(step.as_slice().iter())
                .all(|(&xv, &pv)| {
                    let v = xv + lambda * pv;
                    v >= lo && v <= hi
                });
            if inside {
                break;
            }
            lambda *= 0.5;
            if lambda < LAMBDA_MIN {
                report.newton_iters = iter;
                report.final_step_norm = step_norm;
                return Err(Error::DampingFloor {
                    iter,
                    step_norm,
                    report,
                });
            }
        }
        if lambda < 1.0 {
            report.damping_events += 1;
        }
        x.add_scaled(lambda, &step);
        report.newton_iters = iter;

        if step_norm < settings.tol_newton {
            report.final_step_norm = step_norm;
            report.final_residual_norm = l2(&eval_residual(&x)?);
            x.assert_finite("converged newton iterate");
            return Ok((x, report));
        }
    }

    report.final_step_norm = step_norm;
    Err(Error::NewtonMaxIters {
        max_iters: settings.max_newton_iters,
        step_norm,
        report,
    })
}
