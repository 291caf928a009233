//! Built-in invariant suite behind the `check` subcommand: fast sanity
//! checks of the discrete operators, the energy splitting, the derivative
//! chain, the noise construction, and a small solve, on tiny grids.

use crate::energy::{
    chemical_potential, convex_potential, discrete_energy, expansive_potential, hessian_action,
};
use crate::grid::CellField;
use crate::noise::sample_noise;
use crate::params::{GridGeometry, ModelParams};
use crate::solver::{newton_solve, residual, NewtonSettings};
use crate::stepper::{alpha_value, next_step_size, AdaptivePolicy};

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed,
        detail,
    }
}

fn pseudo_field(geom: GridGeometry, seed: u64, lo: f64, hi: f64) -> CellField {
    let mut state = seed.wrapping_mul(6364136223846793005).max(3);
    CellField::from_fn(geom, |_, _| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        let u = (state >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Runs the whole suite; each entry reports one named invariant.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    let mut results = Vec::new();
    let p = ModelParams::new(0.16, 4.34, 2.37, 0.0).expect("reference parameters");
    let g = GridGeometry::new(8.0, 8.0, 16, 16).expect("grid");

    // Adjoint and summation-by-parts identities.
    {
        let mut worst = 0.0f64;
        for s in 0..10 {
            let phi = pseudo_field(g, seed + s, -1.0, 1.0);
            let psi = pseudo_field(g, seed + 100 + s, -1.0, 1.0);
            let f = psi.diff_x();
            let gy = psi.diff_y();
            worst = worst
                .max(rel(f.inner(&phi.avg_x()), f.avg_center().inner(&phi)))
                .max(rel(f.inner(&phi.diff_x()), -f.diff_center().inner(&phi)))
                .max(rel(gy.inner(&phi.avg_y()), gy.avg_center().inner(&phi)))
                .max(rel(gy.inner(&phi.diff_y()), -gy.diff_center().inner(&phi)));
            let lhs = phi.inner(&psi.laplacian());
            let mid = -(phi.diff_x().inner(&psi.diff_x()) + phi.diff_y().inner(&psi.diff_y()));
            let rhs = phi.laplacian().inner(&psi);
            worst = worst.max(rel(lhs, mid)).max(rel(lhs, rhs));
        }
        results.push(outcome(
            "operator adjoints and summation by parts",
            worst <= 1e-12,
            format!("worst relative error {worst:.2e} (tol 1e-12)"),
        ));
    }

    // Laplacian negative semidefiniteness.
    {
        let mut worst = f64::NEG_INFINITY;
        for s in 0..10 {
            let phi = pseudo_field(g, seed + 200 + s, -1.0, 1.0);
            worst = worst.max(phi.inner(&phi.laplacian()) / phi.inner(&phi));
        }
        results.push(outcome(
            "discrete laplacian negative semidefinite",
            worst <= 1e-12,
            format!("largest normalized quadratic form {worst:.2e}"),
        ));
    }

    // Energy split identity and constant-state closed form.
    {
        let phi = pseudo_field(g, seed + 300, 0.2, 0.6);
        let rep = discrete_energy(&phi, &p).expect("in-domain");
        let split_exact = rep.f == rep.fc - rep.fe;
        let c = 0.3;
        let rep_c = discrete_energy(&CellField::constant(g, c), &p).expect("in-domain");
        let closed = g.lx() * g.ly() * (p.entropy(c) + p.huggins(c));
        let const_err = rel(rep_c.f, closed);
        results.push(outcome(
            "energy split and constant-state closed form",
            split_exact && const_err <= 1e-12,
            format!("split exact: {split_exact}, constant-state error {const_err:.2e}"),
        ));
    }

    // Variational derivative vs directional finite difference of Fc.
    {
        let phi = pseudo_field(g, seed + 400, 0.25, 0.6);
        let raw = pseudo_field(g, seed + 401, -1.0, 1.0);
        let m = raw.mean();
        let dir = raw.map(|v| v - m); // mean-zero kills the dropped constant of S'
        let v = convex_potential(&phi, &p).expect("in-domain");
        let t = 1e-6;
        let mut up = phi.clone();
        up.add_scaled(t, &dir);
        let mut dn = phi.clone();
        dn.add_scaled(-t, &dir);
        let fd = (discrete_energy(&up, &p).unwrap().fc - discrete_energy(&dn, &p).unwrap().fc)
            / (2.0 * t);
        // Mean-zero direction kills the dropped constant of S'.
        let err = rel(fd, v.inner(&dir));
        results.push(outcome(
            "convex potential vs energy finite difference",
            err <= 1e-5,
            format!("relative error {err:.2e} (tol 1e-5)"),
        ));
    }

    // Hessian action: symmetry and directional consistency.
    {
        let phi = pseudo_field(g, seed + 500, 0.25, 0.6);
        let a = pseudo_field(g, seed + 501, -1.0, 1.0);
        let b = pseudo_field(g, seed + 502, -1.0, 1.0);
        let ha = hessian_action(&phi, &a, &p).unwrap();
        let hb = hessian_action(&phi, &b, &p).unwrap();
        let sym = rel(a.inner(&hb), ha.inner(&b));
        let t = 1e-6;
        let mut up = phi.clone();
        up.add_scaled(t, &a);
        let mut dn = phi.clone();
        dn.add_scaled(-t, &a);
        let vp = convex_potential(&up, &p).unwrap();
        let vm = convex_potential(&dn, &p).unwrap();
        let scale = ha.norm_inf();
        let mut worst = 0.0f64;
        for k in 0..g.cells() {
            let fd = (vp.as_slice()[k] - vm.as_slice()[k]) / (2.0 * t);
            worst = worst.max((fd - ha.as_slice()[k]).abs() / scale);
        }
        results.push(outcome(
            "hessian action symmetry and finite-difference consistency",
            sym <= 1e-10 && worst <= 1e-5,
            format!("symmetry {sym:.2e}, consistency {worst:.2e}"),
        ));
    }

    // Second derivative of the de Gennes coefficient.
    {
        let t = 1e-6;
        let mut worst = 0.0f64;
        for k in 1..100 {
            let u = 0.05 + 0.85 * k as f64 / 100.0;
            let fd = (p.de_gennes_d(u + t) - p.de_gennes_d(u - t)) / (2.0 * t);
            worst = worst.max(rel(fd, p.de_gennes_dd(u)));
        }
        results.push(outcome(
            "de Gennes coefficient second derivative",
            worst <= 1e-7,
            format!("worst relative error {worst:.2e} (tol 1e-7)"),
        ));
    }

    // Noise: conservativity and reproducibility.
    {
        let gn = GridGeometry::new(50.0, 50.0, 8, 8).expect("grid");
        let mut worst = 0.0f64;
        for step in 0..100 {
            let xi = sample_noise(gn, 0.01, seed, 0, step).unwrap();
            worst = worst.max(xi.as_slice().iter().sum::<f64>().abs());
        }
        let a = sample_noise(gn, 0.01, seed, 1, 7).unwrap();
        let b = sample_noise(gn, 0.01, seed, 1, 7).unwrap();
        let reproducible = a.as_slice() == b.as_slice();
        results.push(outcome(
            "noise conservativity and reproducibility",
            worst <= 1e-13 && reproducible,
            format!("worst grid sum {worst:.2e}, reproducible: {reproducible}"),
        ));
    }

    // One small solve: residual at the fixed point, energy decay, mass.
    {
        let settings = NewtonSettings::default();
        let c = CellField::constant(g, 0.3);
        let r0 = residual(&c, &c, 0.5, 0.0, None, &p).unwrap().norm_inf();

        let phi0 = pseudo_field(g, seed + 600, 0.45, 0.75);
        let mut ok = r0 == 0.0;
        let mut detail = format!("fixed-point residual {r0:.1e}");
        for dt in [1e-3, 1.0] {
            let mut phi = phi0.clone();
            let mut f_prev = discrete_energy(&phi, &p).unwrap().f;
            for _ in 0..3 {
                match newton_solve(&phi, dt, 0.0, None, &p, &settings) {
                    Ok((next, _)) => {
                        let f = discrete_energy(&next, &p).unwrap().f;
                        if f > f_prev + 1e-10 * f_prev.abs().max(1.0) {
                            ok = false;
                            detail = format!("energy rose at dt {dt}");
                        }
                        if (next.mean() - phi0.mean()).abs() > 1e-12 {
                            ok = false;
                            detail = format!("mass drifted at dt {dt}");
                        }
                        f_prev = f;
                        phi = next;
                    }
                    Err(e) => {
                        ok = false;
                        detail = format!("solve failed at dt {dt}: {e}");
                        break;
                    }
                }
            }
        }
        // The chemical potential of a converged step drives the controller.
        if ok {
            let (next, _) = newton_solve(&phi0, 0.01, 0.0, None, &p, &settings).unwrap();
            let mu = chemical_potential(&next, &phi0, &p).unwrap();
            let up = crate::stepper::energy_derivative(&mu);
            if up > 0.0 {
                ok = false;
                detail = format!("positive energy derivative {up:.2e}");
            }
        }
        results.push(outcome("one-step solves on a tiny grid", ok, detail));
    }

    // Controller formulas.
    {
        let policy = AdaptivePolicy::default();
        let ok = alpha_value(0.0, &policy) == policy.alpha_min
            && alpha_value(-1.0, &policy) == 1.1e6
            && alpha_value(7.0, &policy) == policy.alpha_min
            && next_step_size(0.0, policy.alpha_min, &policy) == policy.s_max
            && next_step_size(1e300, policy.alpha_min, &policy) == policy.s_min;
        results.push(outcome(
            "adaptive controller formulas",
            ok,
            "branch values and clamping".to_string(),
        ));
    }

    // Expansive potential linearity (it enters the scheme explicitly).
    {
        let phi = pseudo_field(g, seed + 700, 0.1, 0.8);
        let two = expansive_potential(&phi.map(|v| 2.0 * v), &p);
        let mut one = expansive_potential(&phi, &p);
        one.scale(2.0);
        let linear = two
            .as_slice()
            .iter()
            .zip(one.as_slice())
            .all(|(a, b)| (a - b).abs() <= 1e-14 * b.abs().max(1.0));
        results.push(outcome(
            "expansive potential linearity",
            linear,
            "scaling by 2".to_string(),
        ));
    }

    results
}
