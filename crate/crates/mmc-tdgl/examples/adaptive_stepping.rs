//! The two-regime adaptive step controller against a constant-step baseline.
//!
//! The step size follows s_{k+1} = max{s_min, s_max / sqrt(1 + alpha_k U'^2)}
//! with alpha_k grown from the second derivative of the energy while the
//! sharp decay is still ahead, and latched to a small constant once |U'| has
//! fallen back below the switch threshold. The run reaches the same horizon
//! in far fewer steps without giving up the energy decrease.
//!
//!     cargo run --release --example adaptive_stepping

use mmc_tdgl::stepper::{disturbed_uniform, AdaptivePolicy, Simulation, StepMode};
use mmc_tdgl::{GridGeometry, ModelParams, NewtonSettings};

fn main() {
    let params = ModelParams::new(0.16, 4.34, 2.37, 0.0).expect("reference parameters");
    let geom = GridGeometry::new(50.0, 50.0, 32, 32).expect("grid");
    let initial = disturbed_uniform(geom, 0.6, 0.15, 7);
    let t_end = 5.0;

    let policy = AdaptivePolicy::default();
    let adaptive = Simulation {
        params,
        initial: initial.clone(),
        mode: StepMode::Adaptive(policy),
        t_end,
        solver: NewtonSettings::default(),
        seed: 7,
        snapshot_times: vec![],
    }
    .run(0)
    .expect("adaptive run");

    let constant = Simulation {
        params,
        initial,
        mode: StepMode::Constant { dt: policy.s_min },
        t_end,
        solver: NewtonSettings::default(),
        seed: 7,
        snapshot_times: vec![],
    }
    .run(0)
    .expect("constant run");

    println!("horizon T = {t_end}");
    println!(
        "  adaptive: {} steps, final F = {:.4}",
        adaptive.records.len() - 1,
        adaptive.records.last().unwrap().energy.f
    );
    println!(
        "  constant: {} steps, final F = {:.4}",
        constant.records.len() - 1,
        constant.records.last().unwrap().energy.f
    );
    match adaptive.regime_switch_step {
        Some(k) => {
            let r = &adaptive.records[k];
            println!(
                "  regime-2 latch at step {k} (t = {:.3}), alpha -> {}",
                r.t, r.alpha
            );
        }
        None => println!("  regime-2 latch did not engage before T"),
    }

    println!();
    println!("sampled controller state along the adaptive run:");
    println!("k      t        s        |U'|        alpha");
    let n = adaptive.records.len();
    for idx in (0..n).step_by((n / 12).max(1)) {
        let r = &adaptive.records[idx];
        println!(
            "{:<6} {:<8.3} {:<8.4} {:<11.4e} {:.3e}",
            r.k,
            r.t,
            r.dt,
            r.uprime.abs(),
            r.alpha
        );
    }
}
