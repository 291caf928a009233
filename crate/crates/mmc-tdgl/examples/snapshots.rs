//! Writing and reading run outputs: scheduled field snapshots as grid CSVs
//! (bit-exact round trip) and 8-bit graymap heatmaps.
//!
//!     cargo run --release --example snapshots
//!
//! Files land in `runs/example-snapshots/`.

use std::path::Path;

use mmc_tdgl::output::{graymap, parse_snapshot_csv, snapshot_csv, write_atomic};
use mmc_tdgl::stepper::{disturbed_uniform, Simulation, StepMode};
use mmc_tdgl::{GridGeometry, ModelParams, NewtonSettings};

fn main() {
    let params = ModelParams::new(0.16, 4.34, 2.37, 0.0).expect("parameters");
    let geom = GridGeometry::new(50.0, 50.0, 64, 64).expect("grid");
    let sim = Simulation {
        params,
        initial: disturbed_uniform(geom, 0.6, 0.15, 3),
        mode: StepMode::Adaptive(Default::default()),
        t_end: 3.0,
        solver: NewtonSettings::default(),
        seed: 3,
        snapshot_times: vec![0.0, 0.5, 1.5, 3.0],
    };
    let traj = sim.run(0).expect("run");

    let dir = Path::new("runs/example-snapshots");
    std::fs::create_dir_all(dir).expect("output dir");
    for snap in &traj.snapshots {
        let csv = snapshot_csv(&snap.field, snap.t);
        let csv_path = dir.join(format!("t{}.csv", snap.scheduled_t));
        write_atomic(&csv_path, csv.as_bytes()).expect("write csv");

        // Round trip is bit-exact.
        let (t_back, field_back) = parse_snapshot_csv(&csv, &csv_path).expect("parse back");
        assert_eq!(t_back.to_bits(), snap.t.to_bits());
        assert_eq!(field_back.as_slice(), snap.field.as_slice());

        // Gray levels map [0, 1/rho] to [0, 255], fixed across frames.
        let pgm_path = dir.join(format!("t{}.pgm", snap.scheduled_t));
        write_atomic(&pgm_path, &graymap(&snap.field, params.phi_max())).expect("write pgm");

        println!(
            "t = {:<4}  phi in [{:.4}, {:.4}]  ->  {} / {}",
            snap.scheduled_t,
            snap.field.min_value(),
            snap.field.max_value(),
            csv_path.display(),
            pgm_path.display()
        );
    }
}
