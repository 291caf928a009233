//! Mesh refinement study: the same run on coarser and finer grids, all
//! started from one fine-grid initial state restricted by cell-center
//! subsampling. Successive terminal states get closer as the mesh refines.
//!
//!     cargo run --release --example mesh_refinement

use mmc_tdgl::stepper::{disturbed_uniform, restrict, Simulation, StepMode};
use mmc_tdgl::{CellField, GridGeometry, ModelParams, NewtonSettings};

fn midline_l2(coarse: &CellField, finer: &CellField) -> f64 {
    let cg = coarse.geometry();
    let r = restrict(finer, cg).expect("restriction");
    let j = cg.ny() / 2;
    let sum: f64 = (0..cg.nx())
        .map(|i| {
            let d = coarse.get(i, j) - r.get(i, j);
            d * d
        })
        .sum();
    (cg.hx() * sum).sqrt()
}

fn main() {
    let params = ModelParams::new(0.16, 4.34, 2.37, 0.0).expect("parameters");
    let fine_geom = GridGeometry::new(50.0, 50.0, 128, 128).expect("grid");
    let initial_fine = disturbed_uniform(fine_geom, 0.6, 0.15, 99);

    let mut finals = Vec::new();
    for cells in [32usize, 64, 128] {
        let geom = GridGeometry::new(50.0, 50.0, cells, cells).expect("grid");
        let sim = Simulation {
            params,
            initial: restrict(&initial_fine, geom).expect("restriction"),
            mode: StepMode::Constant { dt: 0.005 },
            t_end: 0.5,
            solver: NewtonSettings::default(),
            seed: 99,
            snapshot_times: vec![],
        };
        let traj = sim.run(0).expect("run");
        println!(
            "{cells:>3}x{cells:<3}: {} steps, final F = {:.4}",
            traj.records.len() - 1,
            traj.records.last().unwrap().energy.f
        );
        finals.push(traj.final_state);
    }

    println!();
    println!("midline L2 differences of the terminal states (restricted to the coarser grid):");
    println!("  |32  - 64 | = {:.4e}", midline_l2(&finals[0], &finals[1]));
    println!("  |64  - 128| = {:.4e}", midline_l2(&finals[1], &finals[2]));
}
