//! Subcommand drivers behind the batch CLI: single runs, ensembles, mesh
//! refinement studies, and the built-in check suite. Every command resolves
//! its configuration, runs, writes its outputs, and finishes by writing a
//! manifest that embeds the resolved config — even when the run failed, so
//! partial ledgers stay attributable.

use std::path::{Path, PathBuf};

use crate::config::{parse_config, Manifest, RunConfig, MANIFEST_SCHEMA};
use crate::error::{Error, Result};
use crate::grid::CellField;
use crate::noise::GENERATOR_ID;
use crate::output::{
    energy_csv, mean_energy_csv, snapshot_csv, unix_now, write_atomic, write_manifest,
    write_trajectory,
};
use crate::params::GridGeometry;
use crate::stepper::{restrict, Simulation, Trajectory};

/// Environment variable supplying the default output directory when neither
/// the CLI flag nor the config names one.
pub const OUTPUT_DIR_ENV: &str = "MMC_TDGL_OUTPUT_DIR";

/// Options common to all subcommands, mirroring the CLI flags.
#[derive(Debug, Clone, Default)]
pub struct CliOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub quiet: bool,
    pub jobs: Option<usize>,
}

impl CliOptions {
    fn log(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// Loads the config, applies CLI overrides, and resolves the output
/// directory (flag > config > environment > `./runs`).
fn load_config(opts: &CliOptions) -> Result<RunConfig> {
    let mut cfg = parse_config(&opts.config)?;
    if let Some(seed) = opts.seed {
        cfg.run.seed = seed;
    }
    let outdir = opts
        .output_dir
        .clone()
        .or_else(|| cfg.run.output_dir.clone())
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));
    cfg.run.output_dir = Some(outdir);
    Ok(cfg)
}

fn manifest_for(
    command: &str,
    cfg: RunConfig,
    started: f64,
    status: String,
    outputs: Vec<String>,
) -> Manifest {
    Manifest {
        schema: MANIFEST_SCHEMA.to_string(),
        command: command.to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        rng: GENERATOR_ID.to_string(),
        started_unix: started,
        finished_unix: unix_now(),
        status,
        outputs,
        config: cfg,
    }
}

fn status_of(err: &Option<Error>) -> String {
    match err {
        None => "ok".to_string(),
        Some(e) => format!("failed: {e}"),
    }
}

/// `run`: one trajectory, written as energy/ledger CSVs, scheduled
/// snapshots, and a manifest. Returns the output directory.
pub fn cmd_run(opts: &CliOptions) -> Result<PathBuf> {
    let started = unix_now();
    let cfg = load_config(opts)?;
    let outdir = cfg.run.output_dir.clone().expect("resolved");
    let sim = cfg.simulation()?;
    opts.log(format!(
        "run: {}x{} cells on ({}, {}), T={}, seed={}",
        cfg.grid.m, cfg.grid.n, cfg.grid.lx, cfg.grid.ly, cfg.time.t_end, cfg.run.seed
    ));

    let (trajectory, err) = sim.run_partial(0);
    let outputs = write_trajectory(&outdir, &trajectory, sim.params.phi_max())?;
    let manifest = manifest_for("run", cfg, started, status_of(&err), outputs);
    write_manifest(&outdir.join("manifest.toml"), &manifest)?;

    match err {
        None => {
            opts.log(format!(
                "run: {} steps, final F = {}",
                trajectory.records.len().saturating_sub(1),
                trajectory
                    .records
                    .last()
                    .map(|r| r.energy.f)
                    .unwrap_or(f64::NAN)
            ));
            Ok(outdir)
        }
        Some(e) => Err(e),
    }
}

/// `ensemble`: `run.n_samples` trajectories with sample-indexed noise
/// lineages, per-sample energy CSVs, and the mean energy series.
pub fn cmd_ensemble(opts: &CliOptions) -> Result<PathBuf> {
    let started = unix_now();
    let cfg = load_config(opts)?;
    let outdir = cfg.run.output_dir.clone().expect("resolved");
    let sim = cfg.simulation()?;
    let n = cfg.run.n_samples;
    opts.log(format!("ensemble: {n} samples, seed {}", cfg.run.seed));

    let run_all = || sim.run_ensemble(n);
    let result = match opts.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool")
            .install(run_all),
        None => run_all(),
    };

    match result {
        Ok(ensemble) => {
            std::fs::create_dir_all(&outdir).map_err(|e| Error::io(&outdir, e))?;
            let mut outputs = Vec::new();
            let mean_name = "mean_energy.csv";
            write_atomic(
                &outdir.join(mean_name),
                mean_energy_csv(&ensemble.trajectories[0].records, &ensemble.mean_energy)
                    .as_bytes(),
            )?;
            outputs.push(mean_name.to_string());
            for (idx, t) in ensemble.trajectories.iter().enumerate() {
                let sample_dir = outdir.join("samples").join(format!("s{idx:03}"));
                std::fs::create_dir_all(&sample_dir).map_err(|e| Error::io(&sample_dir, e))?;
                write_atomic(
                    &sample_dir.join("energy.csv"),
                    energy_csv(&t.records).as_bytes(),
                )?;
                outputs.push(format!("samples/s{idx:03}/energy.csv"));
            }
            let manifest = manifest_for("ensemble", cfg, started, "ok".into(), outputs);
            write_manifest(&outdir.join("manifest.toml"), &manifest)?;
            Ok(outdir)
        }
        Err(e) => {
            std::fs::create_dir_all(&outdir).map_err(|io| Error::io(&outdir, io))?;
            let manifest =
                manifest_for("ensemble", cfg, started, format!("failed: {e}"), Vec::new());
            write_manifest(&outdir.join("manifest.toml"), &manifest)?;
            Err(e)
        }
    }
}

/// Midline profile of a field: the cell row just above `y = Ly/2`, written
/// as `x,phi` pairs.
fn midline_csv(field: &CellField) -> String {
    use std::fmt::Write as _;
    let g = field.geometry();
    let j = g.ny() / 2;
    let mut out = String::from("x,phi\n");
    for i in 0..g.nx() {
        let _ = writeln!(out, "{:?},{:?}", g.cell_x(i), field.get(i, j));
    }
    out
}

/// Grid-restricted L2 distance between midline profiles: the finer field is
/// restricted onto the coarse grid first.
fn midline_l2_diff(coarse: &CellField, finer: &CellField) -> Result<f64> {
    let restricted = restrict(finer, coarse.geometry())?;
    let g = coarse.geometry();
    let j = g.ny() / 2;
    let mut sum = 0.0;
    for i in 0..g.nx() {
        let d = coarse.get(i, j) - restricted.get(i, j);
        sum += d * d;
    }
    Ok((g.hx() * sum).sqrt())
}

fn field_l2_diff(coarse: &CellField, finer: &CellField) -> Result<f64> {
    let restricted = restrict(finer, coarse.geometry())?;
    let mut diff = coarse.clone();
    diff.add_scaled(-1.0, &restricted);
    Ok(diff.inner(&diff).sqrt())
}

/// `mesh-study`: repeats the configured run over a list of grids, sharing
/// the finest grid's initial data by cell-center restriction, and reports
/// successive differences of the terminal states.
pub fn cmd_mesh_study(opts: &CliOptions, grids: &[(usize, usize)]) -> Result<PathBuf> {
    let started = unix_now();
    let cfg = load_config(opts)?;
    let outdir = cfg.run.output_dir.clone().expect("resolved");
    if grids.len() < 2 {
        return Err(Error::invalid(
            "grids",
            "need at least two grids to compare",
        ));
    }
    let mut grids = grids.to_vec();
    grids.sort_by_key(|&(m, n)| m * n);
    let (fine_m, fine_n) = *grids.last().expect("non-empty");
    for &(m, n) in &grids {
        if fine_m % m != 0 || fine_n % n != 0 {
            return Err(Error::invalid(
                "grids",
                format!("{m}x{n} does not divide the finest grid {fine_m}x{fine_n}"),
            ));
        }
    }

    let params = cfg.params()?;
    let fine_geom = GridGeometry::new(cfg.grid.lx, cfg.grid.ly, fine_m, fine_n)?;
    let initial_fine = cfg.initial_field(fine_geom);

    let mut outputs = Vec::new();
    let mut finals: Vec<(String, Trajectory)> = Vec::new();
    let mut failure: Option<Error> = None;
    for &(m, n) in &grids {
        let label = format!("g{m}x{n}");
        opts.log(format!("mesh-study: running {label}"));
        let geom = GridGeometry::new(cfg.grid.lx, cfg.grid.ly, m, n)?;
        let sim = Simulation {
            params,
            initial: restrict(&initial_fine, geom)?,
            mode: cfg.step_mode(),
            t_end: cfg.time.t_end,
            solver: cfg.newton_settings(),
            seed: cfg.run.seed,
            snapshot_times: cfg.run.snapshot_times.clone(),
        };
        let (trajectory, err) = sim.run_partial(0);
        let subdir = outdir.join(&label);
        for name in write_trajectory(&subdir, &trajectory, params.phi_max())? {
            outputs.push(format!("{label}/{name}"));
        }
        write_atomic(
            &subdir.join("final.csv"),
            snapshot_csv(
                &trajectory.final_state,
                trajectory.records.last().map(|r| r.t).unwrap_or(0.0),
            )
            .as_bytes(),
        )?;
        outputs.push(format!("{label}/final.csv"));
        write_atomic(
            &subdir.join("midline.csv"),
            midline_csv(&trajectory.final_state).as_bytes(),
        )?;
        outputs.push(format!("{label}/midline.csv"));
        if let Some(e) = err {
            failure = Some(e);
            break;
        }
        finals.push((label, trajectory));
    }

    if failure.is_none() {
        use std::fmt::Write as _;
        let mut summary = String::from("coarse,fine,midline_l2,field_l2\n");
        for pair in finals.windows(2) {
            let (ref cl, ref ct) = pair[0];
            let (ref fl, ref ft) = pair[1];
            let ml = midline_l2_diff(&ct.final_state, &ft.final_state)?;
            let fl2 = field_l2_diff(&ct.final_state, &ft.final_state)?;
            let _ = writeln!(summary, "{cl},{fl},{ml:?},{fl2:?}");
        }
        write_atomic(&outdir.join("summary.csv"), summary.as_bytes())?;
        outputs.push("summary.csv".to_string());
    }

    let manifest = manifest_for("mesh-study", cfg, started, status_of(&failure), outputs);
    write_manifest(&outdir.join("manifest.toml"), &manifest)?;
    match failure {
        None => Ok(outdir),
        Some(e) => Err(e),
    }
}

/// `check`: runs the invariant suite on tiny grids; returns whether all
/// checks passed. One line per check is printed unless `quiet`, in which
/// case only failures are.
pub fn cmd_check(opts: &CliOptions) -> bool {
    let results = crate::selftest::run_all(20260809);
    let mut all = true;
    for c in &results {
        if !c.passed {
            all = false;
        }
        if !opts.quiet || !c.passed {
            println!(
                "check {:<55} {} ({})",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.detail
            );
        }
    }
    println!(
        "check summary: {}/{} passed",
        results.iter().filter(|c| c.passed).count(),
        results.len()
    );
    all
}

/// Reads two files and reports whether they are byte-identical.
pub fn files_identical(a: &Path, b: &Path) -> Result<bool> {
    let da = std::fs::read(a).map_err(|e| Error::io(a, e))?;
    let db = std::fs::read(b).map_err(|e| Error::io(b, e))?;
    Ok(da == db)
}
