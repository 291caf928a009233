//! Run configuration files and the run manifest.
//!
//! Configs are TOML with six sections; `[model]` and `[time]` are required,
//! the rest fall back to the documented defaults (desk-scale 64x64 grid on a
//! 50x50 domain, disturbed-uniform initial state, reference solver
//! tolerances). Unknown keys are rejected. A manifest written by a finished
//! run embeds its fully resolved config under `[config]` and is accepted
//! anywhere a config is, so any run can be re-executed from its manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::CellField;
use crate::params::{GridGeometry, ModelParams};
use crate::solver::NewtonSettings;
use crate::stepper::{disturbed_uniform, AdaptivePolicy, Simulation, StepMode};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub chi: f64,
    #[serde(rename = "M")]
    pub microsphere_volume: f64,
    #[serde(rename = "N")]
    pub polymerization: f64,
    #[serde(default)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "Lx", default = "default_edge")]
    pub lx: f64,
    #[serde(rename = "Ly", default = "default_edge")]
    pub ly: f64,
    #[serde(default = "default_cells")]
    pub m: usize,
    #[serde(default = "default_cells")]
    pub n: usize,
}

fn default_edge() -> f64 {
    50.0
}
fn default_cells() -> usize {
    64
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            lx: default_edge(),
            ly: default_edge(),
            m: default_cells(),
            n: default_cells(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    Constant,
    Adaptive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub mode: TimeMode,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_const: Option<f64>,
    #[serde(default = "default_s_min")]
    pub s_min: f64,
    #[serde(default = "default_s_max")]
    pub s_max: f64,
    #[serde(default = "default_alpha_min")]
    pub alpha_min: f64,
    #[serde(rename = "A", default = "default_gain")]
    pub curvature_gain: f64,
    #[serde(default = "default_switch")]
    pub switch_threshold: f64,
    #[serde(default = "default_alpha_regime2")]
    pub alpha_regime2: f64,
}

fn default_s_min() -> f64 {
    AdaptivePolicy::default().s_min
}
fn default_s_max() -> f64 {
    AdaptivePolicy::default().s_max
}
fn default_alpha_min() -> f64 {
    AdaptivePolicy::default().alpha_min
}
fn default_gain() -> f64 {
    AdaptivePolicy::default().curvature_gain
}
fn default_switch() -> f64 {
    AdaptivePolicy::default().switch_threshold
}
fn default_alpha_regime2() -> f64 {
    AdaptivePolicy::default().alpha_regime2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    DisturbedUniform,
    Uniform,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default = "default_initial_kind")]
    pub kind: InitialKind,
    #[serde(default = "default_base")]
    pub base: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_initial_kind() -> InitialKind {
    InitialKind::DisturbedUniform
}
fn default_base() -> f64 {
    0.6
}
fn default_amplitude() -> f64 {
    0.15
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            kind: default_initial_kind(),
            base: default_base(),
            amplitude: default_amplitude(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol_newton")]
    pub tol_newton: f64,
    #[serde(default = "default_max_newton")]
    pub max_newton: usize,
    #[serde(default = "default_tol_gmres")]
    pub tol_gmres: f64,
    #[serde(default = "default_restart")]
    pub restart: usize,
    #[serde(default = "default_max_restarts")]
    pub max_restarts: usize,
}

fn default_tol_newton() -> f64 {
    NewtonSettings::default().tol_newton
}
fn default_max_newton() -> usize {
    NewtonSettings::default().max_newton_iters
}
fn default_tol_gmres() -> f64 {
    NewtonSettings::default().tol_gmres
}
fn default_restart() -> usize {
    NewtonSettings::default().gmres_restart
}
fn default_max_restarts() -> usize {
    NewtonSettings::default().max_gmres_restarts
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            tol_newton: default_tol_newton(),
            max_newton: default_max_newton(),
            tol_gmres: default_tol_gmres(),
            restart: default_restart(),
            max_restarts: default_max_restarts(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_n_samples() -> usize {
    1
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            n_samples: default_n_samples(),
            snapshot_times: Vec::new(),
            output_dir: None,
        }
    }
}

/// A full experiment description, as read from a TOML file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    pub time: TimeSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub run: RunSection,
}

/// Written atomically at run end; embeds the resolved config so the run can
/// be reproduced from this file alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema: String,
    pub command: String,
    pub code_version: String,
    pub rng: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub status: String,
    pub outputs: Vec<String>,
    pub config: RunConfig,
}

pub const MANIFEST_SCHEMA: &str = "mmc-tdgl-manifest/1";

/// Reads a config file. A manifest (recognized by its top-level `config`
/// table) is accepted transparently; its embedded resolved config is used.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: toml::Value = toml::from_str(&text).map_err(|e| Error::ConfigParse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let config = if value.get("config").is_some() {
        let manifest: Manifest =
            value
                .try_into()
                .map_err(|e: toml::de::Error| Error::ConfigParse {
                    path: path.to_path_buf(),
                    message: format!("manifest: {e}"),
                })?;
        manifest.config
    } else {
        value
            .try_into()
            .map_err(|e: toml::de::Error| Error::ConfigParse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?
    };
    config.validate()?;
    Ok(config)
}

fn require(cond: bool, field: &str, message: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::ConfigInvalid {
            field: field.to_string(),
            message: message.to_string(),
        })
    }
}

impl RunConfig {
    /// Cross-field validation; all schema defaults are already applied by
    /// deserialization.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        require(m.microsphere_volume > 0.0, "model.M", "must be positive")?;
        require(m.polymerization > 0.0, "model.N", "must be positive")?;
        require(m.chi > 0.0, "model.chi", "must be positive")?;
        require(m.epsilon >= 0.0, "model.epsilon", "must be nonnegative")?;
        let params = self.params()?;

        require(self.grid.lx > 0.0, "grid.Lx", "must be positive")?;
        require(self.grid.ly > 0.0, "grid.Ly", "must be positive")?;
        require(self.grid.m >= 2, "grid.m", "need at least 2 cells")?;
        require(self.grid.n >= 2, "grid.n", "need at least 2 cells")?;

        let t = &self.time;
        require(t.t_end > 0.0, "time.T", "must be positive")?;
        match t.mode {
            TimeMode::Constant => {
                let s = t.s_const.ok_or_else(|| Error::ConfigInvalid {
                    field: "time.s_const".into(),
                    message: "required when mode = \"constant\"".into(),
                })?;
                require(s > 0.0, "time.s_const", "must be positive")?;
            }
            TimeMode::Adaptive => {
                require(
                    self.model.epsilon == 0.0,
                    "time.mode",
                    "adaptive stepping unsupported with noise",
                )?;
                require(t.s_min > 0.0, "time.s_min", "must be positive")?;
                require(t.s_min <= t.s_max, "time.s_max", "need s_min <= s_max")?;
                require(t.alpha_min > 0.0, "time.alpha_min", "must be positive")?;
                require(t.curvature_gain >= 0.0, "time.A", "must be nonnegative")?;
                require(
                    t.alpha_regime2 > 0.0,
                    "time.alpha_regime2",
                    "must be positive",
                )?;
            }
        }

        let init = &self.initial;
        let hi = params.phi_max();
        match init.kind {
            InitialKind::DisturbedUniform => {
                require(
                    init.amplitude >= 0.0,
                    "initial.amplitude",
                    "must be nonnegative",
                )?;
                require(
                    init.base - init.amplitude > 0.0 && init.base + init.amplitude < hi,
                    "initial.base",
                    "base +- amplitude must stay inside (0, 1/rho)",
                )?;
            }
            InitialKind::Uniform => {
                require(
                    init.base > 0.0 && init.base < hi,
                    "initial.base",
                    "must lie inside (0, 1/rho)",
                )?;
            }
        }

        let s = &self.solver;
        require(s.tol_newton > 0.0, "solver.tol_newton", "must be positive")?;
        require(s.tol_gmres > 0.0, "solver.tol_gmres", "must be positive")?;
        require(s.restart >= 1, "solver.restart", "must be at least 1")?;
        require(s.max_newton >= 1, "solver.max_newton", "must be at least 1")?;

        require(
            self.run.n_samples >= 1,
            "run.n_samples",
            "must be at least 1",
        )?;
        require(
            self.run
                .snapshot_times
                .iter()
                .all(|&t| t >= 0.0 && t.is_finite()),
            "run.snapshot_times",
            "times must be finite and nonnegative",
        )?;
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(
            self.model.microsphere_volume,
            self.model.polymerization,
            self.model.chi,
            self.model.epsilon,
        )
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::new(self.grid.lx, self.grid.ly, self.grid.m, self.grid.n)
    }

    pub fn step_mode(&self) -> StepMode {
        match self.time.mode {
            TimeMode::Constant => StepMode::Constant {
                dt: self.time.s_const.expect("validated"),
            },
            TimeMode::Adaptive => StepMode::Adaptive(AdaptivePolicy {
                s_min: self.time.s_min,
                s_max: self.time.s_max,
                alpha_min: self.time.alpha_min,
                curvature_gain: self.time.curvature_gain,
                switch_threshold: self.time.switch_threshold,
                alpha_regime2: self.time.alpha_regime2,
            }),
        }
    }

    pub fn newton_settings(&self) -> NewtonSettings {
        NewtonSettings {
            tol_newton: self.solver.tol_newton,
            max_newton_iters: self.solver.max_newton,
            tol_gmres: self.solver.tol_gmres,
            gmres_restart: self.solver.restart,
            max_gmres_restarts: self.solver.max_restarts,
            ..NewtonSettings::default()
        }
    }

    /// Builds the initial state on the given geometry (which may be a mesh
    /// refinement of the configured grid).
    pub fn initial_field(&self, geom: GridGeometry) -> CellField {
        match self.initial.kind {
            InitialKind::DisturbedUniform => disturbed_uniform(
                geom,
                self.initial.base,
                self.initial.amplitude,
                self.run.seed,
            ),
            InitialKind::Uniform => CellField::constant(geom, self.initial.base),
        }
    }

    /// Assembles the simulation on the configured grid.
    pub fn simulation(&self) -> Result<Simulation> {
        let geom = self.geometry()?;
        Ok(Simulation {
            params: self.params()?,
            initial: self.initial_field(geom),
            mode: self.step_mode(),
            t_end: self.time.t_end,
            solver: self.newton_settings(),
            seed: self.run.seed,
            snapshot_times: self.run.snapshot_times.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const MINIMAL: &str = r#"
[model]
chi = 2.37
M = 0.16
N = 4.34

[time]
mode = "constant"
s_const = 0.001
T = 1.0
"#;

    #[test]
    fn minimal_config_gets_reference_defaults() {
        let f = write_tmp(MINIMAL);
        let cfg = parse_config(f.path()).unwrap();
        assert_eq!(cfg.solver.tol_newton, 1e-9);
        assert_eq!(cfg.solver.tol_gmres, 1e-8);
        assert_eq!(cfg.solver.restart, 40);
        assert_eq!(cfg.grid.m, 64);
        assert_eq!(cfg.grid.lx, 50.0);
        assert_eq!(cfg.initial.base, 0.6);
        assert_eq!(cfg.initial.amplitude, 0.15);
        assert_eq!(cfg.run.n_samples, 1);
        assert_eq!(cfg.model.epsilon, 0.0);
    }

    #[test]
    fn negative_epsilon_is_rejected() {
        let f = write_tmp(&MINIMAL.replace("N = 4.34", "N = 4.34\nepsilon = -1e-4"));
        let err = parse_config(f.path()).unwrap_err();
        assert!(err.to_string().contains("model.epsilon"), "{err}");
    }

    #[test]
    fn adaptive_with_noise_is_rejected() {
        let f = write_tmp(
            r#"
[model]
chi = 2.37
M = 0.16
N = 4.34
epsilon = 1e-4

[time]
mode = "adaptive"
T = 1.0
"#,
        );
        let err = parse_config(f.path()).unwrap_err();
        assert!(
            err.to_string()
                .contains("adaptive stepping unsupported with noise"),
            "{err}"
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let f = write_tmp(&format!("{MINIMAL}\n[solver]\nbogus_key = 1\n"));
        let err = parse_config(f.path()).unwrap_err();
        assert!(err.to_string().contains("bogus_key"), "{err}");
    }

    #[test]
    fn constant_mode_requires_a_step() {
        let f = write_tmp(&MINIMAL.replace("s_const = 0.001\n", ""));
        let err = parse_config(f.path()).unwrap_err();
        assert!(err.to_string().contains("time.s_const"), "{err}");
    }

    #[test]
    fn initial_state_must_fit_the_admissible_interval() {
        let f = write_tmp(&format!(
            "{MINIMAL}\n[initial]\nkind = \"uniform\"\nbase = 0.97\n"
        ));
        let err = parse_config(f.path()).unwrap_err();
        assert!(err.to_string().contains("initial.base"), "{err}");
    }

    #[test]
    fn manifest_round_trips_through_parse_config() {
        let f = write_tmp(MINIMAL);
        let cfg = parse_config(f.path()).unwrap();
        let manifest = Manifest {
            schema: MANIFEST_SCHEMA.to_string(),
            command: "run".into(),
            code_version: "test".into(),
            rng: "test".into(),
            started_unix: 0.0,
            finished_unix: 1.0,
            status: "ok".into(),
            outputs: vec!["energy.csv".into()],
            config: cfg.clone(),
        };
        let text = toml::to_string_pretty(&manifest).unwrap();
        let mf = write_tmp(&text);
        let cfg2 = parse_config(mf.path()).unwrap();
        assert_eq!(
            toml::to_string(&cfg).unwrap(),
            toml::to_string(&cfg2).unwrap()
        );
    }
}
