//! Crate-wide error type.

use std::path::PathBuf;

use crate::solver::StepSolveReport;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A model or run parameter failed validation.
    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: String, message: String },

    /// A concentration value left the admissible interval. Reports the first
    /// offending cell in row-major order.
    #[error("concentration out of domain at cell ({i}, {j}): {value} not in [{lo:e}, {hi}]")]
    DomainViolation {
        i: usize,
        j: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// Newton did not reach the step-norm tolerance within the iteration cap.
    #[error("newton: iteration cap {max_iters} exceeded (last step norm {step_norm:.3e})")]
    NewtonMaxIters {
        max_iters: usize,
        step_norm: f64,
        report: StepSolveReport,
    },

    /// The damping factor fell below its floor while trying to keep the
    /// iterate inside the admissible interval.
    #[error("newton: damping floor reached at iteration {iter} (step norm {step_norm:.3e})")]
    DampingFloor {
        iter: usize,
        step_norm: f64,
        report: StepSolveReport,
    },

    /// GMRES ran out of restarts. Carries the best iterate found.
    #[error("gmres: no convergence after {iters} iterations (relative residual {achieved:.3e}, target {target:.3e})")]
    GmresStagnated {
        achieved: f64,
        target: f64,
        iters: usize,
        best: crate::grid::CellField,
    },

    /// Discrete energy rose beyond tolerance in a deterministic run.
    #[error("energy increased at step {k} (t={t}): {from} -> {to} exceeds tolerance {tol:e}")]
    EnergyIncrease {
        k: usize,
        t: f64,
        from: f64,
        to: f64,
        tol: f64,
    },

    /// An ensemble member failed; carries the failing sample id.
    #[error("ensemble sample {sample} failed: {source}")]
    SampleFailed {
        sample: u64,
        #[source]
        source: Box<Error>,
    },

    /// Configuration file could not be parsed.
    #[error("config parse error in {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    /// Configuration parsed but violated a constraint.
    #[error("config validation error: field `{field}`: {message}")]
    ConfigInvalid { field: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("snapshot parse error in {path}: {message}")]
    SnapshotParse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(field: &str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
