//! Error types shared by every module of the crate.

use thiserror::Error;

/// Errors produced by family lookups, numeric routines, and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown family '{0}'")]
    UnknownFamily(String),

    #[error("unknown chart '{chart}' for family '{family}'")]
    UnknownChart { family: String, chart: String },

    #[error("parameter {coords:?} outside the domain of chart '{chart}'")]
    ParameterDomain { chart: String, coords: Vec<f64> },

    #[error("sample point {0} outside the support")]
    Support(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    Asymmetric(f64),

    #[error("matrix is not positive definite (eigenvalues in [{min:.3e}, {max:.3e}])")]
    NotPositiveDefinite { min: f64, max: f64 },

    #[error("jacobian is singular (|det| = {0:.3e})")]
    SingularJacobian(f64),

    #[error("numeric routine did not reach the requested tolerance (residual {residual:.3e})")]
    NumericTolerance { residual: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("path left the parameter domain at t = {exit_time}")]
    DomainExit { exit_time: f64 },

    #[error("sufficient statistic lies on the boundary of the expectation domain")]
    Boundary,

    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid generator '{name}': {what}")]
    InvalidGenerator { name: String, what: String },

    #[error("estimator '{estimator}' incompatible with family '{family}': {why}")]
    EstimatorMismatch {
        estimator: String,
        family: String,
        why: String,
    },

    #[error("{failed} of {total} replicates failed, first indices {indices:?}")]
    ReplicateFailure {
        failed: usize,
        total: usize,
        indices: Vec<usize>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
