use thiserror::Error;

/// Errors raised by the verification kit.
///
/// Contract violations found by the batch suites are *not* errors: they are
/// reported as negative margins. Everything here means the run itself could
/// not proceed as asked.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("vanishing denominator sigma_{order} = {value:e}")]
    Singularity { order: usize, value: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("operation requires the positive-trace branch (trace = {trace:e})")]
    Branch { trace: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("ellipticity violated: f_{index} = {value:e}")]
    Ellipticity { index: usize, value: f64 },

    #[error("eigenvalue {index} = {value} lies at or below -kbar = {neg_kbar}")]
    TransformDomain { index: usize, value: f64, neg_kbar: f64 },

    #[error("discrete convexity fails at node {node:?} (smallest Hessian eigenvalue {min_eigenvalue:e})")]
    Convexity { node: Vec<usize>, min_eigenvalue: f64 },

    #[error("transformed Hessian eigenvalue {value} outside (0, 1) at node {node:?}")]
    TransformConsistency { node: Vec<usize>, value: f64 },

    #[error("sampler starved: {accepted} accepted out of {attempts} draws (last rejection: {last_reason})")]
    SamplerStarvation {
        attempts: u64,
        accepted: u64,
        last_reason: &'static str,
    },

    #[error("Newton iteration failed after {iterations} iterations: {reason}")]
    NonConvergence {
        iterations: usize,
        reason: String,
        history: Vec<f64>,
    },

    #[error("branch lost at node {node:?}: f = {value:e}")]
    BranchLoss { node: Vec<usize>, value: f64 },

    #[error("malformed grid file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
