use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("unknown catalog id `{0}`")]
    UnknownCatalogId(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("state {0} lies outside the phase domain")]
    OutOfDomain(String),
    #[error("point {0} is on the critical set")]
    CriticalPoint(String),
    #[error("noise level {epsilon} is not below the trapping margin {margin}")]
    NoiseExceedsMargin { epsilon: f64, margin: f64 },
    #[error("invalid noise kernel: {0}")]
    InvalidKernel(String),
    #[error("orbit stuck on the critical set after {0} redraws")]
    CriticalOrbitStuck(usize),
    #[error("Pliss hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("trace recorded with delta {trace:?}, detector asked for {requested}")]
    DeltaMismatch { trace: Option<f64>, requested: f64 },
    #[error("cutoff {cutoff} exceeds the tail horizon {n_max}")]
    InsufficientHorizon { cutoff: usize, n_max: usize },
    #[error("measures live on different domains or grids")]
    DomainMismatch,
    #[error("operation requires a one-dimensional system")]
    NotOneDimensional,
    #[error("time {0} is not a hyperbolic time of the trace")]
    NotHyperbolicTime(usize),
    #[error("no inverse branch found: {0}")]
    BranchNotFound(String),
    #[error("no root found for k <= {0}")]
    NoRootFound(usize),
    #[error("foliation operator left [-1, 1]: |value| = {0}")]
    ContractionViolated(f64),
    #[error("fixed-point iteration did not converge in {iters} steps (last change {last_change})")]
    MaxItersExceeded { iters: usize, last_change: f64 },
    #[error("empty input: {0}")]
    Empty(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
