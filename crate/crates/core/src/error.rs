use thiserror::Error;

/// Errors raised by gml-core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),

    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),

    #[error("invalid metric matrix: {0}")]
    InvalidMetric(String),

    #[error("dimension {dim} exceeds the brute-force limit of {max}")]
    TooLarge { dim: usize, max: usize },

    #[error("network simplex exceeded {0} pivots")]
    PivotLimit(usize),

    #[error("triangle fixing did not converge after {sweeps} sweeps (residual {residual:.3e})")]
    ProjectionNotConverged { sweeps: usize, residual: f64 },

    #[error("typical table solver did not converge after {iterations} Newton steps (gradient {gradient:.3e})")]
    TypicalNotConverged { iterations: usize, gradient: f64 },

    #[error("typical table line search failed to stay in the domain")]
    TypicalDomain,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("transport solve failed on pair ({i}, {j}): {source}")]
    PairSolve {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("descent failed after {steps} recorded steps: {source}")]
    DescentFailed {
        steps: usize,
        trace: Box<crate::optimizer::DescentTrace>,
        #[source]
        source: Box<Error>,
    },

    #[error("neighborhood size {kappa} exceeds the {available} available training points")]
    KappaTooLarge { kappa: usize, available: usize },

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
