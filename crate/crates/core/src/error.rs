use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("measure has no atoms")]
    EmptyMeasure,

    #[error("negative weight at index {idx}: {value}")]
    NegativeWeight { idx: usize, value: f64 },

    #[error("non-finite value at index {idx}: {value}")]
    NonFinite { idx: usize, value: f64 },

    #[error("not a probability measure (mass = {mass})")]
    NotProbability { mass: f64 },

    #[error("kernel has no positive entry")]
    AllZeroKernel,

    #[error("negative kernel entry at ({row}, {col}): {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("invalid kernel entry at ({row}, {col}): {reason}")]
    InvalidEntry {
        row: usize,
        col: usize,
        reason: &'static str,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),

    #[error("row {row} carries mu-mass but has no positive kernel entry")]
    EmptyRow { row: usize },

    #[error("column {col} carries nu-mass but has no positive kernel entry")]
    EmptyColumn { col: usize },

    #[error("normalization constant vanished")]
    DegenerateZ,

    #[error("iterate charges column {col} where nu vanishes")]
    NonAbsolutelyContinuous { col: usize },

    #[error("bound requires n >= 1")]
    ZeroIterations,

    #[error("regularization eps must be positive, got {0}")]
    NonpositiveEps(f64),

    #[error("rate lambda must be positive, got {0}")]
    NonpositiveLambda(f64),

    #[error("time horizon must be positive, got {0}")]
    NonpositiveTime(f64),

    #[error("cannot zero {requested} entries while keeping the pattern feasible (at most {admissible})")]
    InfeasiblePattern { requested: usize, admissible: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no certificate within {iterations} iterations: dual_lb = {dual_lb}, primal_ub = {primal_ub}")]
    NoCertificate {
        iterations: usize,
        dual_lb: f64,
        primal_ub: f64,
    },

    #[error("cannot repair marginals inside the kernel support (unplaced mass {residual:e})")]
    CannotRepair { residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
