use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite iterate at step {step}")]
    NonFiniteIterate { step: usize },

    #[error("iteration budget exceeded: {needed} iterations needed, budget is {budget}")]
    BudgetExceeded { needed: String, budget: u64 },

    #[error("missing modulus `{name}` for the requested rate")]
    MissingModulus { name: &'static str },

    #[error("step weight reaches 1 at index {index}: the running product vanishes")]
    ProductVanishes { index: u64 },

    #[error("window [{n}, {end}] exceeds the recorded trajectory of length {len}")]
    WindowExceedsTrajectory { n: u64, end: u64, len: usize },

    #[error("window of size {window} at n={n} exceeds the diameter cap {cap}")]
    WindowCapExceeded { n: u64, window: u64, cap: u64 },

    #[error("trajectories disagree: {0}")]
    TrajectoryMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
