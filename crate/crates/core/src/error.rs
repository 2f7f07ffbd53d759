use thiserror::Error;

/// Everything that can go wrong in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Model parameters outside their admissible range.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Index bundle violates one or more admissibility conditions.
    #[error("inadmissible indices: {}", .violations.join("; "))]
    Inadmissible { violations: Vec<String> },

    /// Grid construction or compatibility failure.
    #[error("grid error: {0}")]
    Grid(String),

    /// A sample was NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// A semigroup or kernel was requested at negative time.
    #[error("negative time t = {0}")]
    NegativeTime(f64),

    /// A negative power was applied to a field with a nonzero mean.
    #[error("nonzero mean ({mean:e}) under a negative-order multiplier")]
    NonzeroMean { mean: f64 },

    /// Input field is expected to be divergence-free but is not.
    #[error("field is not divergence-free (max |div| = {max_div:e}, tolerance {tol:e})")]
    NotDivergenceFree { max_div: f64, tol: f64 },

    /// Field passed where a non-negative field is required.
    #[error("negative value {0:e} in a field required to be non-negative")]
    Negative(f64),

    /// Kernel sample failed a positivity requirement.
    #[error("kernel not positive: p_t({r}) = {value:e}")]
    KernelNotPositive { r: f64, value: f64 },

    /// Adaptive quadrature could not meet its tolerance.
    #[error("quadrature did not converge (estimated error {achieved:e}, target {target:e})")]
    Quadrature { achieved: f64, target: f64 },

    /// Exponent or order outside the range where the quantity is defined.
    #[error("undefined quantity: {0}")]
    Undefined(String),

    /// Configuration file problems.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
