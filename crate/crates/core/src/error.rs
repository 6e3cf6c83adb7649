use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown variable `{name}` at position {position}")]
    UnknownVariable { name: String, position: usize },

    #[error("degenerate interval [{lower}, {upper}] for parameter {index}")]
    DegenerateInterval { index: usize, lower: f64, upper: f64 },

    #[error("moment table is missing entry {0:?}")]
    MissingMoment(Vec<u32>),

    #[error("moment table is not a probability measure: gamma_0 = {0}")]
    NotProbability(f64),

    #[error("degree {degree} exceeds the available budget {limit}")]
    DegreeOverflow { degree: usize, limit: usize },

    #[error("relaxation order {order} is below the minimum order {minimum}")]
    OrderTooSmall { order: usize, minimum: usize },

    #[error("solver failure at order {order}: {message}")]
    Backend { order: usize, message: String },

    #[error("dual multipliers unavailable; use the explicit SOS program")]
    MultipliersUnavailable,

    #[error("exponential overflow while evaluating the entropy dual")]
    ExpOverflow,

    #[error("Newton iteration did not converge after {iterations} iterations (gradient norm {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("coordinate x{0} is not declared boolean")]
    NotBoolean(usize),

    #[error("point {0:?} lies outside the estimation domain")]
    OutOfDomain(Vec<f64>),

    #[error("no feasible point found at parameter {0:?}")]
    InfeasibleAt(Vec<f64>),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}
