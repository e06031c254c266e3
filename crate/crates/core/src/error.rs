use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("path must contain at least one sample")]
    EmptyPath,

    #[error("times and values differ in length ({times} vs {values})")]
    LengthMismatch { times: usize, values: usize },

    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("times must be strictly increasing (index {index}: {prev} then {next})")]
    NotIncreasing { index: usize, prev: f64, next: f64 },

    #[error("truncation level must be positive and finite, got {0}")]
    InvalidTruncation(f64),

    #[error("paths have different domains: [{a0}; {b0}] vs [{a1}; {b1}]")]
    DomainMismatch { a0: f64, b0: f64, a1: f64, b1: f64 },

    #[error("competitor leaves the c/2 ball: sup distance {distance} > {radius}")]
    BallViolation { distance: f64, radius: f64 },

    #[error("brute-force enumeration capped at n = {cap}, path has {n} samples")]
    SizeCap { n: usize, cap: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} = {value} is outside the domain ({constraint})")]
    Domain {
        what: &'static str,
        value: f64,
        constraint: String,
    },

    #[error("lambda = {lambda} is within {guard} of the denominator root {root}")]
    SingularDenominator { lambda: f64, root: f64, guard: f64 },

    #[error("series did not converge within k_max = {k_max} terms (last term bound {last_bound}, sum {sum})")]
    NonConvergence {
        k_max: usize,
        last_bound: f64,
        sum: f64,
    },

    #[error("csv line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("monte carlo configuration: {0}")]
    Config(String),

    #[error("estimator is degenerate: {0}")]
    Degenerate(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyPath => "empty_path",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::NotIncreasing { .. } => "not_increasing",
            Error::InvalidTruncation(_) => "invalid_truncation",
            Error::DomainMismatch { .. } => "domain_mismatch",
            Error::BallViolation { .. } => "ball_violation",
            Error::SizeCap { .. } => "size_cap",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Domain { .. } => "domain",
            Error::SingularDenominator { .. } => "singular_denominator",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Csv { .. } => "csv",
            Error::Config(_) => "config",
            Error::Degenerate(_) => "degenerate",
        }
    }
}
