use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("division must have at least two points (N >= 1), got {0}")]
    EmptyDivision(usize),

    #[error("division must start at 0, got {0}")]
    DivisionStart(f64),

    #[error("division is not strictly increasing at index {index} ({prev} -> {next})")]
    NonMonotoneDivision { index: usize, prev: f64, next: f64 },

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("length mismatch: division has {division} points, values has {values}")]
    LengthMismatch { division: usize, values: usize },

    #[error("final times differ: {0} vs {1}")]
    FinalTimeMismatch(f64, f64),

    #[error("parameter dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid time interval [{start}, {end}] for signal on [0, {final_time}]")]
    InvalidInterval {
        start: f64,
        end: f64,
        final_time: f64,
    },

    #[error("threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),

    #[error("duplicate threshold {0}")]
    DuplicateThreshold(f64),

    #[error("invalid play state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge on [{lo}, {hi}]: achieved error {achieved:e} > tolerance {tol:e}")]
    Quadrature {
        lo: f64,
        hi: f64,
        achieved: f64,
        tol: f64,
    },

    #[error("root bracket for w = {target} not found after {doublings} doublings (layer functions not monotone?)")]
    BracketExpansion { target: f64, doublings: u32 },

    #[error("root finder stalled for w = {target}: residual {residual:e} > tolerance {tol:e}")]
    RootStalled {
        target: f64,
        residual: f64,
        tol: f64,
    },

    #[error("residual certificate failed: sup residual {residual:e} > tolerance {tol:e}")]
    Residual { residual: f64, tol: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error at line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery (quadrature, root finding,
    /// residual certificate) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. }
                | Error::BracketExpansion { .. }
                | Error::RootStalled { .. }
                | Error::Residual { .. }
        )
    }
}
