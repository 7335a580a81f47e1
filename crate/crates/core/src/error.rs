use thiserror::Error;

/// Errors raised by the library. The CLI maps [`Error::is_usage`] variants to
/// exit code 2 and everything else to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("psi value {value} at q={q} lies outside [0, 1/2]")]
    RangeViolation { q: u64, value: f64 },

    #[error("cannot parse psi expression `{input}`: {reason}")]
    Parse { input: String, reason: String },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error(
        "quadrature budget of {evaluations} evaluations exhausted \
         (best estimate {best_estimate}, error estimate {error_estimate})"
    )]
    BudgetExceeded {
        best_estimate: f64,
        error_estimate: f64,
        evaluations: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(input: &str, reason: impl Into<String>) -> Self {
        Error::Parse {
            input: input.to_string(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by malformed user input rather than by a
    /// computation.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidArgument(_) | Error::Parse { .. })
    }

    /// Short machine-readable tag for structured error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::RangeViolation { .. } => "range-violation",
            Error::Parse { .. } => "parse",
            Error::DegenerateInput(_) => "degenerate-input",
            Error::UndefinedRatio(_) => "undefined-ratio",
            Error::BudgetExceeded { .. } => "budget-exceeded",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
