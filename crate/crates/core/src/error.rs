use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    #[error("{what} did not converge within {steps} steps")]
    NoConvergence { what: &'static str, steps: u64 },

    #[error("invalid distribution {0}")]
    InvalidSpec(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameters for `{case}`: {constraint}")]
    Parameter { case: String, constraint: String },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("unknown identity `{0}`")]
    UnknownIdentity(String),

    #[error("input samples are not sorted ascending (or contain NaN)")]
    Unsorted,

    #[error("value {value} left [0,1] by more than the rounding guard")]
    Excursion { value: f64 },
}

impl Error {
    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            func,
            detail: detail.into(),
        }
    }

    pub(crate) fn param(case: &str, constraint: impl Into<String>) -> Self {
        Error::Parameter {
            case: case.to_string(),
            constraint: constraint.into(),
        }
    }

    /// True for failures caused by iteration caps rather than bad input.
    pub fn is_non_convergence(&self) -> bool {
        matches!(self, Error::NoConvergence { .. })
    }
}
