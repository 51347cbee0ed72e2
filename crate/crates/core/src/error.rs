use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("value out of domain in {context}: {detail}")]
    Domain { context: &'static str, detail: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("xorshift state must be nonzero")]
    ZeroSeed,
    #[error("replay buffer is empty")]
    EmptyBuffer,
    #[error("inconsistent inputs: {0}")]
    Consistency(String),
    #[error("bitline {column} current {current:.3e} A exceeds I_max {limit:.3e} A")]
    Overrange { column: usize, current: f64, limit: f64 },
    #[error("empty input: {0}")]
    Empty(&'static str),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            actual,
        }
    }

    pub(crate) fn domain(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            context,
            detail: detail.into(),
        }
    }
}
