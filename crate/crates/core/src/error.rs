use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed text input; `line` is 1-based.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Malformed binary input (events or dictionaries).
    #[error("format error: {0}")]
    Format(String),

    /// A caller-supplied argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A numeric domain violation such as a non-positive intensity.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dictionary training failed: {0}")]
    Training(String),

    /// The thinning sampler was given a rate exceeding its dominating constant.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// True for errors caused by input data rather than by how the tool was invoked.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Format(_)
                | Error::Domain(_)
                | Error::Training(_)
                | Error::UndefinedMetric(_)
                | Error::Io(_)
        )
    }
}
