use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of a function.
    #[error("domain error in {context}: {detail}")]
    Domain { context: &'static str, detail: String },

    /// A parameter failed validation. `path` is the dotted location in the
    /// configuration document, e.g. `limiting_type.gamma`.
    #[error("invalid parameter `{path}`: {detail}")]
    Invalid { path: String, detail: String },

    #[error("configuration parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("strategy value {value} for agent {agent} at step {step} is not admissible (must be < 1)")]
    Inadmissible { agent: usize, step: usize, value: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            context,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(path: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Invalid {
            path: path.into(),
            detail: detail.into(),
        }
    }

    /// True for errors caused by bad user input rather than a failed computation.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Invalid { .. } | Error::Parse(_) | Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
