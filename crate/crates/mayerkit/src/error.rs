use thiserror::Error;

/// Failures shared by every module.
#[derive(Debug, Error)]
pub enum Error {
    /// An enumeration or expansion order exceeds its hard cap.
    #[error("size limit: {what} = {value} exceeds cap {cap} (use --force-size-limits to override)")]
    SizeLimit {
        what: &'static str,
        value: usize,
        cap: usize,
    },
    /// A series truncation would drop more mass than the tolerance allows.
    #[error("tail too large: {detail} (required truncation {required})")]
    TailTooLarge { required: usize, detail: String },
    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    /// The operation does not cover this model in the current version.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// A model constructor rejected its parameters.
    #[error("invalid model: {0}")]
    Model(String),
    /// A configuration file failed to parse or validate.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::Model(msg.into())
    }

    /// Short machine-readable tag used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SizeLimit { .. } => "size_limit",
            Error::TailTooLarge { .. } => "tail_too_large",
            Error::Contract(_) => "contract",
            Error::Unsupported(_) => "unsupported",
            Error::Model(_) => "model",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
        }
    }
}

pub(crate) fn check_cap(what: &'static str, value: usize, cap: usize, force: bool) -> Result<()> {
    if value > cap && !force {
        return Err(Error::SizeLimit { what, value, cap });
    }
    Ok(())
}
