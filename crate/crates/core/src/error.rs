use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum BaiError {
    /// Invalid model, strategy, or experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// A numeric argument outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A strategy or estimator was driven out of order.
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("arm index {index} out of range for {arms} arms")]
    ArmOutOfRange { index: usize, arms: usize },
    #[error("trial {trial} of strategy `{strategy}` failed: {source}")]
    Trial {
        strategy: String,
        trial: usize,
        #[source]
        source: Box<BaiError>,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("could not parse config: {0}")]
    Parse(String),
}

impl BaiError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        BaiError::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        BaiError::Domain(msg.into())
    }

    pub(crate) fn protocol(msg: impl Into<String>) -> Self {
        BaiError::Protocol(msg.into())
    }

    /// True for errors caused by user input rather than a failing run.
    pub fn is_config(&self) -> bool {
        matches!(self, BaiError::Config(_) | BaiError::Parse(_))
    }
}

pub type Result<T> = std::result::Result<T, BaiError>;

pub(crate) fn check_arm(index: usize, arms: usize) -> Result<()> {
    if index < arms {
        Ok(())
    } else {
        Err(BaiError::ArmOutOfRange { index, arms })
    }
}
