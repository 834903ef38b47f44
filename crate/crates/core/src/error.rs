use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid market parameters: {0}")]
    InvalidMarket(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("agent index {index} out of range for side of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("brute-force oracle supports one-to-one markets with at most {max} agents per side")]
    OracleTooLarge { max: usize },

    #[error("unknown utility model `{0}`")]
    UnknownModel(String),

    #[error("malformed market dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParam { name, reason: reason.into() }
}
