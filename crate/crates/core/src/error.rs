use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported technology {tech} at level {level}")]
    UnsupportedPair { level: String, tech: String },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("malformed trace line {line}: {reason}")]
    MalformedLine { line: u64, reason: String },

    #[error("bad trace header: {0}")]
    BadHeader(String),

    #[error("write to {level} carries no payload and no similarity fallback is configured")]
    MissingPayload { level: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("catalog error: {0}")]
    Catalog(String),

    #[error("report error: {0}")]
    Report(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
