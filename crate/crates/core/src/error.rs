use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("cannot parse exponent `{0}` (expected an integer, a/b, a decimal or inf)")]
    Parse(String),
    #[error("non-finite value at node {index} (t = {coord:?})")]
    NonFinite { index: usize, coord: Vec<f64> },
    #[error("resolution: {0}")]
    Resolution(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("window hypothesis violated: {0}")]
    Window(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::Parse(_) | Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
