use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid offer: {0}")]
    InvalidOffer(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("degenerate utility: maximum equals minimum ({0})")]
    DegenerateUtility(f64),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("history is not terminal")]
    NonTerminal,
    #[error("too large: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by user-supplied configuration or input files.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidDomain(_)
                | Error::InvalidOffer(_)
                | Error::Json(_)
                | Error::Csv(_)
                | Error::TooLarge(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
