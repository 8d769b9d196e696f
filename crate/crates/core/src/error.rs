use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mixture is empty (filter state not initialised)")]
    EmptyMixture,
    #[error("mixture has no mass (all amplitudes are zero)")]
    DegenerateMixture,
    #[error("estimate requested from the uniform prior")]
    UniformState,
    #[error("invalid gaussian component: amplitude={amplitude}, centre={centre}, sigma={sigma}")]
    InvalidComponent {
        amplitude: f64,
        centre: f64,
        sigma: f64,
    },
    #[error("time {t} s is outside the signal span [0, {end}] s")]
    TimeOutOfRange { t: f64, end: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by reading or writing files.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_) | Error::Json(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
