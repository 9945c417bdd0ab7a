use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("width parameter tau fell to {tau:e} at t = {t} (floor {floor:e})")]
    TauUnderflow { t: f64, tau: f64, floor: f64 },

    #[error("relative mass drift {drift:e} exceeds {limit:e} (resolution failure)")]
    MassDrift { drift: f64, limit: f64 },

    #[error("boundary mass {mass:e} exceeds {limit:e} at t = {t} (domain too small)")]
    BoundaryMass { t: f64, mass: f64, limit: f64 },

    #[error("under-resolved: {0}")]
    Resolution(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("config: {0}")]
    Config(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
