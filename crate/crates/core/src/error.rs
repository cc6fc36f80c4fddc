use thiserror::Error;

/// Errors produced by the simulator, its analyses and file interfaces.
#[derive(Debug, Error)]
pub enum Error {
    /// A quantity fell outside the interval where the model is defined.
    #[error("{quantity} = {value} is outside the valid range [{min}, {max}]")]
    Domain {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// A requested target cannot be produced by the mechanism.
    #[error("{quantity} = {value} is unreachable; achievable range is [{min}, {max}]")]
    Unreachable {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// A calibration lookup referenced detents the table does not contain.
    #[error("calibration table has no curve for detent(s) {missing:?}")]
    MissingDetent { missing: Vec<usize> },

    /// A parameter or configuration field failed validation.
    #[error("invalid `{field}`: {message}")]
    Config { field: String, message: String },

    /// The pivot integration produced a non-finite state.
    #[error("integration failed at t = {t} s: {message}")]
    Integration { t: f64, message: String },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::Unreachable { .. } => "unreachable",
            Error::MissingDetent { .. } => "missing_detent",
            Error::Config { .. } => "config",
            Error::Integration { .. } => "integration",
            Error::Format(_) => "format",
            Error::Io(e) if e.kind() == std::io::ErrorKind::AddrInUse => "addr_in_use",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    /// Name of the offending configuration field, if any.
    pub fn field(&self) -> Option<&str> {
        match self {
            Error::Config { field, .. } => Some(field),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
