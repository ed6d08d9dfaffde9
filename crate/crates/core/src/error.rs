use thiserror::Error;

/// Diagnostics of a quadrature that hit its refinement cap.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureFailure {
    pub estimate: f64,
    pub error_estimate: f64,
    pub tolerance: f64,
    pub intervals: usize,
    pub evaluations: usize,
}

impl std::fmt::Display for QuadratureFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "estimate {:.6e}, error {:.3e} > tolerance {:.3e} after {} intervals / {} evaluations",
            self.estimate, self.error_estimate, self.tolerance, self.intervals, self.evaluations
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("calibration error: {0}")]
    Calibration(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(QuadratureFailure),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config parse error: {0}")]
    TomlDe(#[from] toml::de::Error),
    #[error("config write error: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    /// Process exit status: 1 validation failure, 2 configuration error, 3 numeric error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) => 1,
            Error::Domain(_)
            | Error::Config(_)
            | Error::Calibration(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::TomlDe(_)
            | Error::TomlSer(_) => 2,
            Error::Quadrature(_) | Error::Numeric(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
