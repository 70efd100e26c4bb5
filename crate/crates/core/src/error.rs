use thiserror::Error;

/// Errors raised by the compute modules and the report layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid argument `{field}`: {reason}")]
    InvalidArgument { field: &'static str, reason: String },

    #[error("taming violated: a(t) vanishes on the tail at t = {t}")]
    TamingViolated { t: f64 },

    #[error("grid too short to certify divergence: {0}")]
    GridTooShort(String),

    #[error("domain too small: phi(R) - phi(peak) = {decay:.3} < {required}")]
    DomainTooSmall { decay: f64, required: f64 },

    #[error("ambiguous kernel in degree {degree}: eigenvalue {value:e} lies in [{eps_zero:e}, {gap_floor:e}]")]
    AmbiguousKernel {
        degree: u8,
        value: f64,
        eps_zero: f64,
        gap_floor: f64,
    },

    #[error("eigensolver did not converge: {0}")]
    NonConvergence(String),

    #[error("grid too large for dense oracle: {points} points (max {max})")]
    OracleTooLarge { points: usize, max: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("manifest mismatch: {0}")]
    Manifest(String),
}

impl Error {
    pub(crate) fn arg(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
