use thiserror::Error;

/// Errors produced by parameter validation and by the analysis pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("window class {0:?} is virtual and has no prior in the real protocol")]
    VirtualClass(crate::model::WindowClass),

    #[error("post-selection acceptance set is empty for lambda_ps = {0}")]
    EmptyAcceptance(f64),

    #[error("rate is undefined: {0}")]
    UndefinedRate(&'static str),

    #[error("tally provenance mismatch ({left:016x} vs {right:016x})")]
    ProvenanceMismatch { left: u64, right: u64 },

    #[error("Fock cutoff {cutoff} is inadequate for |alpha|^2 = {mean_photons}: tail mass {tail_mass:e}")]
    TruncationInadequate {
        cutoff: usize,
        mean_photons: f64,
        tail_mass: f64,
    },

    #[error("operation needs {0}")]
    Unsupported(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
