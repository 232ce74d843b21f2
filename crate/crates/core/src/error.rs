use thiserror::Error;

/// Errors produced anywhere in the integration toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("non-finite value produced in stage {stage}")]
    StageNonFinite { stage: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("coarsening factor {factor} does not divide {n_steps} steps")]
    InvalidFactor { factor: usize, n_steps: usize },

    #[error("index {index} out of range for {channels} channels")]
    IndexOutOfRange { index: usize, channels: usize },

    #[error("scheme requires a linear part but the problem has none")]
    MissingLinearPart,

    #[error("scheme {scheme} is not applicable to a {calculus} problem")]
    CalculusMismatch {
        scheme: String,
        calculus: &'static str,
    },

    #[error("coefficient set mismatch: {0}")]
    CoefficientMismatch(String),

    #[error("trajectory blew up at step {step}")]
    BlowUp { step: usize },

    #[error("degenerate direction (norm {0:e}) in directional derivative")]
    DegenerateDirection(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unknown scheme name `{0}`")]
    UnknownScheme(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
