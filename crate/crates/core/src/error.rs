use thiserror::Error;

/// Errors raised across graph generation, spectra, simulation and analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel evaluated outside its domain: {0}")]
    Domain(String),

    #[error("graphon is not admissible for this model: {0}")]
    InvalidModel(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("no synchronization threshold: largest eigenvalue {0} is not positive")]
    NoThreshold(f64),

    #[error("non-finite phase at step {step}")]
    NumericalBlowup { step: usize },

    #[error("sweep point K={coupling}, rep={rep}: {source}")]
    SweepPoint {
        coupling: f64,
        rep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("threshold not bracketed by the coupling grid")]
    NotBracketed,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
