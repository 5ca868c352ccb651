use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("incompatible spaces: {0}")]
    IncompatibleSpace(String),

    #[error("invalid bipartition: {0}")]
    InvalidBipartition(String),

    #[error("state is not normalized (norm {0})")]
    Normalization(f64),

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("hamiltonian is not hermitian (max defect {0:e})")]
    InvalidHamiltonian(f64),

    #[error("no dynamics: {0}")]
    NoDynamics(String),

    #[error("impossible post-selection at segment {segment}: branch probability {probability:e}")]
    ImpossiblePostSelection { segment: usize, probability: f64 },

    #[error("invalid timing: {0}")]
    InvalidTiming(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("segment {index}: {reason}")]
    InvalidSegment { index: usize, reason: String },

    #[error("integrator configuration: {0}")]
    IntegratorConfig(String),

    #[error("schema: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
