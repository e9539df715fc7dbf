use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("direction is not a unit vector (|n| = {norm})")]
    NonUnitDirection { norm: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("frame size {0} outside supported range 1..=20")]
    FrameSize(usize),

    #[error("empty index subset")]
    EmptySubset,

    #[error("duplicate index {0} in subset")]
    DuplicateIndex(usize),

    #[error("all amplitudes vanish; probability distribution undefined")]
    DegenerateDistribution,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("test state not confined to the grid interior (edge magnitude {0:e})")]
    BoundaryContact(f64),

    #[error("input support violates column confinement at ({q}, {p})")]
    SupportViolation { q: usize, p: usize },

    #[error("window is not unit normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("basis is not unitary (max deviation {0:e})")]
    NonUnitary(f64),

    #[error("imaginary residue {0:e} exceeds tolerance; refusing to truncate")]
    ImaginaryResidue(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("inconsistent marginal normalization: {0}")]
    InconsistentMarginals(String),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("degenerate geometry: {0}")]
    Geometry(String),
}

pub type Result<T> = std::result::Result<T, Error>;
