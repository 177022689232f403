use thiserror::Error;

/// Errors produced by state construction, evolution, and analysis routines.
#[derive(Debug, Error)]
pub enum QcatError {
    #[error("unsupported spin: twice_I = {0}, supported range is 2..=9 (I = 1..=9/2)")]
    UnsupportedSpin(u32),

    #[error("invalid projection twice_m = {twice_m} for twice_I = {twice_i}")]
    InvalidProjection { twice_i: u32, twice_m: i32 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (max asymmetry {max_asymmetry:.3e})")]
    NotHermitian { max_asymmetry: f64 },

    #[error("time grid must be sorted and nonnegative")]
    UnsortedGrid,

    #[error("pulse times must be strictly increasing")]
    UnorderedPulses,

    #[error("state is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("not a valid density matrix: {reason}")]
    InvalidDensityMatrix { reason: String },

    #[error("integrator failed to converge: {details}")]
    Convergence { details: String },

    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, QcatError>;
