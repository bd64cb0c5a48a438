use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (max asymmetry {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("unphysical Bloch vector with norm {norm}")]
    UnphysicalBloch { norm: f64 },

    #[error(
        "Fock truncation at n_max = {n_max} loses probability {deficit:.3e} (limit {limit:.1e})"
    )]
    Truncation {
        n_max: usize,
        deficit: f64,
        limit: f64,
    },

    #[error("coherent amplitude must be nonzero")]
    ZeroAmplitude,

    #[error(
        "ill-conditioned reconstruction: |determinant| = {determinant:.3e} below floor {floor:.1e}"
    )]
    IllConditioned { determinant: f64, floor: f64 },

    #[error("mapping constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
