use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("{what} is not Hermitian (defect {defect:e})")]
    NotHermitian { what: String, defect: f64 },

    #[error("eigenvector matrix is not unitary (defect {defect:e})")]
    NotUnitary { defect: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("population {population} of eigen-subspace {index} lies outside [0, {chi}]")]
    Physicality {
        index: usize,
        population: f64,
        chi: f64,
    },

    #[error(
        "step size underflow at t = {t:e} (h = {h:e}); the generator is too stiff for explicit integration"
    )]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
