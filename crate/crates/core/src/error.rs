use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coefficients up to l={lmax} do not fit a basis of size n={n}")]
    Truncation { lmax: usize, n: usize },

    #[error("matrix has nonzero trace {trace:e}; the Laplacian is not invertible on the center")]
    NonzeroTrace { trace: f64 },

    #[error("singular operator: {0}")]
    SingularOperator(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate plane (area {area:e})")]
    DegeneratePlane { area: f64 },

    #[error("fixed point did not converge in {iters} iterations (residual {residual:e})")]
    StepFailure { iters: usize, residual: f64 },

    #[error("state lost skew-Hermitian structure (defect {defect:e})")]
    StructureDrift { defect: f64 },

    #[error("{quantity} has imaginary residue {residue:e}")]
    ImaginaryResidue { quantity: &'static str, residue: f64 },

    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
