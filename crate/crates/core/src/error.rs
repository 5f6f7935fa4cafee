use alloc::string::String;

/// Errors raised by the toolkit.
///
/// Everything except [`Error::Solver`] is an input error: the caller handed
/// over data that violates a precondition.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is not Hermitian (defect {defect:e})")]
    NotHermitian { defect: f64 },
    #[error("matrix is not unitary (residual {residual:e})")]
    NotUnitary { residual: f64 },
    #[error("matrix is not an isometry (residual {residual:e})")]
    NotIsometry { residual: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("ill-posed program: {0}")]
    IllPosed(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

impl Error {
    /// True for precondition violations, false for numerical failures.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Solver(_))
    }
}

pub type Result<T> = core::result::Result<T, Error>;
