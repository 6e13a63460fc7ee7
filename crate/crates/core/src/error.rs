use alloc::string::String;

/// Errors raised by the toolkit. Messages name the violated condition.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("reduction removes every index")]
    EmptyReduction,
    #[error("index range violation: {0}")]
    Range(String),
    #[error("not λ-contracting: one-period product {product:e} ≥ bound {bound:e}")]
    NotContracting { product: f64, bound: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("empty input: {0}")]
    Empty(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$variant(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
