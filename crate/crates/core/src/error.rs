use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("excursion length {length} exceeds kernel horizon {n_max}")]
    KernelHorizon { length: usize, n_max: usize },

    #[error("enumeration budget exceeded: {what} = {requested} > {limit}")]
    BudgetExceeded {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("unsupported disorder law: {0}")]
    UnsupportedLaw(String),

    #[error("numerical assertion failed: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
