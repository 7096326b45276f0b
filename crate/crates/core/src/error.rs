use thiserror::Error;

/// Errors raised by the library.
///
/// Hard failures (`NoAdmissibleCase`, `NonIntegralKuroda`, `Inconsistent`) mean a
/// computed object violated an identity it must satisfy; they are never
/// recoverable by retrying with other parameters.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("{0} is outside the supported range")]
    RangeUnsupported(String),

    #[error("{0} is not an odd prime")]
    NotOddPrime(String),

    #[error("{0} is not prime")]
    NotPrime(String),

    #[error("{0} is not squarefree")]
    NotSquarefree(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no admissible case: {0}")]
    NoAdmissibleCase(String),

    #[error("square test inconclusive: {0}")]
    Inconclusive(String),

    #[error("non-integral Kuroda value: {0}")]
    NonIntegralKuroda(String),

    #[error("element is not invertible")]
    NotInvertible,

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("cache i/o: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
