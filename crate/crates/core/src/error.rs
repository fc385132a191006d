use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("degree must be odd and positive, got {0}")]
    EvenDegree(u32),

    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: i64, max: i64 },

    #[error("mode mismatch: expected {expected}, found {found}")]
    ModeMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("precision must be at least 64 bits, got {0}")]
    Precision(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("value 2^{0} times the sample leaves the representable range")]
    Overflow(i64),

    #[error("fixture: {0}")]
    Fixture(String),

    #[error("elimination exhausted {0} instances without reaching support {{1,2}}")]
    Unreachable(usize),

    #[error("matrix shape mismatch: {0}x{0} vs {1}x{1}")]
    Shape(usize, usize),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
