use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid signature: {0}")]
    InvalidSignature(String),

    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),

    /// The product (or pointed power) would exceed the configured element guard.
    #[error("size guard exceeded: would need {cardinality} elements, guard is {guard}")]
    GuardExceeded { cardinality: u128, guard: u64 },

    #[error("enumeration cap of {cap} homomorphisms exceeded")]
    CapExceeded { cap: usize },

    #[error("invalid homomorphism: {0}")]
    InvalidHomomorphism(String),

    #[error("malformed query: {0}")]
    MalformedQuery(String),

    /// A distinguished element occurs in no tuple, so the canonical query would be unsafe.
    #[error("unsafe query: free variable `{0}` occurs in no atom")]
    UnsafeQuery(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
