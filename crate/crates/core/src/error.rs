use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("cost table has no entry for digit {0} and its tail rule is `error`")]
    TableOverflow(u64),
    #[error("tuple {0:?} is a repetition of a shorter block")]
    NonPrimitive(Vec<u64>),
    #[error("tuples {0:?} and {1:?} generate the same orbit")]
    OrbitOverlap(Vec<u64>, Vec<u64>),
    #[error("smoothing too fine: 1/xi = {inv_xi} exceeds M0*N/log N = {limit}")]
    SmoothingTooFine { inv_xi: f64, limit: f64 },
    #[error("no spectral gap: |lambda_2|/|lambda_1| = {0}")]
    NoGap(f64),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("integer overflow: {0}")]
    Overflow(String),
}

impl Error {
    /// Process exit code: 1 for validation problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoGap(_) | Error::NonConvergence(_) | Error::Singular(_) | Error::Overflow(_) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
