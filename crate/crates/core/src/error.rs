use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input violated a precondition (range, size, shape).
    #[error("domain error: {0}")]
    Domain(String),

    /// The reference wave vanishes at some unit, so PSIS cannot divide by it.
    #[error("reference wave is zero at unit (m={m}, n={n})")]
    SingularReference { m: usize, n: usize },

    /// All-zero or otherwise empty data where a signal was required.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Vandermonde system with (near-)coincident nodes.
    #[error("ill-conditioned system (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    /// Horizontal/vertical amplitude pairing could not be resolved.
    #[error("pairing failed: {reason}; candidate assignments: {candidates:?}")]
    Pairing {
        reason: String,
        candidates: Vec<(Vec<usize>, f64)>,
    },

    /// Root extraction produced fewer usable roots than requested.
    #[error("estimation error: {0}")]
    Estimation(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
