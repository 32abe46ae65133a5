use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// A geometric object does not fit the lattice box it is evaluated in.
    #[error("geometry: {0}")]
    Geometry(String),

    /// Rejection sampling for `origin in giant cluster` ran out of attempts.
    #[error("conditioning failed after {attempts} attempts (p or L too small?)")]
    Conditioning { attempts: u64 },

    /// Exhaustive enumeration refused because the path count would explode.
    #[error("brute force guard: n = {n} exceeds the limit {limit}")]
    Guard { n: usize, limit: usize },

    #[error("malformed bond configuration: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
