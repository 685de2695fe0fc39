use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its documented range.
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A time query fell outside the sampled traffic trace.
    #[error("time {t} s outside trace domain [0, {end}] s")]
    OutOfDomain { t: f64, end: f64 },

    #[error("timestamps not strictly increasing at index {index}")]
    NonMonotone { index: usize },

    #[error("no residual bandwidth: cross-traffic {y} bit/s >= capacity {capacity} bit/s")]
    NoResidualBandwidth { y: f64, capacity: f64 },

    #[error("{0}")]
    Degenerate(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by a bad configuration rather than by I/O.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::NoResidualBandwidth { .. } | Error::Degenerate(_)
        )
    }
}
