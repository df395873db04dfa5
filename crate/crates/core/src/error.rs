use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A numeric argument is outside the domain of the operation (NaN, infinite, negative scale).
    #[error("domain error: {0}")]
    Domain(String),

    /// The caller asked for something the operation does not support.
    #[error("usage error: {0}")]
    Usage(String),

    /// A value failed one of its type invariants.
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// Pulse positions do not fall on segment boundaries.
    #[error("pulse at {position_m} m is not on a segment boundary (segment length {segment_length_m} m)")]
    Misaligned {
        position_m: f64,
        segment_length_m: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {value}")))
    }
}
