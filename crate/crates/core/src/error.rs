//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failure modes of the numerical routines.
///
/// Variants carry a short human-readable context string; callers that need to
/// branch on the failure should match on the variant, not on the message.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TunnelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("energy out of range: {0}")]
    OutOfRange(String),
    #[error("degenerate turning points: {0}")]
    Degenerate(String),
    #[error("integration interval crosses a turning point: {0}")]
    RegionCrossing(String),
    #[error("no root in bracket: {0}")]
    NoRoot(String),
    #[error("grid too narrow: {0}")]
    GridTooNarrow(String),
    #[error("bad grid window: {0}")]
    BadWindow(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("argument outside function domain: {0}")]
    DomainError(String),
    #[error("unstable time step: {0}")]
    Unstable(String),
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("unphysical parameters: {0}")]
    Unphysical(String),
}

pub type Result<T> = std::result::Result<T, TunnelError>;

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(TunnelError::InvalidParameter { name, reason: format!("must be finite and > 0, got {value}") })
    }
}

pub(crate) fn require_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(TunnelError::InvalidParameter { name, reason: format!("must be finite and >= 0, got {value}") })
    }
}
