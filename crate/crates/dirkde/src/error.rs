//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Vectors or samples live on spheres of different dimension.
    #[error("dimension mismatch: expected ambient dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A log-space quantity cannot be represented in linear scale.
    #[error("overflow: {0}")]
    Overflow(String),

    /// An integrand produced a non-finite value at a quadrature node.
    #[error("non-finite integrand: {0}")]
    NonFinite(String),

    /// A custom directional kernel fails the required integrability
    /// (its tail integrals do not decay).
    #[error("kernel divergence: {0}")]
    KernelDivergence(String),

    /// The requested quantity has no finite answer for this target
    /// (e.g. AMISE bandwidth of a uniform density).
    #[error("degenerate target: {0}")]
    Degenerate(String),

    /// An iterative routine exhausted its iteration budget.
    #[error("no convergence after {iterations} iterations: {context}")]
    NoConvergence { iterations: usize, context: String },

    /// Unsupported sphere dimension or grid resolution.
    #[error("unsupported: {0}")]
    Unsupported(String),
}
