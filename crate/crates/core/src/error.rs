//! Crate-wide error type.

use thiserror::Error;

/// Failure modes across the integration and transformation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Quadrature did not converge to the requested accuracy.
    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergent(String),

    /// Two independent computations of the same quantity disagree.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    /// ODE integration failed.
    #[error("integration failure: {0}")]
    Integration(String),

    /// Adaptive step size underflowed; the problem is effectively stiff.
    #[error("step size underflow at t = {t:e}")]
    Stiffness { t: f64 },

    /// Contact at the barrier with near-zero normal velocity. The reflection
    /// law is ill-posed there, so this is reported instead of being modeled.
    #[error("degenerate contact at t = {t:e}: |v| = {speed:e}")]
    DegenerateContact { t: f64, speed: f64 },

    /// No impact occurred within the configured flight-time cap.
    #[error("no impact within {cap:e} time units after t = {t:e}")]
    Escape { t: f64, cap: f64 },

    /// Parameters outside the large-energy regime where the implicit radius
    /// equation is uniquely solvable.
    #[error("out of regime: {0}")]
    OutOfRegime(String),

    /// A scalar root solve (Newton + bisection) failed to converge.
    #[error("root solve failed: {0}")]
    RootSolve(String),

    /// The physical and direct Poincaré-map backends disagree beyond the
    /// consistency threshold.
    #[error("backend mismatch: {0}")]
    BackendMismatch(String),

    /// A sample grid too small or too narrow for the requested fit.
    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
