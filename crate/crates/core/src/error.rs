//! Error type shared across the library.

use thiserror::Error;

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix did not have the expected size.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A residual or Jacobian evaluation produced NaN or infinity.
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    /// Invalid model or method parameter.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Malformed method string, model file, or perturbation syntax.
    #[error("parse error: {0}")]
    Parse(String),

    /// Newton iteration on the stacked residual did not reach the tolerance.
    #[error("equilibrium search did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NoEquilibrium { iterations: usize, residual: f64 },

    /// The algebraic Jacobian cannot be inverted; state-matrix reduction
    /// assumes an invertible g_y.
    #[error("algebraic Jacobian g_y is numerically singular (condition estimate {cond:.3e})")]
    SingularAlgebraicJacobian { cond: f64 },

    /// I - c*h*A (or the DIRK stage matrix) is singular at this step size,
    /// which happens exactly when A has the indicated real eigenvalue.
    #[error("step matrix is singular at h = {h:.6e}: A has an eigenvalue near {eigenvalue_hint:.6e}")]
    SingularStepMatrix { h: f64, eigenvalue_hint: f64 },

    /// The QR iteration exceeded its iteration budget.
    #[error("eigenvalue iteration failed to converge (stalled at index {0})")]
    EigenNoConvergence(usize),

    /// Stiffness ratio is undefined when every eigenvalue is zero.
    #[error("stiffness ratio undefined: all eigenvalues are numerically zero")]
    UndefinedStiffness,

    /// A participation-matrix column summed to zero and cannot be normalized.
    #[error("participation column {index} is numerically zero and cannot be normalized")]
    DegenerateColumn { index: usize },

    /// Two spectra that must be paired have different orders.
    #[error("spectra have different orders: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },

    /// Operands were built under different normalization conventions.
    #[error("normalization mismatch: {0}")]
    NormalizationMismatch(&'static str),

    /// A Newton solve inside an integration step stalled.
    #[error("Newton iteration stalled after {iterations} iterations (residual {residual:.3e})")]
    Newton { iterations: usize, residual: f64 },

    /// An integration step could not be completed.
    #[error("integration step failed at t = {t:.6e}: {reason}")]
    StepFailed { t: f64, reason: String },

    /// Initial algebraic variables do not satisfy g = 0.
    #[error("initial algebraic variables are inconsistent: ||g||_inf = {residual:.3e} exceeds {tol:.1e}")]
    InconsistentInitial { residual: f64, tol: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("model file error: {0}")]
    Json(#[from] serde_json::Error),
}
