use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A point, parameter or state outside the region where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Quadrature hit a non-finite integrand or failed to converge.
    #[error("integration error: {0}")]
    Integration(String),

    /// The adaptive integrator could not make progress.
    #[error("step size underflow at t = {t}: h = {h:e}")]
    Stiff { t: f64, h: f64 },

    #[error("shooting failed after {iterations} iterations (residual {residual:e})")]
    Shooting { iterations: usize, residual: f64 },

    #[error("free homotopy mismatch: curve winds {curve} times, reference winds {reference}")]
    Homotopy { curve: i64, reference: i64 },

    #[error("invalid settings: {0}")]
    Settings(String),

    /// Construction constraints that failed, one entry per clause.
    #[error("construction rejected: {}", .0.join("; "))]
    Validation(Vec<String>),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
