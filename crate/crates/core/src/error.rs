use thiserror::Error;

/// Errors raised by the model, the integrator and the experiment harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid forcing: gamma = {gamma} at t = {t_s} s lies outside [0, 1]")]
    InvalidForcing { t_s: f64, gamma: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("controller infeasible at t = {t_s} s with gain mu = {mu}: no root of the feedback law in [1e-3, 1e3]")]
    ControllerInfeasible { t_s: f64, mu: f64 },

    #[error("steady-state solve did not converge after {iterations} Newton iterations (residual {residual:e})")]
    SteadySolveFailure { iterations: usize, residual: f64 },

    #[error("choked flow: squared pressure becomes non-positive at x = {x_m} m for withdrawal flux {q}")]
    ChokedFlow { x_m: f64, q: f64 },

    #[error("integration failed at t = {t_s} s: {reason}")]
    IntegrationFailure { t_s: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
