use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller passed arguments outside an operation's contract.
    #[error("usage error: {0}")]
    Usage(String),

    /// A value lies outside the mathematical domain of an operation
    /// (superluminal boost, plane leaving the grid, non-positive momentum).
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid or inconsistent configuration; `path` names the offending field.
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// The initial packet does not fit inside the walls.
    #[error("initial state touches the walls: amplitude ratio {leakage:e} exceeds {limit:e}")]
    Construction { leakage: f64, limit: f64 },

    /// The squared norm grew during a damped step.
    #[error("numerical instability at tau = {tau}: norm squared grew by {growth:e}")]
    NumericalInstability { tau: f64, growth: f64 },

    /// The detector never fired with appreciable probability.
    #[error("no detection: P_inf = {p_inf:e} is below {threshold:e}")]
    NoDetection { p_inf: f64, threshold: f64 },

    /// Two-detector run with negligible double-detection probability.
    #[error("no double detection: P_inf,12 = {p_inf_12:e} is below {threshold:e}")]
    NoDoubleDetection { p_inf_12: f64, threshold: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
