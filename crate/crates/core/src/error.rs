use crate::config::ConfigErrors;
use crate::diagnostics::EnergyTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("projection did not converge: relative coefficient change {change:.3e} after {panels} panels")]
    ProjectionAccuracy { change: f64, panels: usize },

    #[error("state belongs to a different domain")]
    DomainMismatch,

    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("resolvent fixed point not resolved: |χ - Φ(χ)| = {residual:.3e} > {tol:.3e}")]
    NotConverged { residual: f64, tol: f64 },

    #[error("non-finite state at t = {time}")]
    BlowUp {
        time: f64,
        partial: Option<Box<EnergyTrace>>,
    },

    #[error("sample index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("trace was produced by model `{found}`, expected `{expected}`")]
    WrongModel {
        expected: &'static str,
        found: &'static str,
    },

    #[error("run too short for the decay check: t_end = {t_end}, need t_end >= {required}")]
    InsufficientHorizon { t_end: f64, required: f64 },

    #[error("malformed trace file: {0}")]
    TraceFormat(String),

    #[error(transparent)]
    Config(#[from] ConfigErrors),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
