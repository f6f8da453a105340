use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("step size {dt} outside (0, {max}]")]
    StepOutOfRange { dt: f64, max: f64 },

    #[error("gating variable `{var}` = {value} left (0,1) at t = {t}")]
    StateEscape { var: char, value: f64, t: f64 },

    #[error("no equilibrium bracket for c = {c}: admissible range is [{lo}, {hi}]")]
    NoBracket { c: f64, lo: f64, hi: f64 },

    #[error("no oscillation: {crossings} section crossings after the transient (need 5)")]
    NoOscillation { crossings: usize },

    #[error("requested derivative order {requested} exceeds available jet order {available}")]
    OrderTooHigh { requested: usize, available: usize },

    #[error("parameter constraint violated: {0}")]
    SpecViolation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("point outside the Hörmander set: normalized D = {normalized_d:e}")]
    OutsideHormanderSet { normalized_d: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
