use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },

    #[error("time {time} is not a multiple of the grid step {step}")]
    OffGrid { time: f64, step: f64 },

    #[error("time window [{start}, {end}] is not covered by the available data [{available_start}, {available_end}]")]
    OutOfWindow { start: f64, end: f64, available_start: f64, available_end: f64 },

    #[error("noise window exhausted at t = {at}: no forward room for a horizon of {min_steps} steps")]
    WindowExhausted { at: f64, min_steps: usize },

    #[error("contraction bound {bound} exceeds the target {target} already at the minimum horizon (t = {at})")]
    NonContractive { at: f64, bound: f64, target: f64 },

    #[error("Picard iteration did not reach tolerance {tol} within {iters} iterations (last difference {last_diff})")]
    PicardDivergence { iters: usize, tol: f64, last_diff: f64 },

    #[error("delay bound violated: mu = {mu} is not below log(lambda/C_F)/lambda = {threshold}")]
    DelayBoundViolated { mu: f64, threshold: f64 },

    #[error("insufficient path history: need [{needed}, 0], have [{available}, ..]")]
    InsufficientHistory { needed: f64, available: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
