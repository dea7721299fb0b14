use thiserror::Error;

/// Errors raised by the simulator, learner and evaluation harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("negative total thrust {0} N")]
    NegativeThrust(f64),
    #[error("simulation diverged at t = {t:.3} s ({what})")]
    Divergence { t: f64, what: &'static str },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("observation layout mismatch: expected {expected}, got {got}")]
    Layout { expected: usize, got: usize },
    #[error("reference singular at t = {t:.3} s (|a + g e3| = {norm:.3e})")]
    Singularity { t: f64, norm: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite loss during PPO update ({0})")]
    NonFiniteLoss(&'static str),
    #[error("empty series")]
    EmptySeries,
    #[error("series of {duration:.3} s is shorter than the dwell window {tau:.3} s")]
    SeriesTooShort { duration: f64, tau: f64 },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
