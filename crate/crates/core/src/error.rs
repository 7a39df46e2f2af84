use thiserror::Error;

/// Errors produced by the simulator and its diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("arm index {arm} out of range for {k} arms")]
    ArmOutOfRange { arm: usize, k: usize },

    #[error("invalid config: {0}")]
    Config(String),

    /// Logits became non-finite; `step` is the 1-based iteration that produced them.
    #[error("poisoned state at step {step} (seed {seed}, eta {eta})")]
    PoisonedState { step: u64, seed: u64, eta: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
