//! Error type shared across the crate.

use thiserror::Error;

/// Errors surfaced by fallible operations. Shape mismatches in the numeric
/// core are programming errors and panic instead (with both shapes in the
/// message).
#[derive(Debug, Error)]
pub enum Error {
    #[error("linear system numerically singular (condition estimate {cond_estimate:.3e})")]
    SingularSystem { cond_estimate: f64 },

    #[error("channel draw failed: {attempts} consecutive singular draws")]
    ChannelDrawFailed { attempts: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
