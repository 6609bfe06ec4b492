//! Scenario files and subcommands of the `fdlab` command-line tool.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batteries;
pub mod commands;
pub mod scenario;

use thiserror::Error;

/// Exit status of a subcommand that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Violation,
}

impl Outcome {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Self::Pass
        } else {
            Self::Violation
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Self::Pass => 0,
            Self::Violation => 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid scenario:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
    #[error(transparent)]
    Compute(#[from] fdlab::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for usage, validation and refused preconditions; 1 for failures during computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Validation(_) => 2,
            Self::Compute(fdlab::Error::Refused(_) | fdlab::Error::InvalidInput(_) | fdlab::Error::Config(_)) => 2,
            _ => 1,
        }
    }
}

/// Sets the global worker count from `FDLAB_WORKERS` when present.
pub fn configure_workers() -> Result<(), CliError> {
    match std::env::var("FDLAB_WORKERS") {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| CliError::Usage(format!("FDLAB_WORKERS = `{v}` is not a positive integer")))?;
            if n == 0 {
                return Err(CliError::Usage("FDLAB_WORKERS must be positive".into()));
            }
            // A pool may already exist when called twice in one process; the first setting wins.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Ok(())
        }
        Err(_) => Ok(()),
    }
}
