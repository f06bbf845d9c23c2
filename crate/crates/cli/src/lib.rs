//! Configuration loading and the run, reoptimize and bench workflows behind
//! the `pathopt` binary.

use std::fmt::Display;
use std::path::Path;

use pathopt_core::apps::AppError;
use pathopt_core::optmodel::OptError;
use pathopt_core::pathgen::PathError;
use pathopt_core::rulegen::RuleError;
use thiserror::Error;

pub mod bench;
pub mod config;
pub mod workflow;

pub use config::{Config, Instance};
pub use workflow::{reoptimize, run, Event, Outcome, PrevRun, Reoptimized};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {msg}")]
    Input { path: String, msg: String },
    #[error(transparent)]
    Recipe(#[from] AppError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Opt(#[from] OptError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("class {0} has no surviving candidate path")]
    InfeasibleClass(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn input(path: impl AsRef<Path>, err: impl Display) -> Self {
        CliError::Input { path: path.as_ref().display().to_string(), msg: err.to_string() }
    }

    /// 2 for bad input, 1 for a problem that has no solution, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input { .. } | CliError::Recipe(_) | CliError::Path(_) | CliError::Opt(_) => 2,
            CliError::InfeasibleClass(_) => 1,
            CliError::Rule(_) | CliError::Io(_) => 3,
        }
    }
}
