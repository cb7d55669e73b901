//! Experiment runner: configuration, the four experiment commands and
//! deterministic artifact emission.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

use std::fmt;
use std::path::PathBuf;

pub use config::ExperimentConfig;

/// Exit code of an acceptance failure.
pub const EXIT_ACCEPTANCE: i32 = 1;
/// Exit code of an invalid configuration.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code of a numerical failure.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(rspde_core::Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<rspde_core::Error> for CliError {
    fn from(e: rspde_core::Error) -> Self {
        use rspde_core::Error as E;
        match e {
            E::WindowExhausted { .. } | E::NonContractive { .. } | E::PicardDivergence { .. } => CliError::Numerical(e),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// One declared acceptance check of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass() {
            0
        } else {
            EXIT_ACCEPTANCE
        }
    }
}
