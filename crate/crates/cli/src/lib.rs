//! Batch front end for `xva-core`: TOML-configured valuations, parameter
//! sweeps, the study's figure and table data as CSV, and rate-relation
//! reports.

use std::path::PathBuf;

use thiserror::Error;
use xva_core::{ClaimError, ClosedFormError, ModelError, OracleError, PdeError};

pub mod commands;
pub mod config;
pub mod engine;
pub mod output;
pub mod presets;
pub mod sweep;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Claim(#[from] ClaimError),
    #[error("{0}")]
    Incompatible(String),
    #[error("rate relations violated (rerun with --allow-violations to proceed)")]
    Violations,
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    ClosedForm(#[from] ClosedFormError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 1 for anything wrong with the inputs, 2 when a solver fails.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Pde(PdeError::ClosedForm(ClosedFormError::NotSymmetric(_))) => 1,
            CliError::ClosedForm(ClosedFormError::NotSymmetric(_)) => 1,
            CliError::Pde(_) | CliError::Oracle(_) | CliError::ClosedForm(_) => 2,
            _ => 1,
        }
    }
}
