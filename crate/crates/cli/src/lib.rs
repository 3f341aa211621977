//! Experiment runner for `lpir-core`: JSON configs, CSV/JSON artifacts and
//! the `lpir` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod config;
pub mod experiments;

pub use config::{parse_config, validate, Diagnostic, ExperimentConfig, Kind, Overrides};
pub use experiments::{run, RunError, RunReport};

use std::path::Path;

/// Reads and parses a config file. Relative paths inside it resolve
/// against the file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(|source| artifacts::IoError {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base).map_err(|d| RunError::Invalid(vec![d]))
}
