//! Experiment runner behind the `aoi` binary.

pub mod config;
pub mod experiment;
pub mod format;
pub mod report;

use aoi_core::{
    check_uncapped_value_properties, uncapped_check_states, Model, SolverResult, ValueChecks,
};

use config::{ExperimentConfig, Method};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error in {field}: {reason}")]
    Config { field: String, reason: String },
    #[error("solver failed: {0}")]
    Solver(aoi_core::Error),
    #[error("{0}")]
    Core(#[from] aoi_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(field: &str, reason: String) -> Self {
        CliError::Config {
            field: field.to_string(),
            reason,
        }
    }

    /// Process exit status: 1 for configuration problems, 2 when a required
    /// instance could not be solved.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Solver(_) => 2,
            _ => 1,
        }
    }
}

/// Solves `model` with the configured method.
pub fn solve(model: &Model, cfg: &ExperimentConfig) -> Result<SolverResult, aoi_core::Error> {
    match cfg.method {
        Method::PolicyIteration => {
            aoi_core::structured_relative_policy_iteration(model, &cfg.solver)
        }
        Method::ValueIteration => aoi_core::relative_value_iteration(model, &cfg.solver),
    }
}

/// Value checks on the raised chain, or why they were not run.
pub fn uncapped_checks(
    model: &Model,
    cfg: &ExperimentConfig,
) -> Option<Result<ValueChecks, String>> {
    if !cfg.uncapped_checks {
        return None;
    }
    let states = uncapped_check_states(model, cfg.solver.epsilon);
    if states > cfg.uncapped_max_states {
        return Some(Err(format!(
            "skipped: raised chain needs {states} states (limit {})",
            cfg.uncapped_max_states
        )));
    }
    Some(check_uncapped_value_properties(model, &cfg.solver).map_err(|e| format!("failed: {e}")))
}

pub(crate) fn write_file(path: &str, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_string(),
        source,
    })
}
