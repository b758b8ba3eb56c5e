use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use vqpde_core::beam::BeamProblem;
use vqpde_core::vqe::OptimizerOptions;

use crate::error::CliError;

/// Smallest register accepted from a configuration file.
pub const MIN_QUBITS: usize = 3;
pub const MAX_QUBITS: usize = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Run,
    Sweep,
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzConfig {
    pub reps: usize,
}

impl Default for AnsatzConfig {
    fn default() -> Self {
        AnsatzConfig { reps: 5 }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("vqpde-out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: BeamProblem,
    #[serde(default)]
    pub ansatz: AnsatzConfig,
    #[serde(default)]
    pub optimizer: OptimizerOptions,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub mode: Mode,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let n = self.problem.num_qubits;
        if !(MIN_QUBITS..=MAX_QUBITS).contains(&n) {
            return Err(CliError::Config(format!(
                "num_qubits must lie in [{MIN_QUBITS}, {MAX_QUBITS}], got {n}"
            )));
        }
        self.problem
            .validate()
            .and_then(|_| self.problem.load_spec())
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.optimizer
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn with_qubits(&self, num_qubits: usize) -> RunConfig {
        let mut c = self.clone();
        c.problem.num_qubits = num_qubits;
        c
    }
}

/// Parses and validates a JSON configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let config: RunConfig =
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Parses a comma-separated list of register sizes such as `3,4,5`.
pub fn parse_qubit_list(text: &str) -> Result<Vec<usize>, CliError> {
    let mut out = Vec::new();
    for item in text.split(',') {
        let item = item.trim();
        let n: usize = item
            .parse()
            .map_err(|_| CliError::Config(format!("invalid qubit count {item:?}")))?;
        if !(MIN_QUBITS..=MAX_QUBITS).contains(&n) {
            return Err(CliError::Config(format!(
                "qubit count {n} outside [{MIN_QUBITS}, {MAX_QUBITS}]"
            )));
        }
        if out.contains(&n) {
            return Err(CliError::Config(format!("qubit count {n} listed twice")));
        }
        out.push(n);
    }
    Ok(out)
}
