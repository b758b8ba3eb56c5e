//! Configuration-driven runner: single runs, register-size sweeps and the
//! oracle verification suite.

pub mod config;
pub mod error;
pub mod run;
pub mod verify;

pub use config::{parse_config, parse_qubit_list, Mode, RunConfig};
pub use error::CliError;
pub use run::{execute_run, execute_sweep, run_case, write_outputs, RunResult};
pub use verify::{verify_oracles, VerifyOptions, VerifyReport};

/// Caps the global worker pool at `VQPDE_THREADS` when it is set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("VQPDE_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| {
            CliError::Config(format!(
                "VQPDE_THREADS must be a positive integer, got {value:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}
