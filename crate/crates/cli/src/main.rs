use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vqpde::{
    configure_threads, execute_run, execute_sweep, parse_config, parse_qubit_list, verify_oracles,
    CliError, Mode, RunConfig, RunResult, VerifyOptions,
};

const DEFAULT_SWEEP: [usize; 3] = [3, 4, 5];

#[derive(Parser, Debug)]
#[command(
    name = "vqpde",
    version,
    about = "Variational statevector solver for FEM beam problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the mode named in the configuration (default: a single case).
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Repeat the configured case for several register sizes.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated qubit counts, e.g. 3,4,5.
        #[arg(long, default_value = "3,4,5")]
        qubits: String,
    },
    /// Run the oracle suites; exits with 3 if any check fails.
    Verify {
        /// Extend the exhaustive LSBT check to n = 6.
        #[arg(long)]
        deep: bool,
        /// Negative control: flip the projector-term sign.
        #[arg(long, hide = true)]
        flip_k2_sign: bool,
    },
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn summarize(result: &RunResult) {
    let m = &result.metrics;
    println!(
        "{} n={} accuracy={:.4}% rel_err={:.3e} fidelity={:.6} iterations={} n_q={} -> {}",
        result.config.problem.boundary_case.label(),
        result.config.problem.num_qubits,
        m.accuracy_pct,
        m.relative_error,
        m.fidelity,
        result.convergence.iterations,
        result.convergence.n_q,
        result.config.output_dir.display()
    );
}

fn verify(opts: VerifyOptions) -> Result<(), CliError> {
    let report = verify_oracles(&opts);
    for c in &report.checks {
        println!(
            "[{}] {}: max_error={:e} tol={:e} ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.max_error,
            c.tolerance,
            c.detail
        );
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(CliError::Verification(
            report
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.name.as_str())
                .collect::<Vec<_>>()
                .join(", "),
        ))
    }
}

fn sweep(config: &RunConfig, qubits: &[usize]) -> Result<(), CliError> {
    let results = execute_sweep(config, qubits)?;
    results.iter().for_each(summarize);
    Ok(())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    configure_threads()?;
    match command {
        Command::Run { config } => {
            let config = load_config(&config)?;
            match config.mode {
                Mode::Run => execute_run(&config).map(|r| summarize(&r)),
                Mode::Sweep => sweep(&config, &DEFAULT_SWEEP),
                Mode::Verify => verify(VerifyOptions::default()),
            }
        }
        Command::Sweep { config, qubits } => {
            let config = load_config(&config)?;
            sweep(&config, &parse_qubit_list(&qubits)?)
        }
        Command::Verify { deep, flip_k2_sign } => verify(VerifyOptions { deep, flip_k2_sign }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
