use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use vqpde_core::beam::classical_solve;
use vqpde_core::metrics::{MetricsInput, MetricsReport};
use vqpde_core::vqe::{
    optimize, ConvergenceRecord, LossBreakdown, LossContext, RestartSummary, SolutionProfile,
};

use crate::config::RunConfig;
use crate::error::CliError;

pub const CONVERGENCE_HEADER: [&str; 3] = ["iteration", "loss", "grad_norm"];
pub const PROFILE_HEADER: [&str; 6] = [
    "node",
    "x_m",
    "deflection_pred",
    "deflection_ref",
    "rotation_pred",
    "rotation_ref",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReferenceProfile {
    pub deflections: Vec<f64>,
    pub rotations: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    pub config: RunConfig,
    pub structured_terms: usize,
    pub bc_pairs: usize,
    pub element_length: f64,
    /// `-1/2 fᵀ K_mod⁻¹ f` for the unit-norm load.
    pub target_energy: f64,
    pub breakdown: LossBreakdown,
    pub convergence: ConvergenceRecord,
    pub restarts: Vec<RestartSummary>,
    pub profile: SolutionProfile,
    pub reference: ReferenceProfile,
    pub metrics: MetricsReport,
    pub wall_time_seconds: f64,
}

/// Classical reference, optimization and metrics for one configuration.
/// Nothing is written to disk.
pub fn run_case(config: &RunConfig) -> Result<RunResult, CliError> {
    config.validate()?;
    let start = Instant::now();
    let problem = &config.problem;
    let bc = problem.bc_spec();
    let ctx = LossContext::new(problem, &bc, config.ansatz.reps)?;
    let classical = classical_solve(ctx.k_mod(), &ctx.load)?;
    let outcome = optimize(&ctx, &config.optimizer)?;

    let reference = ReferenceProfile {
        deflections: classical.displacement.iter().step_by(2).copied().collect(),
        rotations: classical
            .displacement
            .iter()
            .skip(1)
            .step_by(2)
            .copied()
            .collect(),
    };
    let metrics = MetricsReport::compute(&MetricsInput {
        target_energy: classical.target_energy,
        final_loss: outcome.breakdown.loss,
        loss_history: &outcome.record.loss_history,
        deflection_pred: &outcome.profile.deflections,
        deflection_ref: &reference.deflections,
        rotation_pred: &outcome.profile.rotations,
        rotation_ref: &reference.rotations,
        state_pred: &outcome.profile.state,
        state_ref: &classical.normalized,
    })?;

    Ok(RunResult {
        config: config.clone(),
        structured_terms: ctx.operator.terms.len(),
        bc_pairs: ctx.operator.bc_pairs.len(),
        element_length: problem.element_length(),
        target_energy: classical.target_energy,
        breakdown: outcome.breakdown,
        convergence: outcome.record,
        restarts: outcome.restarts,
        profile: outcome.profile,
        reference,
        metrics,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes `result.json`, `convergence.csv` and `profile.csv` into `dir`.
pub fn write_outputs(result: &RunResult, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;

    let json_path = dir.join("result.json");
    let json = serde_json::to_string_pretty(result).expect("result serializes");
    fs::write(&json_path, json + "\n").map_err(|e| CliError::io(&json_path, e))?;

    let conv = &result.convergence;
    write_csv(
        &dir.join("convergence.csv"),
        &CONVERGENCE_HEADER,
        conv.loss_history
            .iter()
            .zip(&conv.grad_norm_history)
            .enumerate()
            .map(|(i, (l, g))| vec![i.to_string(), l.to_string(), g.to_string()]),
    )?;

    let p = &result.profile;
    let r = &result.reference;
    write_csv(
        &dir.join("profile.csv"),
        &PROFILE_HEADER,
        (0..p.deflections.len()).map(|node| {
            vec![
                node.to_string(),
                (node as f64 * result.element_length).to_string(),
                p.deflections[node].to_string(),
                r.deflections[node].to_string(),
                p.rotations[node].to_string(),
                r.rotations[node].to_string(),
            ]
        }),
    )
}

pub fn execute_run(config: &RunConfig) -> Result<RunResult, CliError> {
    let result = run_case(config)?;
    write_outputs(&result, &config.output_dir)?;
    Ok(result)
}

pub fn sweep_dir(base: &Path, num_qubits: usize) -> PathBuf {
    base.join(format!("n{num_qubits}"))
}

/// One run per register size, each written under `output_dir/n<k>`.
pub fn execute_sweep(config: &RunConfig, qubits: &[usize]) -> Result<Vec<RunResult>, CliError> {
    let configs: Vec<RunConfig> = qubits
        .iter()
        .map(|&n| {
            let mut c = config.with_qubits(n);
            c.output_dir = sweep_dir(&config.output_dir, n);
            c.validate().map(|_| c)
        })
        .collect::<Result<_, _>>()?;
    configs.par_iter().map(execute_run).collect()
}
