//! Accuracy, RMSE and fidelity against the classical reference.

use serde::Serialize;

use crate::error::{Error, Result};

/// Returns `(accuracy_pct, relative_error)`.
pub fn accuracy(target: f64, predicted: f64) -> Result<(f64, f64)> {
    if target == 0.0 || !target.is_finite() || !predicted.is_finite() {
        return Err(Error::Domain(format!(
            "accuracy needs a finite nonzero target, got target={target}, predicted={predicted}"
        )));
    }
    let relative_error = (target - predicted).abs() / target.abs();
    Ok((100.0 * (1.0 - relative_error), relative_error))
}

fn check_lengths(a: &[f64], b: &[f64], min: usize) -> Result<()> {
    if a.len() != b.len() || a.len() < min {
        return Err(Error::Domain(format!(
            "vectors must have equal length >= {min}, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

pub fn rmse(predicted: &[f64], reference: &[f64]) -> Result<f64> {
    check_lengths(predicted, reference, 1)?;
    let sq: f64 = predicted
        .iter()
        .zip(reference)
        .map(|(p, r)| (p - r) * (p - r))
        .sum();
    Ok((sq / predicted.len() as f64).sqrt())
}

/// Returns `(rmse, nrmse_pct)` with the percentage taken over the range of
/// `reference`.
pub fn rmse_and_normalized(predicted: &[f64], reference: &[f64]) -> Result<(f64, f64)> {
    check_lengths(predicted, reference, 2)?;
    let e = rmse(predicted, reference)?;
    let max = reference.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = reference.iter().copied().fold(f64::INFINITY, f64::min);
    if max == min {
        return Err(Error::NrmseUndefined);
    }
    Ok((e, 100.0 * e / (max - min)))
}

/// Squared overlap of the two vectors after normalizing each.
pub fn fidelity(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b, 1)?;
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain("fidelity of a zero vector".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let overlap = dot / (na * nb);
    Ok(overlap * overlap)
}

/// RMSE of a loss history against the constant target line.
pub fn rmse_objective(loss_history: &[f64], target: f64) -> Result<f64> {
    let line = vec![target; loss_history.len()];
    rmse(loss_history, &line)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub accuracy_pct: f64,
    pub relative_error: f64,
    /// Over the loss history, against the target energy.
    pub rmse_objective: f64,
    pub rmse_deflection: f64,
    pub rmse_rotation: f64,
    /// `None` when the reference deflections are constant.
    pub nrmse_deflection_pct: Option<f64>,
    pub nrmse_rotation_pct: Option<f64>,
    pub fidelity: f64,
}

/// Inputs for [`MetricsReport::compute`]. Profiles are per node in
/// physical units; states are the full DOF vectors.
pub struct MetricsInput<'a> {
    pub target_energy: f64,
    pub final_loss: f64,
    pub loss_history: &'a [f64],
    pub deflection_pred: &'a [f64],
    pub deflection_ref: &'a [f64],
    pub rotation_pred: &'a [f64],
    pub rotation_ref: &'a [f64],
    pub state_pred: &'a [f64],
    pub state_ref: &'a [f64],
}

fn optional_nrmse(pred: &[f64], reference: &[f64]) -> Result<(f64, Option<f64>)> {
    match rmse_and_normalized(pred, reference) {
        Ok((e, pct)) => Ok((e, Some(pct))),
        Err(Error::NrmseUndefined) => Ok((rmse(pred, reference)?, None)),
        Err(e) => Err(e),
    }
}

impl MetricsReport {
    pub fn compute(input: &MetricsInput<'_>) -> Result<MetricsReport> {
        let (accuracy_pct, relative_error) = accuracy(input.target_energy, input.final_loss)?;
        let rmse_objective = rmse_objective(input.loss_history, input.target_energy)?;
        let (rmse_deflection, nrmse_deflection_pct) =
            optional_nrmse(input.deflection_pred, input.deflection_ref)?;
        let (rmse_rotation, nrmse_rotation_pct) =
            optional_nrmse(input.rotation_pred, input.rotation_ref)?;
        Ok(MetricsReport {
            accuracy_pct,
            relative_error,
            rmse_objective,
            rmse_deflection,
            rmse_rotation,
            nrmse_deflection_pct,
            nrmse_rotation_pct,
            fidelity: fidelity(input.state_pred, input.state_ref)?,
        })
    }
}
