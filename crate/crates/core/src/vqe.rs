//! Variational loss, its optimization, and solution extraction.
//!
//! With `φ(θ)` normalized and the scale `c` eliminated in closed form,
//! the loss is `-(⟨f|φ⟩)² / (2 ⟨φ|K_mod|φ⟩)` at `c* = ⟨f|φ⟩ / ⟨φ|K_mod|φ⟩`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{assemble, set_to_zero, BcSpec, BeamProblem, DenseOperator, LoadSpec};
use crate::error::{Error, Result};
use crate::lsbt::BcObservable;
use crate::optim::{self, BfgsOptions, Termination};
use crate::pauli::{build_structured, StructuredOperator};
use crate::statevector::{
    expectation, overlap_term, overlap_term_ansatz, prepare_ansatz, shift_by, AmplitudeOracle,
    AnsatzSpec, GateOp, Statevector,
};

/// Below this, `⟨φ|K_mod|φ⟩` is treated as zero.
pub const MIN_QUAD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub quad: f64,
    pub overlap: f64,
    pub c_star: f64,
    pub loss: f64,
}

impl LossBreakdown {
    pub fn from_parts(quad: f64, overlap: f64) -> Result<LossBreakdown> {
        if !(quad > MIN_QUAD) {
            return Err(Error::NearSingularEnergy(quad));
        }
        Ok(LossBreakdown {
            quad,
            overlap,
            c_star: overlap / quad,
            loss: -overlap * overlap / (2.0 * quad),
        })
    }

    /// Loss at an arbitrary scale `c`: `c²/2 quad - c overlap`.
    pub fn loss_at_scale(&self, c: f64) -> f64 {
        0.5 * c * c * self.quad - c * self.overlap
    }
}

/// Everything needed to evaluate the loss for one problem.
#[derive(Clone, Debug)]
pub struct LossContext {
    pub problem: BeamProblem,
    pub bc: BcSpec,
    pub ansatz: AnsatzSpec,
    pub operator: StructuredOperator,
    pub load: LoadSpec,
    bc_observable: BcObservable,
    load_oracle: AmplitudeOracle,
    load_state: Statevector,
    /// Shift circuit and the indices of the terms measured after it.
    shift_groups: Vec<(Vec<GateOp>, Vec<usize>)>,
    k_mod: DenseOperator,
}

impl LossContext {
    pub fn new(problem: &BeamProblem, bc: &BcSpec, reps: usize) -> Result<LossContext> {
        problem.validate()?;
        let n = problem.num_qubits;
        let operator = build_structured(problem, bc)?;
        let load = LoadSpec::new(problem.load_kind(), problem.num_dofs(), bc)?;
        let (k_mod, _) = set_to_zero(&assemble(problem)?, bc);

        let mut shift_groups: Vec<(usize, Vec<usize>)> = Vec::new();
        for (i, term) in operator.terms.iter().enumerate() {
            match shift_groups.iter_mut().find(|(s, _)| *s == term.shift) {
                Some((_, idx)) => idx.push(i),
                None => shift_groups.push((term.shift, vec![i])),
            }
        }
        Ok(LossContext {
            bc_observable: BcObservable::new(&operator.bc_pairs, n)?,
            load_oracle: AmplitudeOracle::new(&load.vector)?,
            load_state: Statevector::from_real(&load.vector)?,
            shift_groups: shift_groups
                .into_iter()
                .map(|(s, idx)| (shift_by(s, n), idx))
                .collect(),
            problem: problem.clone(),
            bc: bc.clone(),
            ansatz: AnsatzSpec {
                num_qubits: n,
                reps,
            },
            operator,
            load,
            k_mod,
        })
    }

    pub fn num_parameters(&self) -> usize {
        self.ansatz.num_parameters()
    }

    /// Circuits per loss evaluation: one per structured term plus the
    /// overlap circuit. Independent of the register size.
    pub fn circuits_per_evaluation(&self) -> usize {
        self.operator.terms.len() + 1
    }

    pub fn bc_circuits(&self) -> usize {
        self.bc_observable.len()
    }

    pub fn k_mod(&self) -> &DenseOperator {
        &self.k_mod
    }

    pub fn load_state(&self) -> &Statevector {
        &self.load_state
    }

    /// `⟨φ|K_mod|φ⟩` from shifted-state term expectations plus the
    /// transformed boundary-correction observables.
    pub fn quad_quantum(&self, phi: &Statevector) -> Result<f64> {
        let mut quad = 0.0;
        for (circuit, indices) in &self.shift_groups {
            let mut shifted = phi.clone();
            shifted.apply_all(circuit)?;
            for &i in indices {
                let term = &self.operator.terms[i];
                quad += term.weight() * expectation(&shifted, term.prefix, &term.tail)?;
            }
        }
        Ok(quad + self.bc_observable.expectation(phi)?)
    }

    pub fn evaluate_loss(&self, theta: &[f64]) -> Result<LossBreakdown> {
        let phi = prepare_ansatz(&self.ansatz, theta)?;
        let quad = self.quad_quantum(&phi)?;
        let overlap = overlap_term_ansatz(&self.load_oracle, &self.ansatz, theta)?;
        LossBreakdown::from_parts(quad, overlap)
    }

    /// Loss for an arbitrary normalized real state, with the overlap taken
    /// from two amplitude oracles.
    pub fn evaluate_state(&self, phi: &Statevector) -> Result<LossBreakdown> {
        let quad = self.quad_quantum(phi)?;
        let overlap = overlap_term(&self.load_state, phi)?;
        LossBreakdown::from_parts(quad, overlap)
    }

    /// Dense reference: `φᵀ K_mod φ` and `fᵀ φ` on the materialized matrix.
    pub fn evaluate_loss_dense(&self, theta: &[f64]) -> Result<LossBreakdown> {
        let phi = prepare_ansatz(&self.ansatz, theta)?.real_parts();
        let quad = self.k_mod.quadratic_form(&phi);
        let overlap = phi.iter().zip(&self.load.vector).map(|(a, b)| a * b).sum();
        LossBreakdown::from_parts(quad, overlap)
    }

    pub fn gradient(&self, theta: &[f64], step: f64) -> Result<Vec<f64>> {
        central_difference(|t| Ok(self.evaluate_loss(t)?.loss), theta, step)
    }
}

/// Central differences `(f(θ + h e_k) - f(θ - h e_k)) / 2h`.
pub fn central_difference<F>(f: F, theta: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut probe = theta.to_vec();
    (0..theta.len())
        .map(|k| {
            probe[k] = theta[k] + step;
            let up = f(&probe)?;
            probe[k] = theta[k] - step;
            let down = f(&probe)?;
            probe[k] = theta[k];
            Ok((up - down) / (2.0 * step))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerOptions {
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub fd_step: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            seed: 7,
            restarts: 5,
            max_iter: 2000,
            grad_tol: 1e-8,
            fd_step: 1e-6,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Domain("restarts must be at least 1".into()));
        }
        if !(self.fd_step > 0.0) || !(self.grad_tol >= 0.0) {
            return Err(Error::Domain(
                "fd_step must be positive and grad_tol nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Uniform `[-π, π)` start for restart `index`, from its own RNG stream.
pub fn initial_theta(seed: u64, index: usize, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    (0..len)
        .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub restart: usize,
    pub iterations: usize,
    pub loss_history: Vec<f64>,
    pub grad_norm_history: Vec<f64>,
    pub theta_initial: Vec<f64>,
    pub theta_final: Vec<f64>,
    /// Circuits per loss evaluation (structured terms plus overlap).
    pub n_q: usize,
    /// Boundary-correction circuits per evaluation, counted separately.
    pub n_bc: usize,
    /// Loss evaluations, including those inside finite differences.
    pub function_evals: usize,
    /// Line-search value-and-gradient evaluations per iteration, reported
    /// as the inner-loop count.
    pub line_search_evals: Vec<usize>,
    pub termination: Termination,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub final_loss: Option<f64>,
    pub iterations: usize,
    pub termination: Option<Termination>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionProfile {
    /// Per node, physical units.
    pub deflections: Vec<f64>,
    pub rotations: Vec<f64>,
    /// `c* ‖f‖`, with the sign absorbed so that `⟨f|state⟩ ≥ 0`.
    pub scale: f64,
    /// Gauge-fixed normalized ansatz state.
    pub state: Vec<f64>,
}

impl SolutionProfile {
    pub fn from_state(phi: &[f64], breakdown: &LossBreakdown, load: &LoadSpec) -> SolutionProfile {
        let overlap: f64 = phi.iter().zip(&load.vector).map(|(a, b)| a * b).sum();
        let gauge = if overlap < 0.0 { -1.0 } else { 1.0 };
        let state: Vec<f64> = phi.iter().map(|a| gauge * a).collect();
        let scale = gauge * breakdown.c_star * load.normalization_scale;
        let v: Vec<f64> = state.iter().map(|a| scale * a).collect();
        SolutionProfile {
            deflections: v.iter().step_by(2).copied().collect(),
            rotations: v.iter().skip(1).step_by(2).copied().collect(),
            scale,
            state,
        }
    }

    /// Interleaved DOF vector `[w0, θ0, w1, θ1, ...]`.
    pub fn displacement(&self) -> Vec<f64> {
        self.state.iter().map(|a| self.scale * a).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizationOutcome {
    pub record: ConvergenceRecord,
    pub profile: SolutionProfile,
    pub breakdown: LossBreakdown,
    pub restarts: Vec<RestartSummary>,
}

fn run_restart(
    ctx: &LossContext,
    opts: &OptimizerOptions,
    index: usize,
) -> Result<ConvergenceRecord> {
    let theta0 = initial_theta(opts.seed, index, ctx.num_parameters());
    let bfgs = BfgsOptions {
        max_iter: opts.max_iter,
        grad_tol: opts.grad_tol,
        ..BfgsOptions::default()
    };
    let per_gradient = 2 * ctx.num_parameters();
    let trace = optim::minimize(
        |t| Ok((ctx.evaluate_loss(t)?.loss, ctx.gradient(t, opts.fd_step)?)),
        theta0.clone(),
        &bfgs,
    )?;
    Ok(ConvergenceRecord {
        restart: index,
        iterations: trace.iterations,
        loss_history: trace.loss_history,
        grad_norm_history: trace.grad_norm_history,
        theta_initial: theta0,
        theta_final: trace.x,
        n_q: ctx.circuits_per_evaluation(),
        n_bc: ctx.bc_circuits(),
        function_evals: trace.value_grad_evals * (1 + per_gradient),
        line_search_evals: trace.line_search_evals,
        termination: trace.termination,
    })
}

/// Runs `opts.restarts` independent BFGS runs (in parallel) and keeps the
/// lowest final loss, ties going to the lower restart index.
pub fn optimize(ctx: &LossContext, opts: &OptimizerOptions) -> Result<OptimizationOutcome> {
    opts.validate()?;
    let results: Vec<Result<ConvergenceRecord>> = (0..opts.restarts)
        .into_par_iter()
        .map(|i| run_restart(ctx, opts, i))
        .collect();

    let summaries = results
        .iter()
        .enumerate()
        .map(|(i, r)| match r {
            Ok(rec) => RestartSummary {
                restart: i,
                final_loss: rec.loss_history.last().copied(),
                iterations: rec.iterations,
                termination: Some(rec.termination),
                error: None,
            },
            Err(e) => RestartSummary {
                restart: i,
                final_loss: None,
                iterations: 0,
                termination: None,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let mut best: Option<ConvergenceRecord> = None;
    let mut fallback: Option<(f64, Vec<f64>)> = None;
    for rec in results.into_iter().flatten() {
        let last = *rec
            .loss_history
            .last()
            .expect("history holds the start point");
        if rec.termination == Termination::LineSearchFailed {
            if fallback.as_ref().is_none_or(|(l, _)| last < *l) {
                fallback = Some((last, rec.theta_final.clone()));
            }
            continue;
        }
        if best
            .as_ref()
            .is_none_or(|b| last < *b.loss_history.last().unwrap())
        {
            best = Some(rec);
        }
    }
    let Some(record) = best else {
        let (best_loss, best_theta) = fallback.unwrap_or((f64::NAN, Vec::new()));
        return Err(Error::OptimizationFailed {
            best_loss,
            best_theta,
        });
    };

    let breakdown = ctx.evaluate_loss(&record.theta_final)?;
    let phi = prepare_ansatz(&ctx.ansatz, &record.theta_final)?.real_parts();
    let profile = SolutionProfile::from_state(&phi, &breakdown, &ctx.load);
    Ok(OptimizationOutcome {
        record,
        profile,
        breakdown,
        restarts: summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::{classical_solve, BoundaryCase};

    fn context(case: BoundaryCase, n: usize, reps: usize) -> LossContext {
        let p = BeamProblem::reference_setup(case).with_qubits(n);
        LossContext::new(&p, &p.bc_spec(), reps).unwrap()
    }

    #[test]
    fn identity_operator_trivial_loss() {
        let b = LossBreakdown::from_parts(1.0, 1.0).unwrap();
        assert_eq!((b.loss, b.c_star), (-0.5, 1.0));
        assert!(matches!(
            LossBreakdown::from_parts(1e-13, 1.0),
            Err(Error::NearSingularEnergy(_))
        ));
    }

    #[test]
    fn scale_vertex_is_optimal() {
        let b = LossBreakdown::from_parts(3.0, -0.4).unwrap();
        assert!((b.loss_at_scale(b.c_star) - b.loss).abs() < 1e-15);
        for d in [1e-3, -1e-3] {
            assert!(b.loss_at_scale(b.c_star + d) > b.loss);
        }
    }

    #[test]
    fn quantum_and_dense_paths_agree() {
        for case in BoundaryCase::ALL {
            let ctx = context(case, 3, 2);
            for i in 0..10 {
                let theta = initial_theta(11, i, ctx.num_parameters());
                let q = ctx.evaluate_loss(&theta).unwrap();
                let d = ctx.evaluate_loss_dense(&theta).unwrap();
                assert!((q.quad - d.quad).abs() < 1e-9, "{case:?}");
                assert!((q.overlap - d.overlap).abs() < 1e-9, "{case:?}");
            }
        }
    }

    #[test]
    fn classical_direction_hits_target_energy() {
        for case in BoundaryCase::ALL {
            let ctx = context(case, 4, 1);
            let sol = classical_solve(ctx.k_mod(), &ctx.load).unwrap();
            let phi = Statevector::from_real(&sol.normalized).unwrap();
            let b = ctx.evaluate_state(&phi).unwrap();
            assert!(
                ((b.loss - sol.target_energy) / sol.target_energy).abs() < 1e-9,
                "{case:?}"
            );
        }
    }

    #[test]
    fn gradient_periodicity_and_zero_direction() {
        let ctx = context(BoundaryCase::Cantilever, 3, 1);
        let theta = initial_theta(5, 0, ctx.num_parameters());
        let g = ctx.gradient(&theta, 1e-6).unwrap();
        for k in 0..theta.len() {
            let mut shifted = theta.clone();
            shifted[k] += 2.0 * std::f64::consts::PI;
            let gs = ctx.gradient(&shifted, 1e-6).unwrap();
            for (a, b) in g.iter().zip(&gs) {
                assert!((a - b).abs() < 1e-9, "{k}: {a} vs {b}");
            }
        }
        // An extra angle feeding nothing.
        let p = ctx.num_parameters();
        let mut padded = theta.clone();
        padded.push(0.7);
        let g =
            central_difference(|t| Ok(ctx.evaluate_loss(&t[..p])?.loss), &padded, 1e-6).unwrap();
        assert!(g[p].abs() <= 1e-8);
    }

    #[test]
    fn single_element_reaches_classical_solution() {
        let mut p = BeamProblem::reference_setup(BoundaryCase::Cantilever).with_qubits(2);
        p.length = 1.0;
        p.youngs_modulus = 1.0;
        let bc = p.bc_spec();
        let ctx = LossContext::new(&p, &bc, 2).unwrap();
        let opts = OptimizerOptions {
            restarts: 3,
            ..OptimizerOptions::default()
        };
        let out = optimize(&ctx, &opts).unwrap();
        let sol = classical_solve(ctx.k_mod(), &ctx.load).unwrap();
        let v = out.profile.displacement();
        let err: f64 = v
            .iter()
            .zip(&sol.displacement)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = sol.displacement.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(err / norm <= 1e-3, "{}", err / norm);
        assert!(out.record.loss_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn restarts_are_deterministic() {
        let ctx = context(BoundaryCase::Ssb, 3, 1);
        let opts = OptimizerOptions {
            restarts: 2,
            max_iter: 30,
            ..OptimizerOptions::default()
        };
        let a = optimize(&ctx, &opts).unwrap();
        let b = optimize(&ctx, &opts).unwrap();
        assert_eq!(a.record.loss_history, b.record.loss_history);
        assert_eq!(a.record.theta_final, b.record.theta_final);
        assert_ne!(initial_theta(1, 0, 4), initial_theta(1, 1, 4));
    }

    #[test]
    fn rejects_zero_restarts() {
        let ctx = context(BoundaryCase::Ssb, 3, 1);
        let opts = OptimizerOptions {
            restarts: 0,
            ..OptimizerOptions::default()
        };
        assert!(optimize(&ctx, &opts).is_err());
    }
}
