//! Exact statevector simulation.
//!
//! Qubit `q` addresses bit `q` of the basis index, so qubit 0 is the least
//! significant bit. In tensor-product notation the leftmost factor acts on
//! the highest qubit.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pauli::{PauliString, Prefix};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "gate")]
pub enum GateOp {
    Ry { target: usize, angle: f64 },
    X { target: usize },
    H { target: usize },
    Cnot { control: usize, target: usize },
    Mcx { controls: Vec<usize>, target: usize },
}

impl GateOp {
    pub fn target(&self) -> usize {
        match *self {
            GateOp::Ry { target, .. }
            | GateOp::X { target }
            | GateOp::H { target }
            | GateOp::Cnot { target, .. }
            | GateOp::Mcx { target, .. } => target,
        }
    }

    fn control_mask(&self) -> usize {
        match self {
            GateOp::Cnot { control, .. } => 1 << control,
            GateOp::Mcx { controls, .. } => controls.iter().fold(0, |m, c| m | (1 << c)),
            _ => 0,
        }
    }

    /// Same gate with every qubit index moved up by `offset`.
    pub fn shifted(&self, offset: usize) -> GateOp {
        match self {
            GateOp::Ry { target, angle } => GateOp::Ry {
                target: target + offset,
                angle: *angle,
            },
            GateOp::X { target } => GateOp::X {
                target: target + offset,
            },
            GateOp::H { target } => GateOp::H {
                target: target + offset,
            },
            GateOp::Cnot { control, target } => GateOp::Cnot {
                control: control + offset,
                target: target + offset,
            },
            GateOp::Mcx { controls, target } => GateOp::Mcx {
                controls: controls.iter().map(|c| c + offset).collect(),
                target: target + offset,
            },
        }
    }

    fn validate(&self, num_qubits: usize) -> Result<()> {
        let check = |q: usize| {
            if q < num_qubits {
                Ok(())
            } else {
                Err(Error::Index {
                    index: q,
                    num_qubits,
                })
            }
        };
        check(self.target())?;
        match self {
            GateOp::Cnot { control, target } => {
                check(*control)?;
                if control == target {
                    return Err(Error::Domain("CNOT control equals target".into()));
                }
            }
            GateOp::Mcx { controls, target } => {
                for (i, c) in controls.iter().enumerate() {
                    check(*c)?;
                    if c == target || controls[..i].contains(c) {
                        return Err(Error::Domain(
                            "MCX controls must be distinct from each other and the target".into(),
                        ));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    amplitudes: Vec<Complex64>,
    num_qubits: usize,
}

impl Statevector {
    /// `|0...0⟩`
    pub fn zero(num_qubits: usize) -> Statevector {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Statevector {
            amplitudes,
            num_qubits,
        }
    }

    /// Normalizes a real vector of power-of-two length into a state.
    pub fn from_real(values: &[f64]) -> Result<Statevector> {
        let dim = values.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::Domain(format!(
                "state length {dim} is not a power of two"
            )));
        }
        let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Domain(
                "cannot normalize a zero or non-finite vector".into(),
            ));
        }
        Ok(Statevector {
            amplitudes: values
                .iter()
                .map(|x| Complex64::new(x / norm, 0.0))
                .collect(),
            num_qubits: dim.trailing_zeros() as usize,
        })
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Statevector> {
        let dim = amplitudes.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::Domain(format!(
                "state length {dim} is not a power of two"
            )));
        }
        Ok(Statevector {
            num_qubits: dim.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.re).collect()
    }

    pub fn max_imag(&self) -> f64 {
        self.amplitudes.iter().fold(0.0, |m, a| m.max(a.im.abs()))
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Statevector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn apply(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.num_qubits)?;
        self.apply_unchecked(gate, 0);
        Ok(())
    }

    /// Applies `gate` only on the branch where qubit `control` is `|1⟩`.
    pub fn apply_controlled(&mut self, gate: &GateOp, control: usize) -> Result<()> {
        gate.validate(self.num_qubits)?;
        if control >= self.num_qubits {
            return Err(Error::Index {
                index: control,
                num_qubits: self.num_qubits,
            });
        }
        if control == gate.target() || gate.control_mask() & (1 << control) != 0 {
            return Err(Error::Domain(
                "extra control overlaps the gate's qubits".into(),
            ));
        }
        self.apply_unchecked(gate, 1 << control);
        Ok(())
    }

    pub fn apply_all<'a, I>(&mut self, gates: I) -> Result<()>
    where
        I: IntoIterator<Item = &'a GateOp>,
    {
        gates.into_iter().try_for_each(|g| self.apply(g))
    }

    fn apply_unchecked(&mut self, gate: &GateOp, extra_controls: usize) {
        let cond = gate.control_mask() | extra_controls;
        let bit = 1usize << gate.target();
        let amps = &mut self.amplitudes;
        let pairs = (0..amps.len()).filter(|i| i & bit == 0 && i & cond == cond);
        match *gate {
            GateOp::X { .. } | GateOp::Cnot { .. } | GateOp::Mcx { .. } => {
                for i in pairs {
                    amps.swap(i, i | bit);
                }
            }
            GateOp::H { .. } => {
                let r = std::f64::consts::FRAC_1_SQRT_2;
                for i in pairs {
                    let (a0, a1) = (amps[i], amps[i | bit]);
                    amps[i] = (a0 + a1) * r;
                    amps[i | bit] = (a0 - a1) * r;
                }
            }
            GateOp::Ry { angle, .. } => {
                let (s, c) = (0.5 * angle).sin_cos();
                for i in pairs {
                    let (a0, a1) = (amps[i], amps[i | bit]);
                    amps[i] = a0 * c - a1 * s;
                    amps[i | bit] = a0 * s + a1 * c;
                }
            }
        }
    }
}

/// Free-function form of [`Statevector::apply`].
pub fn apply_gate(mut state: Statevector, gate: &GateOp) -> Result<Statevector> {
    state.apply(gate)?;
    Ok(state)
}

/// Real-amplitude hardware-efficient ansatz with linear entanglement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AnsatzSpec {
    pub num_qubits: usize,
    pub reps: usize,
}

impl AnsatzSpec {
    pub fn num_parameters(&self) -> usize {
        self.num_qubits * (self.reps + 1)
    }

    /// RY layer, then `reps` times a CNOT chain followed by another RY
    /// layer. Parameter `layer * n + q` drives qubit `q`.
    pub fn circuit(&self, theta: &[f64]) -> Result<Vec<GateOp>> {
        if theta.len() != self.num_parameters() {
            return Err(Error::Arity {
                expected: self.num_parameters(),
                actual: theta.len(),
            });
        }
        let n = self.num_qubits;
        let mut gates = Vec::with_capacity(theta.len() + self.reps * n.saturating_sub(1));
        for layer in 0..=self.reps {
            if layer > 0 {
                for q in 0..n.saturating_sub(1) {
                    gates.push(GateOp::Cnot {
                        control: q,
                        target: q + 1,
                    });
                }
            }
            for q in 0..n {
                gates.push(GateOp::Ry {
                    target: q,
                    angle: theta[layer * n + q],
                });
            }
        }
        Ok(gates)
    }
}

pub fn prepare_ansatz(spec: &AnsatzSpec, theta: &[f64]) -> Result<Statevector> {
    let mut state = Statevector::zero(spec.num_qubits);
    state.apply_all(&spec.circuit(theta)?)?;
    Ok(state)
}

/// Increment `|i⟩ -> |i + 1 mod 2^m⟩` as a cascade of multi-controlled X
/// gates, highest target first, finished by X on qubit 0.
pub fn shift_circuit(num_qubits: usize) -> Vec<GateOp> {
    let mut gates = Vec::with_capacity(num_qubits);
    for target in (1..num_qubits).rev() {
        let controls: Vec<usize> = (0..target).collect();
        gates.push(if controls.len() == 1 {
            GateOp::Cnot { control: 0, target }
        } else {
            GateOp::Mcx { controls, target }
        });
    }
    if num_qubits > 0 {
        gates.push(GateOp::X { target: 0 });
    }
    gates
}

/// Gates realizing `|i⟩ -> |i + shift mod 2^n⟩`. Even shifts increment the
/// `n - 1` upper qubits `shift / 2` times.
pub fn shift_by(shift: usize, num_qubits: usize) -> Vec<GateOp> {
    let dim = 1usize << num_qubits;
    let shift = shift % dim;
    if shift.is_multiple_of(2) {
        let upper: Vec<GateOp> = shift_circuit(num_qubits - 1)
            .iter()
            .map(|g| g.shifted(1))
            .collect();
        upper
            .iter()
            .cycle()
            .take(upper.len() * (shift / 2))
            .cloned()
            .collect()
    } else {
        let full = shift_circuit(num_qubits);
        full.iter()
            .cycle()
            .take(full.len() * shift)
            .cloned()
            .collect()
    }
}

/// `⟨ψ| prefix^(⊗(m-t)) ⊗ tail |ψ⟩` where the tail covers the `t` least
/// significant qubits. Projector prefixes restrict the sum to the matching
/// subspace instead of expanding into Z strings.
pub fn expectation(state: &Statevector, prefix: Prefix, tail: &PauliString) -> Result<f64> {
    let m = state.num_qubits();
    let t = tail.len();
    if t > m {
        return Err(Error::Domain(format!(
            "observable tail of {t} qubits exceeds the {m}-qubit register"
        )));
    }
    let width = m - t;
    let mask = (1usize << t) - 1;
    let amps = state.amplitudes();
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, a) in amps.iter().enumerate() {
        if !prefix.admits(i >> t, width) {
            continue;
        }
        let (target, phase) = tail.act(i & mask);
        let j = (i & !mask) | target;
        acc += amps[j].conj() * phase * a;
    }
    Ok(acc.re)
}

/// Full-register Pauli expectation.
pub fn expectation_pauli(state: &Statevector, pauli: &PauliString) -> Result<f64> {
    if pauli.len() != state.num_qubits() {
        return Err(Error::Domain(format!(
            "Pauli string of length {} on a {}-qubit state",
            pauli.len(),
            state.num_qubits()
        )));
    }
    expectation(state, Prefix::Identity, pauli)
}

/// Real orthogonal oracle with `U|0⟩ = |target⟩`, realized as the Householder
/// reflection through `|0⟩ - |target⟩`.
#[derive(Clone, Debug)]
pub struct AmplitudeOracle {
    reflector: Option<Vec<f64>>,
    num_qubits: usize,
}

impl AmplitudeOracle {
    pub fn new(target: &[f64]) -> Result<AmplitudeOracle> {
        let state = Statevector::from_real(target)?;
        let mut w = state.real_parts();
        w.iter_mut().for_each(|x| *x = -*x);
        w[0] += 1.0;
        let norm_sq: f64 = w.iter().map(|x| x * x).sum();
        let reflector = if norm_sq < 1e-30 {
            None
        } else {
            let s = (2.0 / norm_sq).sqrt();
            Some(w.into_iter().map(|x| x * s).collect())
        };
        Ok(AmplitudeOracle {
            reflector,
            num_qubits: state.num_qubits(),
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Applies the oracle to the low `num_qubits` qubits, optionally only on
    /// the branch where `control` is `|1⟩`.
    pub fn apply(&self, state: &mut Statevector, control: Option<usize>) -> Result<()> {
        let m = state.num_qubits();
        if let Some(c) = control {
            if c < self.num_qubits || c >= m {
                return Err(Error::Index {
                    index: c,
                    num_qubits: m,
                });
            }
        } else if m < self.num_qubits {
            return Err(Error::Index {
                index: self.num_qubits - 1,
                num_qubits: m,
            });
        }
        let Some(w) = &self.reflector else {
            return Ok(());
        };
        let block = 1usize << self.num_qubits;
        let amps = &mut state.amplitudes;
        for start in (0..amps.len()).step_by(block) {
            if let Some(c) = control {
                if start & (1 << c) == 0 {
                    continue;
                }
            }
            let slice = &mut amps[start..start + block];
            let dot: Complex64 = slice.iter().zip(w).map(|(a, &x)| a * x).sum();
            slice.iter_mut().zip(w).for_each(|(a, &x)| *a -= dot * x);
        }
        Ok(())
    }
}

/// Measures `X` on the ancilla (the most significant qubit) of a prepared
/// `(|0⟩|f⟩ + |1⟩|φ⟩)/√2`.
fn ancilla_x(state: &Statevector) -> Result<f64> {
    let m = state.num_qubits();
    let mut s = String::with_capacity(m);
    s.push('X');
    s.extend(std::iter::repeat_n('I', m - 1));
    expectation_pauli(state, &s.parse()?)
}

/// Runs H on the ancilla, the controlled `f` oracle, X on the ancilla, and
/// the controlled `φ` preparation, leaving `(|0⟩|f⟩ + |1⟩|φ⟩)/√2`.
fn prepare_pair<F>(f: &AmplitudeOracle, prepare_phi: F) -> Result<Statevector>
where
    F: FnOnce(&mut Statevector, usize) -> Result<()>,
{
    let n = f.num_qubits();
    let ancilla = n;
    let mut state = Statevector::zero(n + 1);
    state.apply(&GateOp::H { target: ancilla })?;
    f.apply(&mut state, Some(ancilla))?;
    state.apply(&GateOp::X { target: ancilla })?;
    prepare_phi(&mut state, ancilla)?;
    Ok(state)
}

/// `⟨f,φ| X ⊗ I^(⊗n) |f,φ⟩` for two arbitrary real states, each loaded by
/// its own controlled amplitude oracle. Equals `Re⟨f|φ⟩`.
pub fn overlap_term(f: &Statevector, phi: &Statevector) -> Result<f64> {
    if f.num_qubits() != phi.num_qubits() {
        return Err(Error::Index {
            index: phi.num_qubits(),
            num_qubits: f.num_qubits(),
        });
    }
    let f_oracle = AmplitudeOracle::new(&f.real_parts())?;
    let phi_oracle = AmplitudeOracle::new(&phi.real_parts())?;
    let state = prepare_pair(&f_oracle, |s, anc| phi_oracle.apply(s, Some(anc)))?;
    ancilla_x(&state)
}

/// Same as [`overlap_term`] with `φ` produced by the ancilla-controlled
/// ansatz circuit.
pub fn overlap_term_ansatz(f: &AmplitudeOracle, spec: &AnsatzSpec, theta: &[f64]) -> Result<f64> {
    if spec.num_qubits != f.num_qubits() {
        return Err(Error::Index {
            index: spec.num_qubits,
            num_qubits: f.num_qubits(),
        });
    }
    let gates = spec.circuit(theta)?;
    let state = prepare_pair(f, |s, anc| {
        gates.iter().try_for_each(|g| match g {
            // A controlled CNOT is a Toffoli.
            GateOp::Cnot { control, target } => s.apply(&GateOp::Mcx {
                controls: vec![*control, anc],
                target: *target,
            }),
            g => s.apply_controlled(g, anc),
        })
    })?;
    ancilla_x(&state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type CMat = DMatrix<Complex64>;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_state(m: usize, rng: &mut ChaCha8Rng) -> Statevector {
        let amps: Vec<Complex64> = (0..1 << m)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        Statevector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap()
    }

    fn random_real(m: usize, rng: &mut ChaCha8Rng) -> Statevector {
        let v: Vec<f64> = (0..1 << m).map(|_| rng.random_range(-1.0..1.0)).collect();
        Statevector::from_real(&v).unwrap()
    }

    /// Dense matrix of a gate, built column by column from basis-state
    /// bit manipulation (independent of the amplitude-pair loops).
    fn dense_gate(gate: &GateOp, m: usize) -> CMat {
        let dim = 1 << m;
        let mut u = CMat::zeros(dim, dim);
        for col in 0..dim {
            let bit = |q: usize| (col >> q) & 1;
            match gate {
                GateOp::X { target } => u[(col ^ (1 << target), col)] = c(1.0),
                GateOp::Cnot { control, target } => {
                    let row = if bit(*control) == 1 {
                        col ^ (1 << target)
                    } else {
                        col
                    };
                    u[(row, col)] = c(1.0);
                }
                GateOp::Mcx { controls, target } => {
                    let row = if controls.iter().all(|&q| bit(q) == 1) {
                        col ^ (1 << target)
                    } else {
                        col
                    };
                    u[(row, col)] = c(1.0);
                }
                GateOp::H { target } => {
                    let r = std::f64::consts::FRAC_1_SQRT_2;
                    let b = bit(*target);
                    u[(col & !(1 << target), col)] = c(r);
                    u[(col | (1 << target), col)] = c(if b == 1 { -r } else { r });
                }
                GateOp::Ry { target, angle } => {
                    let (s, co) = (angle / 2.0).sin_cos();
                    let b = bit(*target);
                    let lo = col & !(1 << target);
                    let hi = col | (1 << target);
                    if b == 0 {
                        u[(lo, col)] = c(co);
                        u[(hi, col)] = c(s);
                    } else {
                        u[(lo, col)] = c(-s);
                        u[(hi, col)] = c(co);
                    }
                }
            }
        }
        u
    }

    fn dense_circuit(gates: &[GateOp], m: usize) -> CMat {
        gates.iter().fold(CMat::identity(1 << m, 1 << m), |acc, g| {
            dense_gate(g, m) * acc
        })
    }

    fn state_vec(s: &Statevector) -> nalgebra::DVector<Complex64> {
        nalgebra::DVector::from_column_slice(s.amplitudes())
    }

    #[test]
    fn x_on_qubit_zero_flips_lowest_bit() {
        let s = apply_gate(Statevector::zero(2), &GateOp::X { target: 0 }).unwrap();
        assert_eq!(s.amplitudes()[1], c(1.0));
        let s = apply_gate(Statevector::zero(2), &GateOp::X { target: 1 }).unwrap();
        assert_eq!(s.amplitudes()[2], c(1.0));
    }

    #[test]
    fn ry_half_pi() {
        let s = apply_gate(
            Statevector::zero(1),
            &GateOp::Ry {
                target: 0,
                angle: std::f64::consts::FRAC_PI_2,
            },
        )
        .unwrap();
        let r = std::f64::consts::FRAC_PI_4;
        assert!((s.amplitudes()[0].re - r.cos()).abs() < 1e-15);
        assert!((s.amplitudes()[1].re - r.sin()).abs() < 1e-15);
    }

    #[test]
    fn gates_match_dense_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let gates = vec![
            GateOp::Cnot {
                control: 0,
                target: 2,
            },
            GateOp::Cnot {
                control: 2,
                target: 1,
            },
            GateOp::H { target: 1 },
            GateOp::X { target: 2 },
            GateOp::Ry {
                target: 0,
                angle: 0.7,
            },
            GateOp::Mcx {
                controls: vec![0, 2],
                target: 1,
            },
        ];
        for g in &gates {
            let s = random_state(3, &mut rng);
            let out = apply_gate(s.clone(), g).unwrap();
            let expected = dense_gate(g, 3) * state_vec(&s);
            let err = (state_vec(&out) - expected).camax();
            assert!(err < 1e-14, "{g:?}");
            assert!((out.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn controlled_gate_acts_on_one_branch() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_state(3, &mut rng);
        let g = GateOp::Ry {
            target: 0,
            angle: 1.1,
        };
        let mut out = s.clone();
        out.apply_controlled(&g, 2).unwrap();
        let u = dense_gate(&g, 3);
        let dim = 8;
        let cu = CMat::from_fn(dim, dim, |i, j| {
            if j & 4 != 0 {
                u[(i, j)]
            } else if i == j {
                c(1.0)
            } else {
                c(0.0)
            }
        });
        assert!((state_vec(&out) - cu * state_vec(&s)).camax() < 1e-14);
    }

    #[test]
    fn index_errors() {
        let mut s = Statevector::zero(2);
        assert!(matches!(
            s.apply(&GateOp::X { target: 2 }),
            Err(Error::Index { .. })
        ));
        assert!(s
            .apply(&GateOp::Cnot {
                control: 1,
                target: 1
            })
            .is_err());
        assert!(s
            .apply(&GateOp::Mcx {
                controls: vec![0, 5],
                target: 1
            })
            .is_err());
    }

    #[test]
    fn ansatz_zero_parameters_is_ground_state() {
        let spec = AnsatzSpec {
            num_qubits: 4,
            reps: 3,
        };
        let s = prepare_ansatz(&spec, &vec![0.0; spec.num_parameters()]).unwrap();
        assert_eq!(s, Statevector::zero(4));
    }

    #[test]
    fn ansatz_single_qubit_pi() {
        let spec = AnsatzSpec {
            num_qubits: 1,
            reps: 0,
        };
        let s = prepare_ansatz(&spec, &[std::f64::consts::PI]).unwrap();
        assert!(s.amplitudes()[0].norm() < 1e-15);
        assert!((s.amplitudes()[1].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ansatz_parameter_count_and_arity() {
        let spec = AnsatzSpec {
            num_qubits: 5,
            reps: 5,
        };
        assert_eq!(spec.num_parameters(), 30);
        assert!(matches!(
            prepare_ansatz(&spec, &[0.0; 29]),
            Err(Error::Arity {
                expected: 30,
                actual: 29
            })
        ));
    }

    #[test]
    fn ansatz_matches_dense_layers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = AnsatzSpec {
            num_qubits: 3,
            reps: 2,
        };
        for _ in 0..20 {
            let theta: Vec<f64> = (0..spec.num_parameters())
                .map(|_| rng.random_range(-3.0..3.0))
                .collect();
            let s = prepare_ansatz(&spec, &theta).unwrap();
            // Layer matrices: RY layer = kron of single-qubit rotations.
            let ry = |a: f64| {
                let (sn, co) = (a / 2.0).sin_cos();
                CMat::from_row_slice(2, 2, &[c(co), c(-sn), c(sn), c(co)])
            };
            let layer = |l: usize| {
                (0..3).rev().fold(CMat::identity(1, 1), |acc, q| {
                    acc.kronecker(&ry(theta[l * 3 + q]))
                })
            };
            let chain = dense_gate(
                &GateOp::Cnot {
                    control: 1,
                    target: 2,
                },
                3,
            ) * dense_gate(
                &GateOp::Cnot {
                    control: 0,
                    target: 1,
                },
                3,
            );
            let mut u = layer(0);
            for l in 1..=2 {
                u = layer(l) * &chain * u;
            }
            let expected = u.column(0).into_owned();
            assert!((state_vec(&s) - expected).camax() < 1e-12);
            assert!(s.max_imag() <= 1e-12);
        }
    }

    #[test]
    fn increment_two_qubits() {
        let gates = shift_circuit(2);
        for (input, output) in [(3usize, 0usize), (0, 1), (1, 2), (2, 3)] {
            let mut s = Statevector::from_real(
                &(0..4)
                    .map(|i| (i == input) as u8 as f64)
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            s.apply_all(&gates).unwrap();
            assert_eq!(s.amplitudes()[output], c(1.0));
        }
    }

    #[test]
    fn increment_matches_cyclic_permutation() {
        for m in 1..=5 {
            let dim = 1 << m;
            let u = dense_circuit(&shift_circuit(m), m);
            let p = CMat::from_fn(
                dim,
                dim,
                |i, j| if i == (j + 1) % dim { c(1.0) } else { c(0.0) },
            );
            assert_eq!(u, p, "m={m}");
        }
        // paper layout for m = 4: MCX(0,1,2 -> 3), MCX(0,1 -> 2), CNOT(0 -> 1), X(0)
        assert_eq!(
            shift_circuit(4),
            vec![
                GateOp::Mcx {
                    controls: vec![0, 1, 2],
                    target: 3
                },
                GateOp::Mcx {
                    controls: vec![0, 1],
                    target: 2
                },
                GateOp::Cnot {
                    control: 0,
                    target: 1
                },
                GateOp::X { target: 0 },
            ]
        );
    }

    #[test]
    fn shift_by_matches_permutations() {
        for m in 2..=4 {
            let dim = 1 << m;
            let twice = dense_circuit(&[shift_circuit(m), shift_circuit(m)].concat(), m);
            for shift in 0..5 {
                let u = dense_circuit(&shift_by(shift, m), m);
                let p = CMat::from_fn(dim, dim, |i, j| {
                    if i == (j + shift) % dim {
                        c(1.0)
                    } else {
                        c(0.0)
                    }
                });
                assert_eq!(u, p, "m={m} shift={shift}");
                if shift == 2 {
                    assert_eq!(u, twice);
                }
            }
        }
    }

    #[test]
    fn expectation_basics() {
        assert_eq!(
            expectation_pauli(&Statevector::zero(1), &"Z".parse().unwrap()).unwrap(),
            1.0
        );
        let s = Statevector::zero(2);
        let s3 = Statevector::zero(3);
        assert_eq!(
            expectation(&s3, Prefix::ZeroProjector, &"II".parse().unwrap()).unwrap(),
            1.0
        );
        assert_eq!(
            expectation(&s, Prefix::ZeroProjector, &"II".parse().unwrap()).unwrap(),
            1.0
        );
    }

    #[test]
    fn expectation_matches_dense_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m = 4;
        let dim = 1 << m;
        for prefix in [
            Prefix::Identity,
            Prefix::ZeroProjector,
            Prefix::OneProjector,
        ] {
            for tail in ["YY", "XZ", "ZX", "XY", "II"] {
                let tail: PauliString = tail.parse().unwrap();
                let proj = match prefix {
                    Prefix::Identity => CMat::identity(4, 4),
                    Prefix::ZeroProjector => {
                        CMat::from_fn(4, 4, |i, j| if i == 0 && j == 0 { c(1.0) } else { c(0.0) })
                    }
                    Prefix::OneProjector => {
                        CMat::from_fn(4, 4, |i, j| if i == 3 && j == 3 { c(1.0) } else { c(0.0) })
                    }
                };
                let op = proj.kronecker(&tail.to_dense());
                assert_eq!(op.nrows(), dim);
                for _ in 0..5 {
                    let s = random_state(m, &mut rng);
                    let v = state_vec(&s);
                    let expected = (v.adjoint() * &op * &v)[(0, 0)];
                    let got = expectation(&s, prefix, &tail).unwrap();
                    assert!((got - expected.re).abs() < 1e-12);
                    assert!(expected.im.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn shifted_expectation_identity() {
        // ⟨φ|S⁻¹ O S|φ⟩ = ⟨Sφ|O|Sφ⟩
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let m = 4;
        let dim = 1 << m;
        let tail: PauliString = "XZ".parse().unwrap();
        let o = CMat::identity(4, 4).kronecker(&tail.to_dense());
        let p = CMat::from_fn(
            dim,
            dim,
            |i, j| if i == (j + 2) % dim { c(1.0) } else { c(0.0) },
        );
        let conj = p.transpose() * o * &p;
        for _ in 0..10 {
            let phi = random_real(m, &mut rng);
            let mut psi = phi.clone();
            psi.apply_all(&shift_by(2, m)).unwrap();
            let v = state_vec(&phi);
            let expected = (v.adjoint() * &conj * &v)[(0, 0)].re;
            assert!((expectation(&psi, Prefix::Identity, &tail).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_maps_ground_state_to_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for m in 1..=4 {
            let f = random_real(m, &mut rng);
            let oracle = AmplitudeOracle::new(&f.real_parts()).unwrap();
            let mut s = Statevector::zero(m);
            oracle.apply(&mut s, None).unwrap();
            assert!((state_vec(&s) - state_vec(&f)).camax() < 1e-14);
        }
        // target already |0⟩ and its negative
        for sign in [1.0, -1.0] {
            let oracle = AmplitudeOracle::new(&[sign, 0.0, 0.0, 0.0]).unwrap();
            let mut s = Statevector::zero(2);
            oracle.apply(&mut s, None).unwrap();
            assert!((s.amplitudes()[0].re - sign).abs() < 1e-15);
        }
    }

    #[test]
    fn pair_state_matches_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 3;
        let f = random_real(n, &mut rng);
        let phi = random_real(n, &mut rng);
        let fo = AmplitudeOracle::new(&f.real_parts()).unwrap();
        let po = AmplitudeOracle::new(&phi.real_parts()).unwrap();
        let state = prepare_pair(&fo, |s, a| po.apply(s, Some(a))).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..1 << n {
            assert!((state.amplitudes()[i].re - r * f.amplitudes()[i].re).abs() < 1e-14);
            assert!(
                (state.amplitudes()[(1 << n) + i].re - r * phi.amplitudes()[i].re).abs() < 1e-14
            );
        }
    }

    #[test]
    fn overlap_cases() {
        let f = Statevector::from_real(&[1.0, 2.0, -1.0, 0.5]).unwrap();
        assert!((overlap_term(&f, &f).unwrap() - 1.0).abs() < 1e-12);
        let a = Statevector::from_real(&[1.0, 1.0, 0.0, 0.0]).unwrap();
        let b = Statevector::from_real(&[1.0, -1.0, 0.0, 0.0]).unwrap();
        assert!(overlap_term(&a, &b).unwrap().abs() < 1e-12);
        assert!(overlap_term(&a, &Statevector::zero(3)).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for m in 1..=5 {
            let f = random_real(m, &mut rng);
            let phi = random_real(m, &mut rng);
            let direct = f.inner(&phi).re;
            assert!((overlap_term(&f, &phi).unwrap() - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn controlled_ansatz_overlap_matches_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for n in 1..=4 {
            let spec = AnsatzSpec {
                num_qubits: n,
                reps: 2,
            };
            let f = random_real(n, &mut rng);
            let oracle = AmplitudeOracle::new(&f.real_parts()).unwrap();
            for _ in 0..5 {
                let theta: Vec<f64> = (0..spec.num_parameters())
                    .map(|_| rng.random_range(-3.0..3.0))
                    .collect();
                let phi = prepare_ansatz(&spec, &theta).unwrap();
                let got = overlap_term_ansatz(&oracle, &spec, &theta).unwrap();
                assert!((got - f.inner(&phi).re).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn long_sequences_preserve_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let mut s = random_state(4, &mut rng);
        for _ in 0..10_000 {
            let g = match rng.random_range(0..5) {
                0 => GateOp::Ry {
                    target: rng.random_range(0..4),
                    angle: rng.random_range(-3.0..3.0),
                },
                1 => GateOp::H {
                    target: rng.random_range(0..4),
                },
                2 => GateOp::X {
                    target: rng.random_range(0..4),
                },
                3 => GateOp::Cnot {
                    control: 0,
                    target: rng.random_range(1..4),
                },
                _ => GateOp::Mcx {
                    controls: vec![3, 1],
                    target: 0,
                },
            };
            s.apply(&g).unwrap();
        }
        assert!((s.norm() - 1.0).abs() < 1e-10);
    }
}
