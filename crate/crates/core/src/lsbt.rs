//! Least significant bit transformation.
//!
//! A symmetric matrix `K_pq` with ones at `(p, q)` and `(q, p)` is not a
//! Pauli observable, but a permutation `T` built from X and CNOT gates
//! satisfies `Tᵀ K_pq T = I1^(⊗(n-1)) ⊗ X` whenever `T` sends the pair
//! `{2^n - 2, 2^n - 1}` onto `{p, q}`. Then
//! `⟨φ|K_pq|φ⟩ = ⟨φ'|I1^(⊗(n-1)) ⊗ X|φ'⟩` with `φ' = Tᵀ φ`.
//!
//! Gate order convention: a sequence `[G0, G1, ..., Gm]` denotes
//! `T = G0 G1 ... Gm`, so `φ'` is obtained by applying `G0` first and `Gm`
//! last. Walking the pair `{p, q}` through the gates in the same order lands
//! it on `{2^n - 2, 2^n - 1}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pauli::{BcPair, PauliString, Prefix};
use crate::statevector::{expectation, GateOp, Statevector};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LsbtSequence {
    pub gates: Vec<GateOp>,
    pub num_qubits: usize,
}

impl LsbtSequence {
    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Image of basis state `index` under `Tᵀ` (gates applied in order).
    pub fn forward(&self, index: usize) -> usize {
        self.gates.iter().fold(index, |i, g| permute_basis(g, i))
    }

    /// Image of basis state `index` under `T` (gates applied in reverse).
    pub fn image(&self, index: usize) -> usize {
        self.gates
            .iter()
            .rev()
            .fold(index, |i, g| permute_basis(g, i))
    }

    /// `φ' = Tᵀ φ`.
    pub fn transform(&self, phi: &Statevector) -> Result<Statevector> {
        let mut out = phi.clone();
        out.apply_all(&self.gates)?;
        Ok(out)
    }
}

fn permute_basis(gate: &GateOp, index: usize) -> usize {
    match *gate {
        GateOp::X { target } => index ^ (1 << target),
        GateOp::Cnot { control, target } => {
            if index >> control & 1 == 1 {
                index ^ (1 << target)
            } else {
                index
            }
        }
        _ => unreachable!("LSBT sequences hold only X and CNOT"),
    }
}

/// Ordering used to pick between equally long candidates: lower CNOT
/// controls first, then lower X targets.
fn tie_break_key(gates: &[GateOp]) -> (usize, Vec<usize>, Vec<usize>) {
    let mut controls = Vec::new();
    let mut x_targets = Vec::new();
    for g in gates {
        match *g {
            GateOp::Cnot { control, .. } => controls.push(control),
            GateOp::X { target } => x_targets.push(target),
            _ => {}
        }
    }
    x_targets.sort_unstable();
    (gates.len(), controls, x_targets)
}

fn bits(mask: usize) -> impl Iterator<Item = usize> {
    (0..usize::BITS as usize).filter(move |b| mask >> b & 1 == 1)
}

/// One construction: optional X pre-flips, CNOTs from `pivot` merging the
/// remaining differing bits, a CNOT pair moving the difference from `pivot`
/// down to bit 0, and X gates raising every common upper bit to 1.
fn construct(p: usize, q: usize, n: usize, pivot: usize, preflips: &[usize]) -> Vec<GateOp> {
    let mut gates = Vec::new();
    let mut pair = [p, q];
    let mut push = |g: GateOp, pair: &mut [usize; 2]| {
        pair[0] = permute_basis(&g, pair[0]);
        pair[1] = permute_basis(&g, pair[1]);
        gates.push(g);
    };
    for &t in preflips {
        push(GateOp::X { target: t }, &mut pair);
    }
    let diff = pair[0] ^ pair[1];
    for j in bits(diff).filter(|&j| j != pivot) {
        push(
            GateOp::Cnot {
                control: pivot,
                target: j,
            },
            &mut pair,
        );
    }
    if pivot != 0 {
        push(
            GateOp::Cnot {
                control: pivot,
                target: 0,
            },
            &mut pair,
        );
        push(
            GateOp::Cnot {
                control: 0,
                target: pivot,
            },
            &mut pair,
        );
    }
    debug_assert_eq!(pair[0] ^ pair[1], 1);
    for j in 1..n {
        if pair[0] >> j & 1 == 0 {
            push(GateOp::X { target: j }, &mut pair);
        }
    }
    gates
}

/// Shortest X/CNOT sequence (among the constructions above) whose `T` maps
/// `{2^n - 2, 2^n - 1}` onto `{p, q}`.
pub fn derive_sequence(p: usize, q: usize, num_qubits: usize) -> Result<LsbtSequence> {
    let dim = 1usize << num_qubits;
    if num_qubits == 0 || p >= q || q >= dim {
        return Err(Error::Domain(format!(
            "LSBT needs 0 <= p < q < 2^n, got p={p}, q={q}, n={num_qubits}"
        )));
    }
    let diff = p ^ q;
    let pivots: Vec<usize> = if diff & 1 == 1 {
        vec![0]
    } else {
        bits(diff).collect()
    };
    let mut best: Option<Vec<GateOp>> = None;
    for &pivot in &pivots {
        let mut flip_sets: Vec<Vec<usize>> = vec![vec![], vec![pivot]];
        if pivot != 0 {
            flip_sets.push(vec![0]);
            flip_sets.push(vec![0, pivot]);
        }
        for flips in &flip_sets {
            let gates = construct(p, q, num_qubits, pivot, flips);
            if best
                .as_ref()
                .is_none_or(|b| tie_break_key(&gates) < tie_break_key(b))
            {
                best = Some(gates);
            }
        }
    }
    Ok(LsbtSequence {
        gates: best.expect("at least one candidate"),
        num_qubits,
    })
}

/// `I1^(⊗(n-1)) ⊗ X`
pub fn transformed_observable() -> (Prefix, PauliString) {
    (
        Prefix::OneProjector,
        PauliString::new(vec![crate::pauli::Pauli::X]),
    )
}

fn measure_transformed(
    sequence: &LsbtSequence,
    phi: &Statevector,
    coefficient: f64,
) -> Result<f64> {
    let transformed = sequence.transform(phi)?;
    let (prefix, tail) = transformed_observable();
    Ok(coefficient * expectation(&transformed, prefix, &tail)?)
}

/// `c ⟨φ|K_pq|φ⟩` evaluated through the transformed observable.
pub fn expectation_kpq(phi: &Statevector, p: usize, q: usize, coefficient: f64) -> Result<f64> {
    let sequence = derive_sequence(p, q, phi.num_qubits())?;
    measure_transformed(&sequence, phi, coefficient)
}

/// Boundary correction `⟨φ|K_bc|φ⟩` with one precomputed sequence per pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BcObservable {
    pub terms: Vec<(LsbtSequence, f64)>,
}

impl BcObservable {
    pub fn new(pairs: &[BcPair], num_qubits: usize) -> Result<BcObservable> {
        let terms = pairs
            .iter()
            .map(|pair| {
                Ok((
                    derive_sequence(pair.p, pair.q, num_qubits)?,
                    pair.coefficient,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BcObservable { terms })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn expectation(&self, phi: &Statevector) -> Result<f64> {
        self.terms
            .iter()
            .map(|(seq, c)| measure_transformed(seq, phi, *c))
            .sum()
    }
}

pub fn expectation_kbc(phi: &Statevector, pairs: &[BcPair]) -> Result<f64> {
    BcObservable::new(pairs, phi.num_qubits())?.expectation(phi)
}
