//! Structured Pauli representation of the beam stiffness matrix.
//!
//! The element matrix occupies the two least significant qubits. The global
//! open-chain matrix is
//!
//! ```text
//! K = I^(n-2) ⊗ Ke  +  S⁻¹ (I^(n-2) ⊗ Ke) S  -  S⁻¹ (I0^(n-2) ⊗ Ke) S
//! ```
//!
//! where `S|i⟩ = |i + 2 mod 2^n⟩`. The second block row covers the odd
//! elements (wrapping around the corner), the third removes the spurious
//! wraparound element. Periodic beams keep it and drop the third group.
//! Each group uses the same six element terms, so the term count does not
//! depend on `n`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::beam::{BcSpec, BeamProblem, DenseOperator, ElementMatrix};
use crate::error::{Error, Result};

/// Shift applied to the odd-element and wraparound groups.
pub const ELEMENT_SHIFT: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    /// `(flips, phase)` such that `P|bit⟩ = phase |bit ^ flips⟩`.
    #[inline]
    pub fn act(self, bit: bool) -> (bool, Complex64) {
        let one = Complex64::new(1.0, 0.0);
        match self {
            Pauli::I => (false, one),
            Pauli::X => (true, one),
            Pauli::Z => (false, if bit { -one } else { one }),
            // Y = iXZ: Y|0⟩ = i|1⟩, Y|1⟩ = -i|0⟩
            Pauli::Y => (
                true,
                if bit {
                    Complex64::new(0.0, -1.0)
                } else {
                    Complex64::new(0.0, 1.0)
                },
            ),
        }
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis. `factors[0]` acts on the most
/// significant qubit of the string.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    factors: Vec<Pauli>,
}

impl PauliString {
    pub fn new(factors: Vec<Pauli>) -> PauliString {
        PauliString { factors }
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> &[Pauli] {
        &self.factors
    }

    /// Factor acting on qubit `q`, where qubit 0 is the least significant.
    pub fn on_qubit(&self, q: usize) -> Pauli {
        self.factors[self.factors.len() - 1 - q]
    }

    /// Bit mask of the positions flipped by X and Y factors.
    pub fn flip_mask(&self) -> usize {
        (0..self.len())
            .filter(|&q| matches!(self.on_qubit(q), Pauli::X | Pauli::Y))
            .fold(0, |m, q| m | (1 << q))
    }

    /// `P|index⟩ = phase |target⟩`.
    pub fn act(&self, index: usize) -> (usize, Complex64) {
        let mut target = index;
        let mut phase = Complex64::new(1.0, 0.0);
        for q in 0..self.len() {
            let (flip, ph) = self.on_qubit(q).act((index >> q) & 1 == 1);
            if flip {
                target ^= 1 << q;
            }
            phase *= ph;
        }
        (target, phase)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.len();
        let mut m = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let (row, phase) = self.act(col);
            m[(row, col)] = phase;
        }
        m
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<PauliString> {
        s.chars()
            .map(|c| match c {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::Domain(format!("invalid Pauli symbol {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString::new)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.factors
            .iter()
            .try_for_each(|p| write!(f, "{}", p.symbol()))
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Operator on the qubits above a term's tail.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prefix {
    /// `I^(⊗k)`
    Identity,
    /// `|0⟩⟨0|^(⊗k)`
    ZeroProjector,
    /// `|1⟩⟨1|^(⊗k)`
    OneProjector,
}

impl Prefix {
    /// Matrix element `⟨row|prefix|col⟩` on `width` qubits (0 or 1).
    #[inline]
    pub fn element(self, row: usize, col: usize, width: usize) -> f64 {
        let all_ones = (1usize << width) - 1;
        let hit = match self {
            Prefix::Identity => row == col,
            Prefix::ZeroProjector => row == 0 && col == 0,
            Prefix::OneProjector => row == all_ones && col == all_ones,
        };
        if hit {
            1.0
        } else {
            0.0
        }
    }

    /// Whether a basis state with upper bits `upper` lies in the support.
    #[inline]
    pub fn admits(self, upper: usize, width: usize) -> bool {
        match self {
            Prefix::Identity => true,
            Prefix::ZeroProjector => upper == 0,
            Prefix::OneProjector => upper == (1usize << width) - 1,
        }
    }
}

/// `sign * coefficient * S⁻ᵏ (prefix ⊗ tail) Sᵏ` with `S|i⟩ = |i + 1 mod 2^n⟩`
/// and `k = shift`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructuredTerm {
    pub coefficient: f64,
    pub prefix: Prefix,
    pub tail: PauliString,
    pub shift: usize,
    /// +1 or -1.
    pub sign: i8,
}

impl StructuredTerm {
    pub fn weight(&self) -> f64 {
        f64::from(self.sign) * self.coefficient
    }

    /// Tail matrix element; real part only, which is exact for tails with
    /// an even number of Y factors.
    fn tail_entry(&self, row: usize, col: usize) -> f64 {
        let (target, phase) = self.tail.act(col);
        if target == row {
            phase.re
        } else {
            0.0
        }
    }

    /// Matrix element `(row, col)` on an `n`-qubit register.
    pub fn entry(&self, row: usize, col: usize, num_qubits: usize) -> f64 {
        let dim = 1usize << num_qubits;
        let width = num_qubits - self.tail.len();
        let r = (row + self.shift) % dim;
        let c = (col + self.shift) % dim;
        let t = self.tail.len();
        let (ur, uc) = (r >> t, c >> t);
        let prefix_ok = match self.prefix {
            Prefix::Identity => ur == uc,
            p => p.admits(ur, width) && p.admits(uc, width),
        };
        if !prefix_ok {
            return 0.0;
        }
        let mask = (1usize << t) - 1;
        self.weight() * self.tail_entry(r & mask, c & mask)
    }
}

/// A zeroed off-diagonal coupling `(p, q)`, `p < q`, with the
/// entry that `K_bc` holds there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BcPair {
    pub p: usize,
    pub q: usize,
    pub coefficient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructuredOperator {
    pub num_qubits: usize,
    pub terms: Vec<StructuredTerm>,
    pub bc_pairs: Vec<BcPair>,
}

impl StructuredOperator {
    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    /// Entry of the structured (unconstrained) stiffness.
    pub fn bulk_entry(&self, row: usize, col: usize) -> f64 {
        self.terms
            .iter()
            .map(|t| t.entry(row, col, self.num_qubits))
            .sum()
    }

    /// Dense `Σ terms` (no boundary correction).
    pub fn bulk_dense(&self) -> DenseOperator {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for t in &self.terms {
            m += materialize(t, self.num_qubits).0;
        }
        DenseOperator(m)
    }

    /// Dense `K_bc` rebuilt from the pair list.
    pub fn bc_dense(&self) -> DenseOperator {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for pair in &self.bc_pairs {
            m[(pair.p, pair.q)] += pair.coefficient;
            m[(pair.q, pair.p)] += pair.coefficient;
        }
        DenseOperator(m)
    }

    /// Dense `K_mod = Σ terms + K_bc`.
    pub fn to_dense(&self) -> DenseOperator {
        DenseOperator(self.bulk_dense().0 + self.bc_dense().0)
    }

    /// Negates the projector-prefixed group. Only used as a negative control
    /// for the verification suite.
    pub fn flip_projector_sign(&mut self) {
        for t in &mut self.terms {
            if t.prefix == Prefix::ZeroProjector {
                t.sign = -t.sign;
            }
        }
    }
}

/// The six two-qubit Paulis spanning the beam element family.
pub const ELEMENT_BASIS: [&str; 6] = ["II", "IZ", "XI", "XZ", "YY", "ZX"];

/// Projects `Ke` onto [`ELEMENT_BASIS`] via `c = Tr(Ke P) / 4`.
pub fn decompose_element(ke: &ElementMatrix) -> Result<Vec<(f64, PauliString)>> {
    let basis: Vec<PauliString> = ELEMENT_BASIS
        .iter()
        .map(|s| s.parse().expect("static basis"))
        .collect();
    let mut terms = Vec::with_capacity(6);
    let mut rebuilt = [[0.0f64; 4]; 4];
    for p in basis {
        let dense = p.to_dense();
        let mut trace = Complex64::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                trace += ke.get(i, j) * dense[(j, i)];
            }
        }
        let c = trace.re / 4.0;
        for (i, row) in rebuilt.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v += c * dense[(i, j)].re;
            }
        }
        terms.push((c, p));
    }
    let scale = ke.0.amax().max(1.0);
    let mut residual = 0.0f64;
    for (i, row) in rebuilt.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            residual = residual.max((v - ke.get(i, j)).abs());
        }
    }
    if residual > 1e-10 * scale {
        return Err(Error::DecompositionResidual { residual });
    }
    Ok(terms)
}

/// Builds the structured stiffness of `problem` and the set-to-zero
/// correction for `bc`.
pub fn build_structured(problem: &BeamProblem, bc: &BcSpec) -> Result<StructuredOperator> {
    problem.validate()?;
    let n = problem.num_qubits;
    let element = decompose_element(&problem.element_stiffness()?)?;

    let mut groups: Vec<(Prefix, usize, i8)> = vec![
        (Prefix::Identity, 0, 1),
        (Prefix::Identity, ELEMENT_SHIFT, 1),
    ];
    if !problem.boundary_case.is_periodic() {
        groups.push((Prefix::ZeroProjector, ELEMENT_SHIFT, -1));
    }

    let terms = groups
        .into_iter()
        .flat_map(|(prefix, shift, sign)| {
            element.iter().map(move |(c, tail)| StructuredTerm {
                coefficient: *c,
                prefix,
                tail: tail.clone(),
                shift,
                sign,
            })
        })
        .collect();

    let mut op = StructuredOperator {
        num_qubits: n,
        terms,
        bc_pairs: Vec::new(),
    };
    op.bc_pairs = bc_pairs(&op, bc);
    Ok(op)
}

fn bc_pairs(op: &StructuredOperator, bc: &BcSpec) -> Vec<BcPair> {
    let dim = op.dim();
    let mut pairs = Vec::new();
    for p in 0..dim {
        for q in p + 1..dim {
            if !(bc.contains(p) || bc.contains(q)) {
                continue;
            }
            let k = op.bulk_entry(p, q);
            if k != 0.0 {
                pairs.push(BcPair {
                    p,
                    q,
                    coefficient: -k,
                });
            }
        }
    }
    pairs
}

/// Explicit `2^n x 2^n` matrix of one term.
pub fn materialize(term: &StructuredTerm, num_qubits: usize) -> DenseOperator {
    let dim = 1usize << num_qubits;
    DenseOperator(DMatrix::from_fn(dim, dim, |i, j| {
        term.entry(i, j, num_qubits)
    }))
}
