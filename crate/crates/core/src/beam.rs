//! Finite element layer for the Euler-Bernoulli beam.
//!
//! Every node carries two DOFs, deflection at `2k` and rotation at `2k + 1`.
//! A register of `n` qubits holds `N = 2^n` DOFs, i.e. `N / 2` nodes.

use nalgebra::{DMatrix, DVector, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pivot threshold (relative to the largest diagonal entry) below which a
/// Cholesky factor is treated as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCase {
    /// Periodic beam, anchored at DOF 0 to remove the rigid translation.
    Pbc,
    /// Simply supported: both end deflections pinned.
    Ssb,
    /// Fixed-fixed: deflection and rotation clamped at both ends.
    Ffb,
    /// Clamped at node 0, free at the last node.
    Cantilever,
}

impl BoundaryCase {
    pub const ALL: [BoundaryCase; 4] = [
        BoundaryCase::Pbc,
        BoundaryCase::Ssb,
        BoundaryCase::Ffb,
        BoundaryCase::Cantilever,
    ];

    pub fn is_periodic(self) -> bool {
        matches!(self, BoundaryCase::Pbc)
    }

    pub fn label(self) -> &'static str {
        match self {
            BoundaryCase::Pbc => "PBC",
            BoundaryCase::Ssb => "SSB",
            BoundaryCase::Ffb => "FFB",
            BoundaryCase::Cantilever => "Cantilever",
        }
    }
}

/// How the right-hand side is described before boundary zeroing and
/// normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LoadKind {
    /// Unit force on a single DOF.
    PointForce { dof_index: usize },
    /// Arbitrary nodal force vector of length `N`.
    Custom(Vec<f64>),
}

impl LoadKind {
    /// Load used for each boundary case when the configuration does not
    /// supply one.
    ///
    /// Cantilever: unit tip force. SSB/FFB: unit force at the deflection DOF
    /// of node `nodes / 2`. PBC: +1 at node 0 and -1 at node `nodes / 2`; the
    /// +1 sits on the anchored DOF and acts as the support reaction.
    pub fn default_for(case: BoundaryCase, num_dofs: usize) -> LoadKind {
        let mid = num_dofs / 2;
        match case {
            BoundaryCase::Cantilever => LoadKind::PointForce {
                dof_index: num_dofs - 2,
            },
            BoundaryCase::Ssb | BoundaryCase::Ffb => LoadKind::PointForce { dof_index: mid },
            BoundaryCase::Pbc => {
                let mut v = vec![0.0; num_dofs];
                v[0] = 1.0;
                v[mid] -= 1.0;
                LoadKind::Custom(v)
            }
        }
    }

    fn raw_vector(&self, num_dofs: usize) -> Result<Vec<f64>> {
        match self {
            LoadKind::PointForce { dof_index } => {
                if *dof_index >= num_dofs {
                    return Err(Error::Domain(format!(
                        "point force DOF {dof_index} outside [0, {num_dofs})"
                    )));
                }
                let mut v = vec![0.0; num_dofs];
                v[*dof_index] = 1.0;
                Ok(v)
            }
            LoadKind::Custom(values) => {
                if values.len() != num_dofs {
                    return Err(Error::Domain(format!(
                        "custom load has {} entries, expected {num_dofs}",
                        values.len()
                    )));
                }
                if values.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Domain(
                        "custom load contains non-finite entries".into(),
                    ));
                }
                Ok(values.clone())
            }
        }
    }
}

/// Unit-norm load vector with constrained entries removed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoadSpec {
    pub kind: LoadKind,
    /// Normalized vector, `‖vector‖ = 1`.
    pub vector: Vec<f64>,
    /// 2-norm removed during normalization; physical load = scale * vector.
    pub normalization_scale: f64,
}

impl LoadSpec {
    pub fn new(kind: LoadKind, num_dofs: usize, bc: &BcSpec) -> Result<LoadSpec> {
        let mut v = kind.raw_vector(num_dofs)?;
        for &d in bc.constrained_dofs() {
            v[d] = 0.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Domain(
                "load vector is zero after removing constrained DOFs".into(),
            ));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(LoadSpec {
            kind,
            vector: v,
            normalization_scale: norm,
        })
    }

    pub fn len(&self) -> usize {
        self.vector.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vector.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamProblem {
    /// Beam length in meters.
    pub length: f64,
    /// Young's modulus in pascals.
    pub youngs_modulus: f64,
    /// Second moment of area.
    pub second_moment: f64,
    pub num_qubits: usize,
    pub boundary_case: BoundaryCase,
    /// `None` selects [`LoadKind::default_for`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load: Option<LoadKind>,
}

impl BeamProblem {
    /// Five qubits, 10 m beam, E = 1000 Pa, I = 1, default load.
    pub fn reference_setup(case: BoundaryCase) -> BeamProblem {
        BeamProblem {
            length: 10.0,
            youngs_modulus: 1000.0,
            second_moment: 1.0,
            num_qubits: 5,
            boundary_case: case,
            load: None,
        }
    }

    pub fn with_qubits(mut self, num_qubits: usize) -> BeamProblem {
        self.num_qubits = num_qubits;
        self
    }

    pub fn num_dofs(&self) -> usize {
        1usize << self.num_qubits
    }

    pub fn num_nodes(&self) -> usize {
        self.num_dofs() / 2
    }

    pub fn num_elements(&self) -> usize {
        if self.boundary_case.is_periodic() {
            self.num_nodes()
        } else {
            self.num_nodes() - 1
        }
    }

    pub fn element_length(&self) -> f64 {
        self.length / self.num_elements() as f64
    }

    /// Structural checks. `n = 2` is accepted here; callers that need a
    /// non-degenerate mesh enforce `n >= 3` themselves.
    pub fn validate(&self) -> Result<()> {
        if self.num_qubits < 2 || self.num_qubits > 16 {
            return Err(Error::Domain(format!(
                "num_qubits must lie in [2, 16], got {}",
                self.num_qubits
            )));
        }
        for (name, value) in [
            ("length", self.length),
            ("youngs_modulus", self.youngs_modulus),
            ("second_moment", self.second_moment),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Domain(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        Ok(())
    }

    pub fn bc_spec(&self) -> BcSpec {
        BcSpec::for_case(self.boundary_case, self.num_dofs())
    }

    pub fn load_kind(&self) -> LoadKind {
        self.load
            .clone()
            .unwrap_or_else(|| LoadKind::default_for(self.boundary_case, self.num_dofs()))
    }

    pub fn load_spec(&self) -> Result<LoadSpec> {
        LoadSpec::new(self.load_kind(), self.num_dofs(), &self.bc_spec())
    }

    pub fn element_stiffness(&self) -> Result<ElementMatrix> {
        element_stiffness(
            self.youngs_modulus,
            self.second_moment,
            self.element_length(),
        )
    }
}

/// Sorted, duplicate-free list of constrained DOFs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BcSpec {
    constrained: Vec<usize>,
}

impl BcSpec {
    pub fn new(mut dofs: Vec<usize>) -> BcSpec {
        dofs.sort_unstable();
        dofs.dedup();
        BcSpec { constrained: dofs }
    }

    pub fn for_case(case: BoundaryCase, num_dofs: usize) -> BcSpec {
        let last = num_dofs - 2;
        match case {
            BoundaryCase::Cantilever => BcSpec::new(vec![0, 1]),
            BoundaryCase::Ssb => BcSpec::new(vec![0, last]),
            BoundaryCase::Ffb => BcSpec::new(vec![0, 1, last, last + 1]),
            BoundaryCase::Pbc => BcSpec::new(vec![0]),
        }
    }

    pub fn constrained_dofs(&self) -> &[usize] {
        &self.constrained
    }

    pub fn contains(&self, dof: usize) -> bool {
        self.constrained.binary_search(&dof).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.constrained.is_empty()
    }

    /// Constrained DOFs grouped by node.
    pub fn constrained_nodes(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = self.constrained.iter().map(|d| d / 2).collect();
        nodes.dedup();
        nodes
    }
}

/// 4x4 Hermite-cubic bending stiffness of one element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementMatrix(pub Matrix4<f64>);

impl ElementMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

/// Dense square real matrix over the DOF space.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator(pub DMatrix<f64>);

impl DenseOperator {
    pub fn zeros(dim: usize) -> DenseOperator {
        DenseOperator(DMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn max_abs_diff(&self, other: &DenseOperator) -> f64 {
        (&self.0 - &other.0).amax()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (&self.0 - self.0.transpose()).amax() <= tol
    }

    /// `vᵀ A v` for a real vector.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let v = DVector::from_column_slice(v);
        v.dot(&(&self.0 * &v))
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(v);
        (&self.0 * v).iter().copied().collect()
    }
}

pub fn element_stiffness(
    youngs_modulus: f64,
    second_moment: f64,
    element_length: f64,
) -> Result<ElementMatrix> {
    for (name, value) in [
        ("E", youngs_modulus),
        ("I", second_moment),
        ("l_e", element_length),
    ] {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Domain(format!(
                "{name} must be positive, got {value}"
            )));
        }
    }
    let ei = youngs_modulus * second_moment;
    let l = element_length;
    let a = 12.0 * ei / (l * l * l);
    let b = 6.0 * ei / (l * l);
    let c = 4.0 * ei / l;
    let d = 2.0 * ei / l;
    #[rustfmt::skip]
    let k = Matrix4::new(
         a,  b, -a,  b,
         b,  c, -b,  d,
        -a, -b,  a, -b,
         b,  d, -b,  c,
    );
    Ok(ElementMatrix(k))
}

fn add_element(k: &mut DMatrix<f64>, ke: &ElementMatrix, dofs: [usize; 4]) {
    for (a, &i) in dofs.iter().enumerate() {
        for (b, &j) in dofs.iter().enumerate() {
            k[(i, j)] += ke.get(a, b);
        }
    }
}

/// Open-chain assembly: element `e` couples nodes `e` and `e + 1`.
pub fn assemble_open(problem: &BeamProblem) -> Result<DenseOperator> {
    problem.validate()?;
    let ke = element_stiffness(
        problem.youngs_modulus,
        problem.second_moment,
        problem.length / (problem.num_nodes() - 1) as f64,
    )?;
    let n = problem.num_dofs();
    let mut k = DMatrix::zeros(n, n);
    for e in 0..problem.num_nodes() - 1 {
        let s = 2 * e;
        add_element(&mut k, &ke, [s, s + 1, s + 2, s + 3]);
    }
    Ok(DenseOperator(k))
}

/// Periodic assembly: the open chain plus an element joining the last node
/// back to node 0.
pub fn assemble_periodic(problem: &BeamProblem) -> Result<DenseOperator> {
    problem.validate()?;
    if !problem.boundary_case.is_periodic() {
        return Err(Error::Domain(
            "periodic assembly requested for a non-periodic boundary case".into(),
        ));
    }
    let ke = problem.element_stiffness()?;
    let n = problem.num_dofs();
    let mut k = DMatrix::zeros(n, n);
    for e in 0..problem.num_nodes() {
        let s = 2 * e;
        add_element(&mut k, &ke, [s, s + 1, (s + 2) % n, (s + 3) % n]);
    }
    Ok(DenseOperator(k))
}

/// Assembles open or periodic according to the boundary case.
pub fn assemble(problem: &BeamProblem) -> Result<DenseOperator> {
    if problem.boundary_case.is_periodic() {
        assemble_periodic(problem)
    } else {
        assemble_open(problem)
    }
}

/// Zeroes every off-diagonal entry in the constrained rows and columns.
///
/// Returns `(K_mod, K_bc)` with `K_mod = K + K_bc`; diagonals are untouched,
/// so `K_bc` has a zero diagonal.
pub fn set_to_zero(k: &DenseOperator, bc: &BcSpec) -> (DenseOperator, DenseOperator) {
    let n = k.dim();
    let mut k_mod = k.0.clone();
    for &p in bc.constrained_dofs() {
        for q in 0..n {
            if q != p {
                k_mod[(p, q)] = 0.0;
                k_mod[(q, p)] = 0.0;
            }
        }
    }
    let k_bc = &k_mod - &k.0;
    (DenseOperator(k_mod), DenseOperator(k_bc))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalSolution {
    /// Solution for the unit-norm load.
    pub normalized: Vec<f64>,
    /// Solution in physical units (`normalization_scale * normalized`).
    pub displacement: Vec<f64>,
    /// `-1/2 fᵀ K⁻¹ f` for the unit-norm load.
    pub target_energy: f64,
}

/// Dense Cholesky solve of `K_mod u = f`.
pub fn classical_solve(k_mod: &DenseOperator, load: &LoadSpec) -> Result<ClassicalSolution> {
    if load.len() != k_mod.dim() {
        return Err(Error::Domain(format!(
            "load length {} does not match matrix dimension {}",
            load.len(),
            k_mod.dim()
        )));
    }
    let chol = k_mod.0.clone().cholesky().ok_or(Error::SingularSystem)?;
    let max_diag = k_mod.0.diagonal().amax();
    let min_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|x| x * x)
        .fold(f64::INFINITY, f64::min);
    if !(min_pivot > SINGULAR_PIVOT_RATIO * max_diag) {
        return Err(Error::SingularSystem);
    }
    let f = DVector::from_column_slice(&load.vector);
    let u = chol.solve(&f);
    let target_energy = -0.5 * f.dot(&u);
    let normalized: Vec<f64> = u.iter().copied().collect();
    let displacement = normalized
        .iter()
        .map(|x| x * load.normalization_scale)
        .collect();
    Ok(ClassicalSolution {
        normalized,
        displacement,
        target_energy,
    })
}
