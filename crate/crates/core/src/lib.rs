//! Variational statevector solver for FEM-discretized Euler-Bernoulli beams.
//!
//! The stiffness matrix of a uniform beam is expressed as a fixed number of
//! shift-conjugated, projector-prefixed Pauli terms ([`pauli`]), displacement
//! boundary conditions are imposed by zeroing off-diagonal couplings and
//! measuring the resulting correction through X/CNOT basis transformations
//! ([`lsbt`]), and the discretized potential energy is minimized over the
//! parameters of a real-amplitude ansatz on an exact statevector
//! simulator ([`statevector`], [`vqe`]).

// Negated comparisons are used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beam;
pub mod error;
pub mod lsbt;
pub mod metrics;
pub mod optim;
pub mod pauli;
pub mod statevector;
pub mod vqe;

pub use error::{Error, Result};
