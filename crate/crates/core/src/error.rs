use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("qubit index {index} out of range for a {num_qubits}-qubit register")]
    Index { index: usize, num_qubits: usize },

    #[error("expected {expected} parameters, got {actual}")]
    Arity { expected: usize, actual: usize },

    #[error("stiffness matrix is singular or indefinite (pivot failure); a periodic beam needs an anchored DOF")]
    SingularSystem,

    #[error(
        "six-term Pauli reconstruction left residual {residual:e}; matrix is not a beam element"
    )]
    DecompositionResidual { residual: f64 },

    #[error("energy quadratic form {0:e} is not positive")]
    NearSingularEnergy(f64),

    #[error("normalized RMSE undefined: reference vector is constant")]
    NrmseUndefined,

    #[error("optimization failed in every restart (best loss {best_loss})")]
    OptimizationFailed {
        best_loss: f64,
        best_theta: Vec<f64>,
    },
}
