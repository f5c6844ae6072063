use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("bad dimension {dim}: {reason}")]
    BadDimension { dim: usize, reason: String },

    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("{what} did not converge within its iteration budget")]
    ConvergenceFailure { what: &'static str },

    #[error("function value is not finite at eigenvalue {at}")]
    NonFiniteValue { at: f64 },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("bad model parameters: {0}")]
    BadParams(String),

    #[error("resolvent (H0 - i{lambda}) is singular")]
    SingularResolvent { lambda: f64 },

    #[error("H = H0 + B is not Hermitian for model `{model}`")]
    NotHermitianH { model: String },

    #[error("projector is not an orthogonal projection (defect {defect:.3e})")]
    ProjectionMismatch { defect: f64 },

    #[error("spectrum starts at {min}, below 1")]
    SpectrumBelowOne { min: f64 },

    #[error("model `{model}` is not a number-operator model")]
    WrongModelFamily { model: String },

    #[error("matrix is not diagonalizable within tolerance (eigenvector condition {condition:.3e})")]
    NonDiagonalizable { condition: f64 },

    #[error("quadrature did not reach {tol:.1e} within {panels} panels")]
    QuadratureBudgetExceeded { tol: f64, panels: usize },

    #[error("commutator chain is not nilpotent at order {order}")]
    NotNilpotent { order: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
