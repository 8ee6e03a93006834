use thiserror::Error;

use crate::field::Weight;

#[derive(Debug, Error)]
pub enum HcscError {
    #[error("grid size {grid} is below the minimum of {min} for this surface")]
    GridTooSmall { grid: usize, min: usize },

    #[error("torus modulus must have positive imaginary part, got {0}")]
    DegenerateModulus(num_complex::Complex64),

    #[error("operation expects weight {expected}, got {found}")]
    WeightMismatch { expected: Weight, found: Weight },

    #[error("unsupported weight {0} for this operator")]
    UnsupportedWeight(Weight),

    #[error("field length {found} does not match the surface sample count {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("constraint violated: max |q|^2 = {max_norm_sq:.6e} (must stay below 1)")]
    ConstraintViolation { max_norm_sq: f64 },

    #[error("Fredholm obstruction: right-hand side has kernel component of norm {obstruction:.6e}")]
    FredholmObstruction { obstruction: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("coefficient list has {found} entries but the kernel has dimension {expected}")]
    SpecDimension { expected: usize, found: usize },

    #[error("fixed-point iteration stopped contracting (factor {factor:.3} over 3 sweeps)")]
    ContractionFailure { factor: f64 },

    #[error("Newton did not converge in {iters} iterations (residual {residual:.3e})")]
    NewtonMaxIters { iters: usize, residual: f64 },

    #[error("Newton damping floor reached at residual {residual:.3e}")]
    DampingFloor { residual: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HcscError>;
