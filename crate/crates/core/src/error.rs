use thiserror::Error;

use crate::Vector;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("missing constant {0}; supply a certified lower bound or surrogate")]
    MissingConstant(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// CG met a direction with `pᵀAp <= 0`. Under the solvers' preconditions
    /// this means an upstream certificate (eigenvalue estimate or Hessian
    /// error bound) was violated.
    #[error("non-positive curvature {curvature:e} met by CG at iteration {iteration}")]
    NonPositiveCurvature {
        curvature: f64,
        iteration: usize,
        direction: Vector,
    },

    #[error("CG stopped after {iterations} iterations with relative residual {achieved:e} > {target:e}")]
    CgNotConverged {
        iterations: usize,
        achieved: f64,
        target: f64,
    },

    #[error("inner solver exhausted its budget of {budget} iterations (witness {xi_norm:e} > {target:e})")]
    InnerBudgetExhausted {
        budget: usize,
        best: Vector,
        xi_norm: f64,
        target: f64,
    },

    #[error("step criterion violated: {0}")]
    StepCriterion(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, v: &Vector) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} has non-finite entries")))
    }
}

pub(crate) fn ensure_dim(expected: usize, v: &Vector) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            got: v.len(),
        })
    }
}
