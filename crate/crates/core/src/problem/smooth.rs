use serde::{Deserialize, Serialize};

use crate::{Matrix, Vector};

/// Certified constants attached to a smooth objective.
///
/// All values are upper bounds (or, for `strong_convexity` and
/// `lower_bound`, lower bounds) valid on the region the solvers visit. They
/// need not be tight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothConstants {
    pub lipschitz_grad: f64,
    pub lipschitz_hess: Option<f64>,
    /// `0.0` when the objective is not known to be strongly convex.
    pub strong_convexity: f64,
    pub lower_bound: Option<f64>,
}

/// A twice continuously differentiable objective with exact oracles.
///
/// Implementations must be pure: calling any method must not change what any
/// later call returns.
pub trait SmoothObjective: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &Vector) -> f64;

    fn gradient(&self, x: &Vector) -> Vector;

    fn hessian(&self, x: &Vector) -> Matrix;

    fn hessian_vector(&self, x: &Vector, v: &Vector) -> Vector {
        self.hessian(x) * v
    }

    fn constants(&self) -> SmoothConstants;
}

/// Uniform bounds on component derivatives over the level set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentBounds {
    pub gradient: f64,
    pub hessian: f64,
    /// True when the bounds come from a pilot sample rather than analysis.
    pub heuristic: bool,
}

/// `f(x) = (1/m) Σ f_i(x)`.
///
/// `gradient` must equal the mean of `component_gradient` over `i = 0..m`,
/// summed in index order.
pub trait FiniteSum: SmoothObjective {
    fn num_components(&self) -> usize;

    fn component_gradient(&self, i: usize, x: &Vector) -> Vector;

    fn component_hessian(&self, i: usize, x: &Vector) -> Matrix;

    fn component_hessian_vector(&self, i: usize, x: &Vector, v: &Vector) -> Vector {
        self.component_hessian(i, x) * v
    }

    fn component_bounds(&self) -> ComponentBounds;
}
