use std::sync::Arc;

use super::audit::Audited;
use super::builtin::ProblemDescriptor;
use super::prox::Regularizer;
use super::smooth::{FiniteSum, SmoothObjective};
use crate::error::{ensure_dim, Result};
use crate::Vector;

/// `φ(x) = f(x) + h(x)` with optional finite-sum structure on `f`.
#[derive(Clone)]
pub struct CompositeProblem {
    smooth: Arc<dyn SmoothObjective>,
    finite_sum: Option<Arc<dyn FiniteSum>>,
    pub nonsmooth: Regularizer,
    /// Certified lower bound on `φ` (the optimal value when known exactly).
    pub lower_bound: Option<f64>,
    /// Known minimizer, used only by diagnostics.
    pub minimizer: Option<Vector>,
    /// Known stationary points (including saddles), used only by diagnostics.
    pub stationary_points: Vec<Vector>,
    pub descriptor: Option<ProblemDescriptor>,
}

impl std::fmt::Debug for CompositeProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CompositeProblem")
            .field("dim", &self.dim())
            .field("finite_sum", &self.finite_sum.is_some())
            .field("nonsmooth", &self.nonsmooth)
            .field("constants", &self.smooth.constants())
            .field("descriptor", &self.descriptor)
            .finish()
    }
}

impl CompositeProblem {
    pub fn new(smooth: Arc<dyn SmoothObjective>, nonsmooth: Regularizer) -> Self {
        let lower_bound = smooth.constants().lower_bound;
        Self {
            smooth,
            finite_sum: None,
            nonsmooth,
            lower_bound,
            minimizer: None,
            stationary_points: Vec::new(),
            descriptor: None,
        }
    }

    pub fn from_finite_sum(fs: Arc<dyn FiniteSum>, nonsmooth: Regularizer) -> Self {
        let smooth: Arc<dyn SmoothObjective> = fs.clone();
        let mut p = Self::new(smooth, nonsmooth);
        p.finite_sum = Some(fs);
        p
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn smooth(&self) -> &dyn SmoothObjective {
        self.smooth.as_ref()
    }

    pub fn finite_sum(&self) -> Option<&dyn FiniteSum> {
        self.finite_sum.as_deref()
    }

    /// Counting view handed to solvers.
    pub fn audited(&self) -> Audited<'_> {
        Audited::new(self.smooth.as_ref(), self.finite_sum.as_deref())
    }

    /// `φ(x)`. Diagnostics only; no solver calls this.
    pub fn objective(&self, x: &Vector) -> f64 {
        self.smooth.value(x) + self.nonsmooth.value(x)
    }

    /// Exact KKT residual `G(x) = x − prox_h(x − ∇f(x))`.
    pub fn exact_residual(&self, x: &Vector) -> Vector {
        let g = self.smooth.gradient(x);
        x - self.nonsmooth.prox_unchecked(&(x - &g), 1.0)
    }
}

/// `x − prox_h(x − g)` with unit prox step; `G̃(x)` for an approximate `g`
/// and `G(x)` for the exact gradient.
pub fn kkt_residual(x: &Vector, g: &Vector, problem: &CompositeProblem) -> Result<Vector> {
    ensure_dim(problem.dim(), x)?;
    ensure_dim(problem.dim(), g)?;
    let p = problem.nonsmooth.prox(&(x - g), 1.0)?;
    Ok(x - p)
}
