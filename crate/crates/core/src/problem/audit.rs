use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::smooth::{ComponentBounds, FiniteSum, SmoothConstants, SmoothObjective};
use crate::{Matrix, Vector};

/// Snapshot of oracle calls made through an [`Audited`] wrapper.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditCounts {
    pub objective_evals: u64,
    pub gradient_evals: u64,
    pub hessian_evals: u64,
    pub hessian_vector_products: u64,
    pub component_gradient_evals: u64,
    pub component_hessian_evals: u64,
    pub component_hessian_vector_products: u64,
}

#[derive(Default)]
struct Counters {
    objective: AtomicU64,
    gradient: AtomicU64,
    hessian: AtomicU64,
    hvp: AtomicU64,
    comp_gradient: AtomicU64,
    comp_hessian: AtomicU64,
    comp_hvp: AtomicU64,
}

fn bump(c: &AtomicU64) {
    c.fetch_add(1, Ordering::Relaxed);
}

/// Counting view of a problem. Solvers only ever see problems through this
/// wrapper, so `counts().objective_evals` audits the evaluation-free contract.
pub struct Audited<'a> {
    smooth: &'a dyn SmoothObjective,
    finite_sum: Option<&'a dyn FiniteSum>,
    counters: Counters,
}

impl<'a> Audited<'a> {
    pub fn new(smooth: &'a dyn SmoothObjective, finite_sum: Option<&'a dyn FiniteSum>) -> Self {
        Self {
            smooth,
            finite_sum,
            counters: Counters::default(),
        }
    }

    pub fn is_finite_sum(&self) -> bool {
        self.finite_sum.is_some()
    }

    pub fn num_components(&self) -> Option<usize> {
        self.finite_sum.map(|f| f.num_components())
    }

    pub fn component_bounds(&self) -> Option<ComponentBounds> {
        self.finite_sum.map(|f| f.component_bounds())
    }

    /// Underlying objective, bypassing the counters. Diagnostics only.
    pub fn raw(&self) -> &'a dyn SmoothObjective {
        self.smooth
    }

    /// Underlying finite sum, bypassing the counters. Diagnostics only.
    pub fn raw_finite_sum(&self) -> Option<&'a dyn FiniteSum> {
        self.finite_sum
    }

    pub fn counts(&self) -> AuditCounts {
        let c = &self.counters;
        AuditCounts {
            objective_evals: c.objective.load(Ordering::Relaxed),
            gradient_evals: c.gradient.load(Ordering::Relaxed),
            hessian_evals: c.hessian.load(Ordering::Relaxed),
            hessian_vector_products: c.hvp.load(Ordering::Relaxed),
            component_gradient_evals: c.comp_gradient.load(Ordering::Relaxed),
            component_hessian_evals: c.comp_hessian.load(Ordering::Relaxed),
            component_hessian_vector_products: c.comp_hvp.load(Ordering::Relaxed),
        }
    }

    pub fn component_gradient(&self, i: usize, x: &Vector) -> Vector {
        bump(&self.counters.comp_gradient);
        self.finite_sum.expect("not a finite-sum problem").component_gradient(i, x)
    }

    pub fn component_hessian(&self, i: usize, x: &Vector) -> Matrix {
        bump(&self.counters.comp_hessian);
        self.finite_sum.expect("not a finite-sum problem").component_hessian(i, x)
    }

    pub fn component_hessian_vector(&self, i: usize, x: &Vector, v: &Vector) -> Vector {
        bump(&self.counters.comp_hvp);
        self.finite_sum
            .expect("not a finite-sum problem")
            .component_hessian_vector(i, x, v)
    }
}

impl SmoothObjective for Audited<'_> {
    fn dim(&self) -> usize {
        self.smooth.dim()
    }

    fn value(&self, x: &Vector) -> f64 {
        bump(&self.counters.objective);
        self.smooth.value(x)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        bump(&self.counters.gradient);
        self.smooth.gradient(x)
    }

    fn hessian(&self, x: &Vector) -> Matrix {
        bump(&self.counters.hessian);
        self.smooth.hessian(x)
    }

    fn hessian_vector(&self, x: &Vector, v: &Vector) -> Vector {
        bump(&self.counters.hvp);
        self.smooth.hessian_vector(x, v)
    }

    fn constants(&self) -> SmoothConstants {
        self.smooth.constants()
    }
}
