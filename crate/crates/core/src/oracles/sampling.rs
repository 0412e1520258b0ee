//! Subsample sizes and subsampled derivative estimates for finite sums.

use std::cell::Cell;

use rand::Rng;

use super::{DerivativeEstimate, HessianEstimate};
use crate::error::{Error, Result};
use crate::linalg::SymOperator;
use crate::problem::{Audited, FiniteSum};
use crate::rng::{self, Purpose};
use crate::{Matrix, Vector};

fn check_confidence(confidence: f64) -> Result<()> {
    if confidence > 0.0 && confidence < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("confidence {confidence} not in (0, 1)")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
    }
}

fn concentration_factor(confidence: f64) -> f64 {
    let s = 1.0 + (8.0 * (1.0 / confidence).ln()).sqrt();
    s * s
}

/// `Û_g²(1 + √(8 ln(1/δ̄)))² / (δ_g² ε²)` before rounding.
pub fn gradient_sample_bound(delta_g: f64, eps: f64, ug: f64, confidence: f64) -> Result<f64> {
    check_confidence(confidence)?;
    check_positive("delta_g", delta_g)?;
    check_positive("eps", eps)?;
    check_positive("U_g", ug)?;
    Ok(ug * ug * concentration_factor(confidence) / (delta_g * delta_g * eps * eps))
}

/// `16 Û_h² / δ_h² · ln(2n/δ̄)` before rounding.
pub fn hessian_sample_bound(delta_h: f64, n: usize, uh: f64, confidence: f64) -> Result<f64> {
    check_confidence(confidence)?;
    check_positive("delta_h", delta_h)?;
    check_positive("U_h", uh)?;
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    Ok(16.0 * uh * uh / (delta_h * delta_h) * (2.0 * n as f64 / confidence).ln())
}

fn round_and_cap(bound: f64, cap: Option<usize>) -> usize {
    let size = if bound.is_finite() && bound < usize::MAX as f64 {
        (bound.ceil() as usize).max(1)
    } else {
        usize::MAX
    };
    match cap {
        Some(m) => size.min(m),
        None => size,
    }
}

/// Gradient sample size, capped at `m` when given.
pub fn gradient_sample_size(
    delta_g: f64,
    eps: f64,
    ug: f64,
    confidence: f64,
    cap: Option<usize>,
) -> Result<usize> {
    Ok(round_and_cap(gradient_sample_bound(delta_g, eps, ug, confidence)?, cap))
}

/// Hessian sample size, capped at `m` when given.
pub fn hessian_sample_size(
    delta_h: f64,
    n: usize,
    uh: f64,
    confidence: f64,
    cap: Option<usize>,
) -> Result<usize> {
    Ok(round_and_cap(hessian_sample_bound(delta_h, n, uh, confidence)?, cap))
}

/// Sample sizes giving the absolute accuracies `ε_g/3` and `ε_h/18`.
pub fn sosp_sample_sizes(
    eps_g: f64,
    eps_h: f64,
    n: usize,
    ug: f64,
    uh: f64,
    confidence: f64,
    cap: Option<usize>,
) -> Result<(usize, usize)> {
    check_confidence(confidence)?;
    check_positive("eps_g", eps_g)?;
    check_positive("eps_h", eps_h)?;
    check_positive("U_g", ug)?;
    check_positive("U_h", uh)?;
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let sg = 9.0 * ug * ug * concentration_factor(confidence) / (eps_g * eps_g);
    let sh = 5184.0 * uh * uh / (eps_h * eps_h) * (2.0 * n as f64 / confidence).ln();
    Ok((round_and_cap(sg, cap), round_and_cap(sh, cap)))
}

/// Indices drawn uniformly with replacement, or `0..m` in order when the
/// requested size reaches `m`.
pub fn sample_indices(m: usize, size: usize, seed: u64, iteration: u64, purpose: Purpose) -> Vec<usize> {
    if size >= m {
        return (0..m).collect();
    }
    let mut rng = rng::stream(seed, iteration, purpose);
    (0..size).map(|_| rng.random_range(0..m)).collect()
}

/// `Q = (1/|S_h|) Σ_{i∈S_h} ∇²f_i(x)` as a Hessian-vector closure.
pub struct SampledHessian<'a> {
    problem: &'a Audited<'a>,
    x: Vector,
    indices: Vec<usize>,
    bound: f64,
    matvecs: Cell<usize>,
    violations: Cell<usize>,
}

impl<'a> SampledHessian<'a> {
    pub fn new(problem: &'a Audited<'a>, x: Vector, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty Hessian sample".into()));
        }
        let bound = problem
            .component_bounds()
            .ok_or_else(|| Error::InvalidArgument("subsampling needs a finite-sum problem".into()))?
            .hessian;
        Ok(Self {
            problem,
            x,
            indices,
            bound,
            matvecs: Cell::new(0),
            violations: Cell::new(0),
        })
    }

    pub fn sample_size(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn matvecs(&self) -> usize {
        self.matvecs.get()
    }

    /// Component products that exceeded `Û_h‖v‖`.
    pub fn bound_violations(&self) -> usize {
        self.violations.get()
    }

    /// Dense sample mean built from the raw components without touching the
    /// counters. Diagnostics only.
    pub fn dense_uncounted(&self) -> Matrix {
        let fs: &dyn FiniteSum = self.problem.raw_finite_sum().expect("finite sum");
        let n = fs.dim();
        let mut acc = Matrix::zeros(n, n);
        for &i in &self.indices {
            acc += fs.component_hessian(i, &self.x);
        }
        acc /= self.indices.len() as f64;
        (&acc + acc.transpose()) * 0.5
    }
}

impl SymOperator for SampledHessian<'_> {
    fn dim(&self) -> usize {
        self.x.len()
    }

    fn apply(&self, v: &Vector) -> Vector {
        self.matvecs.set(self.matvecs.get() + 1);
        let vn = v.norm();
        let mut acc = Vector::zeros(v.len());
        for &i in &self.indices {
            let hv = self.problem.component_hessian_vector(i, &self.x, v);
            if hv.norm() > self.bound * vn * (1.0 + 1e-9) {
                self.violations.set(self.violations.get() + 1);
            }
            acc += hv;
        }
        acc / self.indices.len() as f64
    }
}

/// Subsampled gradient and Hessian at `x` with the given sample sizes. Sizes
/// at or above `m` use the full batch, which reproduces `∇f(x)` exactly.
pub fn subsample_estimate<'a>(
    problem: &'a Audited<'a>,
    x: &Vector,
    gradient_size: usize,
    hessian_size: usize,
    seed: u64,
    iteration: u64,
) -> Result<DerivativeEstimate<'a>> {
    let m = problem
        .num_components()
        .ok_or_else(|| Error::InvalidArgument("subsampling needs a finite-sum problem".into()))?;
    if gradient_size == 0 || hessian_size == 0 {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let ug = problem.component_bounds().expect("finite sum").gradient;
    let g_idx = sample_indices(m, gradient_size, seed, iteration, Purpose::GradientSample);
    let h_idx = sample_indices(m, hessian_size, seed, iteration, Purpose::HessianSample);
    let mut g = Vector::zeros(x.len());
    let mut violations = 0;
    for &i in &g_idx {
        let gi = problem.component_gradient(i, x);
        if gi.norm() > ug * (1.0 + 1e-9) {
            violations += 1;
        }
        g += gi;
    }
    g /= g_idx.len() as f64;
    let full_gradient = g_idx.len() == m && gradient_size >= m;
    let full_hessian = h_idx.len() == m && hessian_size >= m;
    let gradient_samples = g_idx.len();
    let hessian = SampledHessian::new(problem, x.clone(), h_idx)?;
    Ok(DerivativeEstimate {
        g,
        hessian: HessianEstimate::Sampled(hessian),
        delta_g: 0.0,
        delta_h: 0.0,
        gradient_fallback: false,
        halvings: 0,
        gradient_samples,
        full_gradient,
        full_hessian,
        gradient_bound_violations: violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn gradient_size_examples() {
        let conf = (-1.0f64 / 8.0).exp();
        assert_eq!(gradient_sample_size(0.5, 0.1, 1.0, conf, None).unwrap(), 1600);
        let a = gradient_sample_bound(0.2, 0.1, 1.0, 0.05).unwrap();
        let b = gradient_sample_bound(0.4, 0.1, 1.0, 0.05).unwrap();
        assert!((a / b - 4.0).abs() < 1e-12);
        assert_eq!(gradient_sample_size(1e-6, 1e-3, 1.0, 0.05, Some(2000)).unwrap(), 2000);
    }

    #[test]
    fn hessian_size_examples() {
        assert_eq!(hessian_sample_size(1.0, 1, 1.0, 2.0 / E, None).unwrap(), 16);
        let a = hessian_sample_bound(0.5, 3, 2.0, 0.1).unwrap();
        let b = hessian_sample_bound(0.5, 30, 2.0, 0.1).unwrap();
        assert!((b - a - 16.0 * 4.0 / 0.25 * 10f64.ln()).abs() < 1e-9);
        assert_eq!(hessian_sample_size(1e-9, 3, 1.0, 0.1, Some(77)).unwrap(), 77);
    }

    #[test]
    fn sosp_size_examples() {
        let conf = (-1.0f64 / 8.0).exp();
        assert_eq!(sosp_sample_sizes(1.0, 1.0, 1, 1.0, 1.0, conf, None).unwrap().0, 36);
        assert_eq!(sosp_sample_sizes(1.0, 1.0, 1, 1.0, 1.0, 2.0 / E, None).unwrap().1, 5184);
        let (a, _) = sosp_sample_sizes(0.5, 1.0, 1, 1.0, 1.0, conf, None).unwrap();
        assert_eq!(a, 144);
    }

    #[test]
    fn invalid_confidence_is_rejected() {
        assert!(gradient_sample_size(0.5, 0.1, 1.0, 1.0, None).is_err());
        assert!(hessian_sample_size(0.5, 2, 1.0, 0.0, None).is_err());
    }

    #[test]
    fn indices_are_deterministic() {
        let a = sample_indices(100, 30, 5, 2, Purpose::GradientSample);
        let b = sample_indices(100, 30, 5, 2, Purpose::GradientSample);
        assert_eq!(a, b);
        assert_ne!(a, sample_indices(100, 30, 5, 3, Purpose::GradientSample));
        assert_eq!(sample_indices(10, 12, 0, 0, Purpose::GradientSample), (0..10).collect::<Vec<_>>());
    }
}
