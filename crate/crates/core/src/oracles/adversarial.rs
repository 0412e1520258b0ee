//! Seeded noise injection realizing the relative and absolute error models.

use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::spectral_norm;
use crate::problem::Regularizer;
use crate::rng;
use crate::{Matrix, Vector};

/// Maximum number of halvings of the composite-mode noise.
pub const MAX_HALVINGS: u32 = 60;

/// Which bound the gradient noise has to respect.
#[derive(Debug, Clone, Copy)]
pub enum GradientNoiseModel<'p> {
    /// `‖e‖ ≤ δ‖g‖`.
    Relative,
    /// `‖e‖ ≤ δ‖x − prox_h(x − g)‖`.
    Composite { x: &'p Vector, nonsmooth: &'p Regularizer },
    /// `‖e‖ ≤ level`, magnitude drawn in `[level/2, level]`.
    Absolute { level: f64 },
}

#[derive(Debug, Clone)]
pub struct NoisyGradient {
    pub g: Vector,
    pub noise_norm: f64,
    pub halvings: u32,
    /// The halving loop failed and the exact gradient was returned.
    pub fallback: bool,
}

/// `g = ∇f(x) + e` with `e` along a seeded random direction.
///
/// In the relative models `‖e‖ = ρ‖∇f(x)‖` with `ρ = δ/(1 + δ)`, so
/// `‖g‖ ≥ (1 − ρ)‖∇f(x)‖` and `‖e‖ ≤ δ‖g‖`. The composite model then checks
/// `‖e‖ ≤ δ‖G̃(x)‖` with `G̃` built from the candidate and halves `e` until it
/// holds.
pub fn adversarial_gradient<R: Rng + ?Sized>(
    grad: &Vector,
    delta: f64,
    model: GradientNoiseModel<'_>,
    rng: &mut R,
) -> NoisyGradient {
    let n = grad.len();
    let dir = rng::unit_vector(rng, n);
    let magnitude = match model {
        GradientNoiseModel::Absolute { level } => level * rng.random_range(0.5..=1.0),
        _ => delta / (1.0 + delta) * grad.norm(),
    };
    let mut e = dir * magnitude;
    match model {
        GradientNoiseModel::Relative | GradientNoiseModel::Absolute { .. } => NoisyGradient {
            g: grad + &e,
            noise_norm: e.norm(),
            halvings: 0,
            fallback: false,
        },
        GradientNoiseModel::Composite { x, nonsmooth } => {
            for halvings in 0..=MAX_HALVINGS {
                let g = grad + &e;
                let residual = x - nonsmooth.prox_unchecked(&(x - &g), 1.0);
                let noise = &g - grad;
                if noise.norm() <= delta * residual.norm() {
                    return NoisyGradient {
                        g,
                        noise_norm: noise.norm(),
                        halvings,
                        fallback: false,
                    };
                }
                e *= 0.5;
            }
            NoisyGradient {
                g: grad.clone(),
                noise_norm: 0.0,
                halvings: MAX_HALVINGS,
                fallback: true,
            }
        }
    }
}

/// Power iteration estimate of `‖E‖₂` for symmetric `E`.
pub fn power_norm(e: &Matrix, iterations: usize) -> f64 {
    let n = e.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = Vector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut est = 0.0;
    for _ in 0..iterations {
        let w = e * &v;
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        est = nw;
        v = w / nw;
    }
    est
}

/// `Q = ∇²f(x) + E` with `E` a seeded random symmetric matrix of spectral
/// norm exactly `min(δ_h, magnitude)`.
pub fn adversarial_hessian<R: Rng + ?Sized>(
    hess: &Matrix,
    delta_h: f64,
    magnitude: f64,
    rng: &mut R,
) -> Matrix {
    let n = hess.nrows();
    let target = delta_h.min(magnitude);
    if target <= 0.0 || n == 0 {
        return hess.clone();
    }
    let raw = Matrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let sym = (&raw + raw.transpose()) * 0.5;
    let norm = spectral_norm(&sym);
    if norm == 0.0 {
        return hess.clone();
    }
    let e = sym * (target / norm);
    debug_assert!(power_norm(&e, 200) <= delta_h * (1.0 + 1e-10));
    hess + e
}

/// Exact spectral norm of `Q − H` via a dense eigensolver.
pub fn hessian_error(q: &Matrix, h: &Matrix) -> f64 {
    let d = q - h;
    let d = (&d + d.transpose()) * 0.5;
    SymmetricEigen::new(d)
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}
