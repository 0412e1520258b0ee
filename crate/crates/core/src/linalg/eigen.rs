use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use super::{materialize, SymOperator};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::{Matrix, Vector};

/// Largest dimension for which the dense eigensolver is used in `Auto` mode.
pub const DENSE_LIMIT: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenMode {
    Dense,
    Lanczos,
    /// Dense when `n ≤ 256` and the Lanczos budget would be `n` anyway.
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenMethod {
    Dense,
    Lanczos,
}

#[derive(Debug, Clone)]
pub struct EigenEstimate {
    /// Rayleigh quotient `p̂ᵀQp̂`.
    pub value: f64,
    pub vector: Vector,
    /// Operator applications; a dense solve counts as `n`.
    pub matvecs: usize,
    pub method: EigenMethod,
    pub converged: bool,
    /// Value certified to lie below `λ_min(Q)`: exact in dense mode, `λ̂ − ε_h/2`
    /// after Lanczos.
    pub lower_bound: f64,
    /// Smallest Ritz value after each Lanczos step.
    pub ritz_history: Vec<f64>,
    /// `‖Qp̂ − λ̂p̂‖`.
    pub residual: f64,
}

/// `min{n, ⌈2 ε_h^{−1/2} ln(9n/δ²)⌉}`.
pub fn lanczos_budget(n: usize, eps_h: f64, confidence: f64) -> usize {
    let raw = 2.0 / eps_h.sqrt() * (9.0 * n as f64 / (confidence * confidence)).ln();
    (raw.ceil().max(1.0) as usize).min(n)
}

/// Estimates the smallest eigenpair of `op` to accuracy `ε_h/2` with
/// probability at least `1 − δ` (`δ = confidence`).
pub fn min_eigen(
    op: &dyn SymOperator,
    eps_h: f64,
    confidence: f64,
    seed: u64,
    mode: EigenMode,
) -> Result<EigenEstimate> {
    let n = op.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("empty operator".into()));
    }
    if !(eps_h > 0.0 && eps_h.is_finite()) {
        return Err(Error::InvalidArgument(format!("eigen accuracy {eps_h} must be positive")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence {confidence} not in (0, 1)")));
    }
    let budget = lanczos_budget(n, eps_h, confidence);
    let dense = match mode {
        EigenMode::Dense => true,
        EigenMode::Lanczos => false,
        EigenMode::Auto => n <= DENSE_LIMIT && budget >= n,
    };
    if dense {
        Ok(dense_min_eigen(&materialize(op)))
    } else {
        Ok(lanczos(op, eps_h, budget, seed))
    }
}

fn dense_min_eigen(m: &Matrix) -> EigenEstimate {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let idx = eig.eigenvalues.imin();
    let mut p: Vector = eig.eigenvectors.column(idx).into_owned();
    p /= p.norm();
    let qp = m * &p;
    let value = p.dot(&qp);
    let residual = (&qp - &p * value).norm();
    EigenEstimate {
        value,
        vector: p,
        matvecs: n,
        method: EigenMethod::Dense,
        converged: true,
        lower_bound: value.min(eig.eigenvalues[idx]),
        ritz_history: Vec::new(),
        residual,
    }
}

/// Number of eigenvalues of the symmetric tridiagonal `(a, b)` below `x`.
fn sturm_count(a: &[f64], b: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..a.len() {
        let off = if i == 0 { 0.0 } else { b[i - 1] * b[i - 1] };
        q = a[i] - x - if i == 0 { 0.0 } else { off / q };
        if q == 0.0 {
            q = -f64::EPSILON * (a[i].abs() + x.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn tridiagonal_min(a: &[f64], b: &[f64]) -> f64 {
    let k = a.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let r = if i > 0 { b[i - 1].abs() } else { 0.0 } + if i + 1 < k { b[i].abs() } else { 0.0 };
        lo = lo.min(a[i] - r);
        hi = hi.max(a[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(a, b, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn lanczos(op: &dyn SymOperator, eps_h: f64, budget: usize, seed: u64) -> EigenEstimate {
    let n = op.dim();
    let mut rng = rng::stream(seed, 0, Purpose::Eigen);
    let mut basis: Vec<Vector> = vec![rng::unit_vector(&mut rng, n)];
    let mut images: Vec<Vector> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut history = Vec::new();
    let mut scale: f64 = 0.0;
    let mut breakdown = false;
    for j in 0..budget {
        let w0 = op.apply(&basis[j]);
        let alpha = basis[j].dot(&w0);
        let mut w = &w0 - &basis[j] * alpha;
        if j > 0 {
            w.axpy(-betas[j - 1], &basis[j - 1], 1.0);
        }
        // Full reorthogonalization, two passes.
        for _ in 0..2 {
            for v in &basis {
                let c = v.dot(&w);
                w.axpy(-c, v, 1.0);
            }
        }
        images.push(w0);
        alphas.push(alpha);
        let beta = w.norm();
        scale = scale.max(alpha.abs()).max(beta);
        history.push(tridiagonal_min(&alphas, &betas));
        if beta <= 1e-12 * scale || beta == 0.0 {
            breakdown = true;
            break;
        }
        if j + 1 == budget {
            break;
        }
        betas.push(beta);
        basis.push(w / beta);
    }

    let k = alphas.len();
    let mut t = Matrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let idx = eig.eigenvalues.imin();
    let y = eig.eigenvectors.column(idx);
    let mut p = Vector::zeros(n);
    let mut qp = Vector::zeros(n);
    for i in 0..k {
        p.axpy(y[i], &basis[i], 1.0);
        qp.axpy(y[i], &images[i], 1.0);
    }
    let norm = p.norm();
    p /= norm;
    qp /= norm;
    let value = p.dot(&qp);
    let residual = (&qp - &p * value).norm();
    EigenEstimate {
        value,
        vector: p,
        matvecs: k,
        method: EigenMethod::Lanczos,
        converged: breakdown || residual <= 0.5 * eps_h,
        lower_bound: value - 0.5 * eps_h,
        ritz_history: history,
        residual,
    }
}
