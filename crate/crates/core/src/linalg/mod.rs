//! Symmetric operators, conjugate gradients and minimum-eigenvalue estimation.

mod cg;
mod eigen;

pub use cg::{
    cg_iteration_budget, cg_relative_tolerance, cg_solve, cg_solve_observed, cg_solve_with_floor,
    sc_cg_tolerance,
    CgReport,
};
pub use eigen::{lanczos_budget, min_eigen, EigenEstimate, EigenMethod, EigenMode, DENSE_LIMIT};

use std::cell::Cell;

use nalgebra::SymmetricEigen;

use crate::{Matrix, Vector};

/// A symmetric linear map `R^n → R^n`.
pub trait SymOperator {
    fn dim(&self) -> usize;

    fn apply(&self, v: &Vector) -> Vector;

    /// Explicit matrix when one is already stored. Operators without one
    /// return `None` and are materialized column by column when needed.
    fn dense(&self) -> Option<Matrix> {
        None
    }
}

impl SymOperator for Matrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, v: &Vector) -> Vector {
        self * v
    }

    fn dense(&self) -> Option<Matrix> {
        Some(self.clone())
    }
}

impl<T: SymOperator + ?Sized> SymOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, v: &Vector) -> Vector {
        (**self).apply(v)
    }

    fn dense(&self) -> Option<Matrix> {
        (**self).dense()
    }
}

/// Wraps an operator and counts its applications.
pub struct Counted<'a> {
    inner: &'a dyn SymOperator,
    count: Cell<usize>,
}

impl<'a> Counted<'a> {
    pub fn new(inner: &'a dyn SymOperator) -> Self {
        Self {
            inner,
            count: Cell::new(0),
        }
    }

    pub fn count(&self) -> usize {
        self.count.get()
    }
}

impl SymOperator for Counted<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, v: &Vector) -> Vector {
        self.count.set(self.count.get() + 1);
        self.inner.apply(v)
    }

    fn dense(&self) -> Option<Matrix> {
        self.inner.dense()
    }
}

/// `A + sI`.
pub struct Shifted<'a> {
    pub inner: &'a dyn SymOperator,
    pub shift: f64,
}

impl SymOperator for Shifted<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, v: &Vector) -> Vector {
        self.inner.apply(v) + v * self.shift
    }

    fn dense(&self) -> Option<Matrix> {
        self.inner.dense().map(|mut m| {
            for i in 0..m.nrows() {
                m[(i, i)] += self.shift;
            }
            m
        })
    }
}

/// Materializes `op` as a dense symmetric matrix, using `n` applications when
/// no stored matrix is available.
pub fn materialize(op: &dyn SymOperator) -> Matrix {
    if let Some(m) = op.dense() {
        return m;
    }
    let n = op.dim();
    let mut m = Matrix::zeros(n, n);
    let mut e = Vector::zeros(n);
    for j in 0..n {
        e[j] = 1.0;
        m.set_column(j, &op.apply(&e));
        e[j] = 0.0;
    }
    (&m + m.transpose()) * 0.5
}

/// Exact extreme eigenvalues `(λ_min, λ_max)` of a dense symmetric matrix.
pub fn eigen_range(m: &Matrix) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    (eig.min(), eig.max())
}

/// Spectral norm of a symmetric matrix.
pub fn spectral_norm(m: &Matrix) -> f64 {
    let (lo, hi) = eigen_range(m);
    lo.abs().max(hi.abs())
}

/// `H = Q + ([−λ]₊ + c)I` where `λ` is the eigenvalue lower bound carried by
/// the estimate (exact in dense mode, `λ̂ − ε_h/2` after Lanczos).
pub struct RegularizedHessian<'a> {
    q: &'a dyn SymOperator,
    pub c: f64,
    pub lambda: f64,
    pub shift: f64,
}

impl<'a> RegularizedHessian<'a> {
    pub fn q(&self) -> &'a dyn SymOperator {
        self.q
    }
}

impl SymOperator for RegularizedHessian<'_> {
    fn dim(&self) -> usize {
        self.q.dim()
    }

    fn apply(&self, v: &Vector) -> Vector {
        self.q.apply(v) + v * self.shift
    }

    fn dense(&self) -> Option<Matrix> {
        Shifted {
            inner: self.q,
            shift: self.shift,
        }
        .dense()
    }
}

pub fn regularized_hessian<'a>(
    q: &'a dyn SymOperator,
    c: f64,
    eigen: &EigenEstimate,
) -> RegularizedHessian<'a> {
    let lambda = eigen.lower_bound;
    RegularizedHessian {
        q,
        c,
        lambda,
        shift: (-lambda).max(0.0) + c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn regularization_of_psd_matrix_adds_c_only() {
        let q = Matrix::from_diagonal(&dvector![2.0, 5.0]);
        let eig = min_eigen(&q, 0.1, 0.05, 0, EigenMode::Dense).unwrap();
        let h = regularized_hessian(&q, 3.0, &eig);
        assert_eq!(h.dense().unwrap(), Matrix::from_diagonal(&dvector![5.0, 8.0]));
    }

    #[test]
    fn regularization_of_indefinite_diagonal() {
        let q = Matrix::from_diagonal(&dvector![-1.0, 3.0]);
        let eig = min_eigen(&q, 0.1, 0.05, 0, EigenMode::Dense).unwrap();
        let h = regularized_hessian(&q, 4.0, &eig);
        let hd = h.dense().unwrap();
        assert_eq!(hd, Matrix::from_diagonal(&dvector![4.0, 8.0]));
        let (lo, _) = eigen_range(&hd);
        assert!((lo - 4.0).abs() < 1e-14);
    }

    #[test]
    fn materialize_matches_stored_matrix() {
        struct Op(Matrix);
        impl SymOperator for Op {
            fn dim(&self) -> usize {
                self.0.nrows()
            }
            fn apply(&self, v: &Vector) -> Vector {
                &self.0 * v
            }
        }
        let m = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        assert_eq!(materialize(&Op(m.clone())), m);
    }
}
