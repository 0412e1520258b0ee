use super::SymOperator;
use crate::error::{Error, Result};
use crate::Vector;

/// Outcome of [`cg_solve`] on `A d = −g`.
#[derive(Debug, Clone)]
pub struct CgReport {
    pub solution: Vector,
    /// `A d + g`, recomputed from `d` after the last iteration.
    pub residual: Vector,
    pub iterations: usize,
    /// Operator applications, including residual recomputations.
    pub matvecs: usize,
    pub converged: bool,
    /// Absolute stopping target `τ‖g‖`.
    pub target: f64,
}

impl CgReport {
    pub fn residual_norm(&self) -> f64 {
        self.residual.norm()
    }
}

/// Conjugate gradients on `A d = −g` from `d = 0`, stopping once
/// `‖A d + g‖ ≤ τ‖g‖` holds for the recomputed residual or after `max_iter`
/// iterations.
pub fn cg_solve(a: &dyn SymOperator, g: &Vector, rel_tol: f64, max_iter: usize) -> Result<CgReport> {
    cg_solve_observed(a, g, rel_tol, max_iter, &mut |_, _| {})
}

/// [`cg_solve`] calling `observer(j, d_j)` after every iteration.
pub fn cg_solve_observed(
    a: &dyn SymOperator,
    g: &Vector,
    rel_tol: f64,
    max_iter: usize,
    observer: &mut dyn FnMut(usize, &Vector),
) -> Result<CgReport> {
    cg_solve_with_floor(a, g, rel_tol, max_iter, 0.0, observer)
}

/// [`cg_solve_observed`] that also fails when a search direction shows
/// curvature `pᵀAp/‖p‖²` at or below `floor`, i.e. when `A ⪰ floor·I` is
/// contradicted.
pub fn cg_solve_with_floor(
    a: &dyn SymOperator,
    g: &Vector,
    rel_tol: f64,
    max_iter: usize,
    floor: f64,
    observer: &mut dyn FnMut(usize, &Vector),
) -> Result<CgReport> {
    let n = a.dim();
    if g.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: g.len(),
        });
    }
    if !(rel_tol >= 0.0 && rel_tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("CG tolerance {rel_tol} is invalid")));
    }
    crate::error::ensure_finite("g", g)?;

    let target = rel_tol * g.norm();
    let mut d = Vector::zeros(n);
    if g.norm() == 0.0 {
        return Ok(CgReport {
            solution: d,
            residual: g.clone(),
            iterations: 0,
            matvecs: 0,
            converged: true,
            target,
        });
    }

    let mut r = g.clone();
    let mut p = -&r;
    let mut rr = r.norm_squared();
    let mut iterations = 0;
    let mut matvecs = 0;
    loop {
        if rr.sqrt() <= target {
            let fresh = a.apply(&d) + g;
            matvecs += 1;
            if fresh.norm() <= target {
                return Ok(CgReport {
                    solution: d,
                    residual: fresh,
                    iterations,
                    matvecs,
                    converged: true,
                    target,
                });
            }
            // Recursive residual drifted; restart from the true one.
            r = fresh;
            p = -&r;
            rr = r.norm_squared();
        }
        if iterations >= max_iter {
            let fresh = if iterations == 0 { g.clone() } else {
                matvecs += 1;
                a.apply(&d) + g
            };
            let converged = fresh.norm() <= target;
            return Ok(CgReport {
                solution: d,
                residual: fresh,
                iterations,
                matvecs,
                converged,
                target,
            });
        }
        let ap = a.apply(&p);
        matvecs += 1;
        let curvature = p.dot(&ap);
        let pn = p.norm();
        if curvature <= floor * pn * pn || !curvature.is_finite() {
            return Err(Error::NonPositiveCurvature {
                curvature: curvature / (pn * pn),
                iteration: iterations,
                direction: p / pn,
            });
        }
        let alpha = rr / curvature;
        d.axpy(alpha, &p, 1.0);
        r.axpy(alpha, &ap, 1.0);
        iterations += 1;
        observer(iterations, &d);
        let rr_next = r.norm_squared();
        let beta = rr_next / rr;
        p *= beta;
        p -= &r;
        rr = rr_next;
    }
}

/// Relative tolerance that makes `‖H d + g‖ ≤ (η/2)‖d‖` follow from
/// `‖H d + g‖ ≤ τ‖g‖` whenever `‖H‖ ≤ 2L_g + 2δ_h + c`.
pub fn cg_relative_tolerance(eta: f64, lipschitz_grad: f64, delta_h: f64, c: f64) -> f64 {
    let s = 0.5 * eta;
    s / (2.0 * lipschitz_grad + 2.0 * delta_h + c + s)
}

/// Tolerance for the strongly convex solver, where the target slope is
/// `μ‖g‖^θ/2`.
pub fn sc_cg_tolerance(mu: f64, g_norm_theta: f64, lipschitz_grad: f64, delta_h: f64) -> f64 {
    let s = 0.5 * mu * g_norm_theta;
    s / (2.0 * lipschitz_grad + 2.0 * delta_h + s)
}

/// Iterations after which CG is guaranteed to reach relative residual `τ` on
/// an operator with condition number at most `κ`:
/// `⌈(√κ/2) ln(2√κ/τ)⌉`.
pub fn cg_iteration_budget(kappa: f64, rel_tol: f64) -> usize {
    let sk = kappa.max(1.0).sqrt();
    let k = 0.5 * sk * (2.0 * sk / rel_tol).ln();
    (k.ceil().max(1.0)) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Matrix;
    use nalgebra::dvector;

    #[test]
    fn identity_system_solves_in_one_iteration() {
        let a = Matrix::identity(3, 3);
        let g = dvector![1.0, -2.0, 0.5];
        let rep = cg_solve(&a, &g, 1e-12, 3).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.solution, -&g);
        assert_eq!(rep.residual_norm(), 0.0);
    }

    #[test]
    fn spd_two_by_two_terminates_in_two_steps() {
        let a = Matrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let g = dvector![1.0, 2.0];
        let rep = cg_solve(&a, &g, 1e-14, 2).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations <= 2);
        let exact = -a.lu().solve(&g).unwrap();
        assert!((rep.solution - exact).norm() < 1e-14);
    }

    #[test]
    fn indefinite_operator_is_reported() {
        let a = Matrix::from_diagonal(&dvector![1.0, -1.0]);
        let err = cg_solve(&a, &dvector![0.0, 1.0], 1e-10, 2).unwrap_err();
        match err {
            Error::NonPositiveCurvature { curvature, direction, .. } => {
                assert!(curvature < 0.0);
                assert!((direction.norm() - 1.0).abs() < 1e-15);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let rep = cg_solve(&Matrix::identity(2, 2), &Vector::zeros(2), 0.5, 2).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn tolerance_formulas() {
        assert!((cg_relative_tolerance(1.0, 1.0, 0.0, 4.0) - 1.0 / 13.0).abs() < 1e-15);
        assert!((sc_cg_tolerance(0.5, 1.0, 1.0, 0.0) - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(cg_relative_tolerance(0.0, 1.0, 0.0, 4.0), 0.0);
        assert_eq!(cg_iteration_budget(1.0, 0.5), 1);
    }
}
