//! Inexact minimization of the regularized model
//! `φ_k(x) = ⟨g_k, x − x_k⟩ + ½⟨x − x_k, H_k(x − x_k)⟩ + h(x)`.

use crate::error::{Error, Result};
use crate::linalg::{cg_relative_tolerance, cg_solve, SymOperator};
use crate::problem::Regularizer;
use crate::{Matrix, Vector};

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub x: Vector,
    /// Element of `∂φ_k(x)` with `‖ξ‖ ≤ (η/2)‖x − x_k‖`.
    pub xi: Vector,
    pub inner_iterations: usize,
}

/// Model subproblem data. `h_bound` bounds `‖H‖` and `c` is the strong
/// convexity modulus, `H ⪰ cI`.
pub struct Model<'a> {
    pub center: &'a Vector,
    pub g: &'a Vector,
    pub h: &'a dyn SymOperator,
    pub c: f64,
    pub h_bound: f64,
}

impl Model<'_> {
    /// `∇f_k(y) = g + H(y − x_k)`.
    fn smooth_gradient(&self, y: &Vector) -> Vector {
        self.g + self.h.apply(&(y - self.center))
    }
}

fn diagonal(m: &Matrix) -> Option<Vector> {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..n {
            if i != j && m[(i, j)] != 0.0 {
                return None;
            }
        }
    }
    Some(m.diagonal())
}

/// Returns `x_{k+1}` with an explicit subgradient witness.
///
/// For `η > 0` and `h ≢ 0` accelerated proximal gradient steps with stepsize
/// `1/h_bound` run until the witness `ξ = (y − y⁺)/t + ∇f_k(y⁺) − ∇f_k(y)`
/// meets the tolerance. `η = 0` asks for the exact minimizer, which is only
/// available for `h ≡ 0` or a separable `h` with diagonal `H`.
pub fn solve_subproblem(
    model: &Model<'_>,
    nonsmooth: &Regularizer,
    eta: f64,
    budget: usize,
) -> Result<SubproblemSolution> {
    let n = model.center.len();
    if !(eta >= 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!("eta = {eta} must lie in [0, 1)")));
    }
    if !(model.c > 0.0 && model.h_bound >= model.c) {
        return Err(Error::InvalidArgument(format!(
            "model needs 0 < c <= h_bound, got c = {}, h_bound = {}",
            model.c, model.h_bound
        )));
    }
    if eta == 0.0 {
        return exact_minimizer(model, nonsmooth);
    }
    if nonsmooth.is_zero() {
        let tol = cg_relative_tolerance(eta, 0.0, 0.0, model.h_bound);
        let rep = cg_solve(model.h, model.g, tol, n.max(1))?;
        if !rep.converged {
            return Err(Error::CgNotConverged {
                iterations: rep.iterations,
                achieved: rep.residual_norm() / model.g.norm(),
                target: tol,
            });
        }
        let d_norm = rep.solution.norm();
        if rep.residual_norm() > 0.5 * eta * d_norm {
            return Err(Error::StepCriterion(format!(
                "model residual {:e} exceeds (eta/2)|d| = {:e}",
                rep.residual_norm(),
                0.5 * eta * d_norm
            )));
        }
        return Ok(SubproblemSolution {
            x: model.center + &rep.solution,
            xi: rep.residual,
            inner_iterations: rep.iterations,
        });
    }

    let t = 1.0 / model.h_bound;
    let q = (model.c * t).sqrt();
    let beta = (1.0 - q) / (1.0 + q);
    let mut y = model.center.clone();
    let mut z_prev = model.center.clone();
    let mut best: Option<(f64, Vector)> = None;
    for it in 1..=budget {
        let grad_y = model.smooth_gradient(&y);
        let z = nonsmooth.prox_unchecked(&(&y - &grad_y * t), t);
        let grad_z = model.smooth_gradient(&z);
        let xi = (&y - &z) / t + &grad_z - &grad_y;
        let xi_norm = xi.norm();
        let target = 0.5 * eta * (&z - model.center).norm();
        if xi_norm <= target {
            return Ok(SubproblemSolution {
                x: z,
                xi,
                inner_iterations: it,
            });
        }
        if best.as_ref().is_none_or(|(b, _)| xi_norm < *b) {
            best = Some((xi_norm, z.clone()));
        }
        y = &z + (&z - &z_prev) * beta;
        z_prev = z;
    }
    let (xi_norm, best) = best.unwrap_or((f64::INFINITY, model.center.clone()));
    Err(Error::InnerBudgetExhausted {
        budget,
        target: 0.5 * eta * (&best - model.center).norm(),
        best,
        xi_norm,
    })
}

fn exact_minimizer(model: &Model<'_>, nonsmooth: &Regularizer) -> Result<SubproblemSolution> {
    let dense = model.h.dense();
    if nonsmooth.is_zero() {
        let d = match dense.clone().and_then(|m| m.cholesky()) {
            Some(ch) => -ch.solve(model.g),
            None => {
                let n = model.center.len();
                let rep = cg_solve(model.h, model.g, 1e-14, 2 * n + 10)?;
                if !rep.converged {
                    return Err(Error::CgNotConverged {
                        iterations: rep.iterations,
                        achieved: rep.residual_norm() / model.g.norm(),
                        target: 1e-14,
                    });
                }
                rep.solution
            }
        };
        let xi = model.h.apply(&d) + model.g;
        return Ok(SubproblemSolution {
            x: model.center + d,
            xi,
            inner_iterations: 1,
        });
    }
    let diag = dense.as_ref().and_then(diagonal).ok_or_else(|| {
        Error::InvalidConfig("eta = 0 with a nonsmooth term needs a diagonal model Hessian".into())
    })?;
    let mut x = model.center.clone();
    for i in 0..x.len() {
        let hi = diag[i];
        let u = Vector::from_element(1, model.center[i] - model.g[i] / hi);
        x[i] = nonsmooth.prox_unchecked(&u, 1.0 / hi)[0];
    }
    Ok(SubproblemSolution {
        x,
        xi: Vector::zeros(model.center.len()),
        inner_iterations: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    #[test]
    fn one_dimensional_soft_threshold() {
        let h = Matrix::from_element(1, 1, 2.0);
        let (x0, g) = (dvector![0.0], dvector![1.0]);
        let model = Model {
            center: &x0,
            g: &g,
            h: &h,
            c: 2.0,
            h_bound: 2.0,
        };
        let sol = solve_subproblem(&model, &Regularizer::L1 { lambda: 0.25 }, 0.0, 10).unwrap();
        assert_relative_eq!(sol.x[0], -0.375, epsilon = 1e-15);
        assert_eq!(sol.xi[0], 0.0);
    }

    #[test]
    fn smooth_model_reduces_to_linear_solve() {
        let h = Matrix::from_diagonal(&dvector![2.0, 4.0]);
        let (x0, g) = (dvector![1.0, 1.0], dvector![2.0, -4.0]);
        let model = Model {
            center: &x0,
            g: &g,
            h: &h,
            c: 2.0,
            h_bound: 4.0,
        };
        let sol = solve_subproblem(&model, &Regularizer::Zero, 0.5, 10).unwrap();
        let step = &sol.x - &x0;
        assert!(sol.xi.norm() <= 0.25 * step.norm());
        assert_relative_eq!(sol.x, dvector![0.0, 2.0], epsilon = 1e-12);
        let exact = solve_subproblem(&model, &Regularizer::Zero, 0.0, 10).unwrap();
        assert_relative_eq!(exact.x, dvector![0.0, 2.0], epsilon = 1e-14);
    }

    #[test]
    fn minimizer_is_a_fixed_point() {
        // |g| < λ, so x_k = 0 minimizes the model.
        let h = Matrix::from_element(1, 1, 1.0);
        let (x0, g) = (dvector![0.0], dvector![0.5]);
        let model = Model {
            center: &x0,
            g: &g,
            h: &h,
            c: 1.0,
            h_bound: 1.0,
        };
        let sol = solve_subproblem(&model, &Regularizer::L1 { lambda: 1.0 }, 0.5, 10).unwrap();
        assert_eq!(sol.inner_iterations, 1);
        assert_eq!(sol.x, x0);
        assert_eq!(sol.xi.norm(), 0.0);
    }

    #[test]
    fn fista_witness_meets_criterion() {
        let h = Matrix::from_row_slice(3, 3, &[3.0, 0.5, 0.0, 0.5, 2.0, 0.3, 0.0, 0.3, 1.5]);
        let (x0, g) = (dvector![0.2, -0.1, 0.4], dvector![1.0, -2.0, 0.3]);
        let model = Model {
            center: &x0,
            g: &g,
            h: &h,
            c: 1.0,
            h_bound: 4.0,
        };
        let reg = Regularizer::L1 { lambda: 0.4 };
        let sol = solve_subproblem(&model, &reg, 0.3, 1000).unwrap();
        assert!(sol.xi.norm() <= 0.15 * (&sol.x - &x0).norm());
        // ξ − ∇f_k(x) must be a subgradient of h at x.
        let v = &sol.xi - (&g + &h * (&sol.x - &x0));
        assert!(reg.subdifferential_contains(&sol.x, &v, 1e-9));
    }

    #[test]
    fn exact_solve_rejects_coupled_nonsmooth_model() {
        let h = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (x0, g) = (dvector![0.0, 0.0], dvector![1.0, 1.0]);
        let model = Model {
            center: &x0,
            g: &g,
            h: &h,
            c: 1.0,
            h_bound: 3.0,
        };
        assert!(matches!(
            solve_subproblem(&model, &Regularizer::L1 { lambda: 0.1 }, 0.0, 10),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn exhausted_budget_carries_best_iterate() {
        let h = Matrix::from_diagonal(&dvector![1.0, 100.0]);
        let (x0, g) = (dvector![5.0, 5.0], dvector![1.0, 1.0]);
        let model = Model {
            center: &x0,
            g: &g,
            h: &h,
            c: 1.0,
            h_bound: 100.0,
        };
        let err = solve_subproblem(&model, &Regularizer::L1 { lambda: 0.1 }, 1e-6, 2).unwrap_err();
        assert!(matches!(err, Error::InnerBudgetExhausted { budget: 2, .. }));
    }
}
