//! Two-phase regularized Newton / negative curvature method for
//! `(ε_g, ε_h)`-second-order stationary points.

use serde::{Deserialize, Serialize};

use super::bounds::{nc_decrease_constant, sol_decrease_constant, theoretical_bounds_k3};
use super::{check_smooth_start, positive_finite};
use crate::error::{Error, Result};
use crate::linalg::{
    cg_iteration_budget, cg_solve_with_floor, eigen_range, lanczos_budget, min_eigen, CgReport,
    EigenEstimate, EigenMode, Shifted,
};
use crate::oracles::{verify_estimate, DerivativeEstimate, EstimateContext, InexactnessPolicy, Oracle, OracleMode};
use crate::problem::CompositeProblem;
use crate::rng;
use crate::trace::{Certificate, IterationRecord, SolverTrace, StepKind, Termination};
use crate::Vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rn2cmConfig {
    pub eps_g: f64,
    pub mu_hat: f64,
    pub eta: f64,
    /// Failure probability `δ` of each eigenvalue estimate.
    pub eigen_confidence: f64,
    pub eigen_mode: EigenMode,
    /// Fresh-seed eigen reruns after CG contradicts an estimate.
    pub eigen_retries: usize,
    pub max_iter: usize,
    /// Only the mode and seed are used; accuracies are `ε_g/3` and `ε_h/18`.
    pub oracle: InexactnessPolicy,
    pub certificates: bool,
}

impl Default for Rn2cmConfig {
    fn default() -> Self {
        Self {
            eps_g: 1e-2,
            mu_hat: 1.0,
            eta: 1.0,
            eigen_confidence: 0.05,
            eigen_mode: EigenMode::Auto,
            eigen_retries: 3,
            max_iter: 100_000,
            oracle: InexactnessPolicy::exact(),
            certificates: true,
        }
    }
}

impl Rn2cmConfig {
    /// `(L_h, ε_h)` after validating against the problem constants.
    pub fn resolve(&self, problem: &CompositeProblem) -> Result<(f64, f64)> {
        let lh = problem
            .smooth()
            .constants()
            .lipschitz_hess
            .ok_or(Error::MissingConstant("Hessian Lipschitz constant L_h"))?;
        positive_finite("lipschitz_hess", lh)?;
        positive_finite("eps_g", self.eps_g)?;
        if self.eps_g >= lh {
            return Err(Error::InvalidConfig(format!(
                "eps_g = {} must lie below L_h = {lh}",
                self.eps_g
            )));
        }
        positive_finite("mu_hat", self.mu_hat)?;
        positive_finite("eta", self.eta)?;
        if !(self.eigen_confidence > 0.0 && self.eigen_confidence < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eigen_confidence = {} must lie in (0, 1)",
                self.eigen_confidence
            )));
        }
        if self.oracle.mode == OracleMode::Subsampled && problem.finite_sum().is_none() {
            return Err(Error::InvalidConfig("subsampled oracles need a finite-sum problem".into()));
        }
        Ok((lh, (lh * self.eps_g).sqrt()))
    }
}

/// `d = −sign(gᵀp)p` with `sign(0) = +1`, and `α = 17ε_h/(12L_h)`.
pub fn nc_step(g: &Vector, p: &Vector, lh: f64, eps_h: f64) -> (Vector, f64) {
    let s = if g.dot(p) >= 0.0 { 1.0 } else { -1.0 };
    (p * (-s), 17.0 * eps_h / (12.0 * lh))
}

/// `α = √2 ε_g^{1/2}/(√(3(L_h + η))‖d‖)`.
pub fn sol_step_size(eps_g: f64, lh: f64, eta: f64, d_norm: f64) -> f64 {
    2f64.sqrt() * eps_g.sqrt() / ((3.0 * (lh + eta)).sqrt() * d_norm)
}

/// Relative CG tolerance for `‖(Q + 2ε_hI)d + g‖ ≤ μ̂ε_h‖d‖`.
pub fn sol_cg_tolerance(lg: f64, eps_h: f64, mu_hat: f64) -> f64 {
    let s = mu_hat * eps_h;
    s / (lg + eps_h / 18.0 + 2.0 * eps_h + s)
}

/// CG iteration budget for the shifted system, whose condition number is at
/// most `(L_g + ε_h/18 + 2ε_h)/(ε_h/2)`.
pub fn sol_cg_budget(lg: f64, eps_h: f64, mu_hat: f64) -> usize {
    let kappa = (lg + eps_h / 18.0 + 2.0 * eps_h) / (0.5 * eps_h);
    cg_iteration_budget(kappa, sol_cg_tolerance(lg, eps_h, mu_hat))
}

struct Direction {
    eig: EigenEstimate,
    eigen_matvecs: usize,
    cg: Option<CgReport>,
}

/// Runs the two-phase method from `x0`.
pub fn rn2cm_run(problem: &CompositeProblem, config: &Rn2cmConfig, x0: &Vector) -> Result<SolverTrace> {
    let (lh, eps_h) = config.resolve(problem)?;
    check_smooth_start(problem, x0)?;
    let audited = problem.audited();
    let oracle = Oracle::new(&audited, config.oracle.clone())?;
    let raw = problem.smooth();
    let lg = raw.constants().lipschitz_grad;
    let eps_g = config.eps_g;
    let mu_hat = config.mu_hat;
    let ctx = EstimateContext::Sosp { eps_g, eps_h };
    let diag = config.certificates;
    let n = x0.len();
    let cg_cap = n.min(sol_cg_budget(lg, eps_h, mu_hat));
    let tol = sol_cg_tolerance(lg, eps_h, mu_hat);
    let c_nc = nc_decrease_constant(lh);
    let c_sol = sol_decrease_constant(lh, config.eta);
    let probabilistic = config.oracle.mode == OracleMode::Subsampled;

    let mut trace = SolverTrace::new("rn2cm");
    let mut x = x0.clone();
    for k in 0..=config.max_iter {
        let est = oracle.estimate(&x, k, &ctx, None)?;
        let g_norm = est.g.norm();
        let phase = if g_norm >= eps_g { 1 } else { 2 };
        let mut rec = IterationRecord::new(k, &x, g_norm, est.delta_g, est.delta_h);
        rec.phase = Some(phase);
        rec.gradient_samples = est.gradient_samples;
        rec.hessian_samples = est.hessian_samples();
        let f_k = diag.then(|| raw.value(&x));
        if diag {
            rec.objective = f_k;
            rec.exact_residual = Some(raw.gradient(&x).norm());
            let check = verify_estimate(raw, &x, &est, &ctx);
            let mut cg = Certificate::le("oracle-gradient", check.gradient_error, check.gradient_allowed);
            let mut ch = Certificate::le("oracle-hessian", check.hessian_error, check.hessian_allowed);
            if probabilistic {
                cg = cg.informational();
                ch = ch.informational();
            }
            rec.certify(cg);
            rec.certify(ch);
        }
        if k == config.max_iter {
            rec.counts = audited.counts();
            trace.records.push(rec);
            break;
        }

        let dir = direction(&est, config, k, eps_h, tol, phase, &mut trace.events)?;
        rec.eigen_value = Some(dir.eig.value);
        rec.eigen_matvecs = dir.eigen_matvecs;
        let negative = dir.eig.value < -eps_h;
        if let Some(rep) = &dir.cg {
            rec.cg_iterations = rep.iterations;
            rec.cg_matvecs = rep.matvecs;
            if rep.iterations > cg_cap {
                trace.events.push(format!(
                    "k={k}: CG used {} iterations, above the budget {cg_cap}",
                    rep.iterations
                ));
            }
        }

        let mut x_next = None;
        if negative {
            let (d, alpha) = nc_step(&est.g, &dir.eig.vector, lh, eps_h);
            rec.step = StepKind::Nc;
            rec.alpha = Some(alpha);
            rec.step_norm = Some(alpha);
            let xn = &x + &d * alpha;
            if diag {
                let h = raw.hessian(&x);
                let p = &dir.eig.vector;
                let rayleigh = p.dot(&(&h * p));
                let mut c = Certificate::le("rayleigh", rayleigh, -(17.0 / 18.0) * dir.eig.value.abs() + 1e-12);
                if probabilistic {
                    c = c.informational();
                }
                rec.certify(c);
                let f_next = raw.value(&xn);
                let f0 = f_k.expect("diagnostics on");
                let mut c = Certificate::ge(
                    "nc-decrease",
                    f0 - f_next,
                    c_nc * eps_g.powf(1.5) - 1e-10 * (1.0 + f0.abs()),
                );
                if probabilistic {
                    c = c.informational();
                }
                rec.certify(c);
            }
            x_next = Some(xn);
        } else if phase == 2 {
            rec.step = StepKind::Stop;
            if diag {
                let grad = raw.gradient(&x).norm();
                let (lo, _) = eigen_range(&raw.hessian(&x));
                terminal_certificates(&mut rec, grad, lo, eps_g, lh, mu_hat, probabilistic);
                let mut a = Certificate::le("terminal-gradient-phase2", grad, 4.0 / 3.0 * eps_g);
                let mut b = Certificate::ge("terminal-curvature-phase2", lo, -(14.0 / 9.0) * eps_h);
                if probabilistic {
                    a = a.informational();
                    b = b.informational();
                }
                rec.certify(a);
                rec.certify(b);
            }
            trace.termination = Termination::SecondPhase;
        } else {
            let rep = dir.cg.as_ref().expect("SOL branch solves");
            let d = &rep.solution;
            let d_norm = d.norm();
            rec.step_norm = Some(d_norm);
            rec.xi_norm = Some(rep.residual_norm());
            rec.certify(Certificate::le("step-criterion", rep.residual_norm(), mu_hat * eps_h * d_norm));
            if d_norm <= 2.0 * eps_g / eps_h {
                rec.step = StepKind::TerminalSol;
                rec.alpha = Some(1.0);
                let x_out = &x + d;
                rec.certify(Certificate::le(
                    "short-step-guard",
                    g_norm,
                    2.0 * (lg + (37.0 / 18.0 + mu_hat) * eps_h) * eps_g / eps_h,
                ));
                if diag {
                    let grad = raw.gradient(&x_out).norm();
                    let (lo, _) = eigen_range(&raw.hessian(&x_out));
                    terminal_certificates(&mut rec, grad, lo, eps_g, lh, mu_hat, probabilistic);
                }
                trace.termination = Termination::ShortStep;
                x = x_out;
            } else {
                let alpha = sol_step_size(eps_g, lh, config.eta, d_norm);
                rec.step = StepKind::Sol;
                rec.alpha = Some(alpha);
                rec.certify(Certificate::le(
                    "sol-step-size",
                    alpha * alpha,
                    lh / (6.0 * (lh + config.eta)),
                ));
                let xn = &x + d * alpha;
                if diag {
                    let f_next = raw.value(&xn);
                    let f0 = f_k.expect("diagnostics on");
                    let mut c = Certificate::ge(
                        "sol-decrease",
                        f0 - f_next,
                        c_sol * eps_g.powf(1.5) - 1e-10 * (1.0 + f0.abs()),
                    );
                    if probabilistic {
                        c = c.informational();
                    }
                    rec.certify(c);
                }
                x_next = Some(xn);
            }
        }
        rec.hessian_matvecs = est.hessian_matvecs();
        rec.counts = audited.counts();
        trace.records.push(rec);
        match x_next {
            Some(xn) => x = xn,
            None => break,
        }
    }
    trace.final_x = x.iter().copied().collect();
    trace.audit = audited.counts();
    Ok(trace)
}

fn terminal_certificates(
    rec: &mut IterationRecord,
    grad_norm: f64,
    lambda_min: f64,
    eps_g: f64,
    lh: f64,
    mu_hat: f64,
    probabilistic: bool,
) {
    let mut a = Certificate::le("terminal-gradient", grad_norm, (58.0 / 9.0 + 2.0 * mu_hat) * eps_g);
    let mut b = Certificate::ge("terminal-curvature", lambda_min, -(32.0 / 9.0) * (lh * eps_g).sqrt());
    if probabilistic {
        a = a.informational();
        b = b.informational();
    }
    rec.certify(a);
    rec.certify(b);
}

/// Eigen estimate and, on the SOL branch, the CG solve. CG curvature below
/// `ε_h/2` contradicts the estimate and triggers a fresh-seed rerun.
fn direction(
    est: &DerivativeEstimate<'_>,
    config: &Rn2cmConfig,
    k: usize,
    eps_h: f64,
    tol: f64,
    phase: u8,
    events: &mut Vec<String>,
) -> Result<Direction> {
    let n = est.g.len();
    let mut eigen_matvecs = 0;
    let mut attempt = 0;
    loop {
        let seed = rng::derive(config.oracle.seed, k as u64, attempt as u64);
        let eig = min_eigen(&est.hessian, eps_h, config.eigen_confidence, seed, config.eigen_mode)?;
        eigen_matvecs += eig.matvecs;
        if eig.value < -eps_h || phase == 2 {
            return Ok(Direction {
                eig,
                eigen_matvecs,
                cg: None,
            });
        }
        let shifted = Shifted {
            inner: &est.hessian,
            shift: 2.0 * eps_h,
        };
        match cg_solve_with_floor(&shifted, &est.g, tol, 2 * n + 10, 0.5 * eps_h, &mut |_, _| {}) {
            Ok(rep) => {
                if !rep.converged {
                    return Err(Error::CgNotConverged {
                        iterations: rep.iterations,
                        achieved: rep.residual_norm() / est.g.norm(),
                        target: tol,
                    });
                }
                return Ok(Direction {
                    eig,
                    eigen_matvecs,
                    cg: Some(rep),
                });
            }
            Err(Error::NonPositiveCurvature { curvature, .. }) if attempt < config.eigen_retries => {
                events.push(format!(
                    "k={k}: CG found curvature {curvature:e} below eps_h/2 on the shifted system; rerunning the eigen estimate"
                ));
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Operation totals of a second-order run against the per-iteration budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub iterations: usize,
    pub total_cg_iterations: usize,
    pub total_eigen_matvecs: usize,
    pub max_cg_iterations: usize,
    pub max_eigen_matvecs: usize,
    /// `min{n, CG budget}`.
    pub cg_budget: usize,
    /// `min{n, Lanczos budget}`.
    pub eigen_budget: usize,
    pub cg_ratio: f64,
    pub eigen_ratio: f64,
    pub within_budget: bool,
    /// `Σ_k |S_{g,k}| + |S_h|·(Hessian matvecs at k)` for subsampled runs.
    pub sample_operations: Option<usize>,
    /// `K̄₃·(max|S_g| + max|S_h|·max per-iteration matvecs)`.
    pub sample_envelope: Option<f64>,
}

/// Counts operations in `trace` and compares them with the budgets implied by
/// `config` for a problem of dimension `n`. `k3` enables the finite-sum
/// envelope.
pub fn operation_accounting(
    trace: &SolverTrace,
    n: usize,
    lg: f64,
    lh: f64,
    config: &Rn2cmConfig,
    k3: Option<u64>,
) -> ComplexityReport {
    let eps_h = (lh * config.eps_g).sqrt();
    let cg_budget = n.min(sol_cg_budget(lg, eps_h, config.mu_hat));
    let eigen_budget = lanczos_budget(n, eps_h, config.eigen_confidence);
    let steps: Vec<&IterationRecord> = trace.records.iter().filter(|r| r.eigen_value.is_some()).collect();
    let total_cg_iterations = steps.iter().map(|r| r.cg_iterations).sum();
    let total_eigen_matvecs = steps.iter().map(|r| r.eigen_matvecs).sum();
    let max_cg_iterations = steps.iter().map(|r| r.cg_iterations).max().unwrap_or(0);
    let max_eigen_matvecs = steps.iter().map(|r| r.eigen_matvecs).max().unwrap_or(0);
    let sampled = steps.iter().any(|r| r.hessian_samples > 0);
    let (sample_operations, sample_envelope) = if sampled {
        let ops: usize = steps
            .iter()
            .map(|r| r.gradient_samples + r.hessian_samples * r.hessian_matvecs)
            .sum();
        let max_sg = steps.iter().map(|r| r.gradient_samples).max().unwrap_or(0);
        let max_sh = steps.iter().map(|r| r.hessian_samples).max().unwrap_or(0);
        let max_mv = steps.iter().map(|r| r.hessian_matvecs).max().unwrap_or(0);
        let env = k3.map(|k3| k3 as f64 * (max_sg + max_sh * max_mv) as f64);
        (Some(ops), env)
    } else {
        (None, None)
    };
    let envelope_ok = match (sample_operations, sample_envelope) {
        (Some(ops), Some(env)) => ops as f64 <= env,
        _ => true,
    };
    ComplexityReport {
        iterations: trace.iterations(),
        total_cg_iterations,
        total_eigen_matvecs,
        max_cg_iterations,
        max_eigen_matvecs,
        cg_budget,
        eigen_budget,
        cg_ratio: max_cg_iterations as f64 / cg_budget as f64,
        eigen_ratio: max_eigen_matvecs as f64 / eigen_budget as f64,
        within_budget: max_cg_iterations <= cg_budget && max_eigen_matvecs <= eigen_budget && envelope_ok,
        sample_operations,
        sample_envelope,
    }
}

/// `K̄₃` for a run from `x0`; needs the problem's lower bound.
pub fn k3_for(problem: &CompositeProblem, config: &Rn2cmConfig, x0: &Vector) -> Result<u64> {
    let (lh, _) = config.resolve(problem)?;
    let f0 = problem.smooth().value(x0);
    Ok(theoretical_bounds_k3(f0, problem.lower_bound, lh, config.eta, config.eps_g)?.k3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    #[test]
    fn nc_step_sign_convention() {
        let p = dvector![1.0, 0.0];
        let (d, alpha) = nc_step(&dvector![-1.0, 3.0], &p, 1.0, 1.0);
        assert_eq!(d, p);
        assert_relative_eq!(alpha, 17.0 / 12.0);
        let (d0, _) = nc_step(&dvector![0.0, 3.0], &p, 1.0, 1.0);
        assert_eq!(d0, -p.clone());
        assert_eq!(dvector![0.0, 3.0].dot(&d0), 0.0);
    }

    #[test]
    fn sol_step_examples() {
        let eps_g: f64 = 0.01;
        let eps_h = (1.0 * eps_g).sqrt();
        assert_relative_eq!(eps_h, 0.1);
        assert_relative_eq!(2.0 * eps_g / eps_h, 0.2, epsilon = 1e-15);
        assert_relative_eq!(sol_step_size(eps_g, 2.0, 1.0, 1.0), 2f64.sqrt() * eps_g.sqrt() / 3.0);
    }

    #[test]
    fn shifted_identity_solves_in_one_iteration() {
        let eps_h = 0.1;
        let q = crate::Matrix::identity(3, 3);
        let shifted = Shifted {
            inner: &q,
            shift: 2.0 * eps_h,
        };
        let g = dvector![1.0, -2.0, 0.5];
        let rep = cg_solve_with_floor(&shifted, &g, sol_cg_tolerance(1.0, eps_h, 1.0), 3, 0.5 * eps_h, &mut |_, _| {})
            .unwrap();
        assert_eq!(rep.iterations, 1);
        assert_relative_eq!(rep.solution, -g / (1.0 + 2.0 * eps_h), epsilon = 1e-14);
    }
}
