//! Newton-type method for strongly convex problems with gradient-adaptive
//! inexactness; converges locally with order `1 + θ`.

use serde::{Deserialize, Serialize};

use super::bounds::sc_mu;
use super::{check_smooth_start, positive_finite};
use crate::error::{Error, Result};
use crate::linalg::{cg_solve, eigen_range, min_eigen, sc_cg_tolerance, EigenMode};
use crate::oracles::{verify_estimate, EstimateContext, InexactnessPolicy, Oracle, OracleMode};
use crate::problem::CompositeProblem;
use crate::rng;
use crate::trace::{Certificate, IterationRecord, SolverTrace, StepKind, Termination};
use crate::Vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScConfig {
    pub theta: f64,
    /// Strong convexity modulus; taken from the problem constants when unset.
    pub sigma: Option<f64>,
    pub eps: f64,
    pub max_iter: usize,
    pub eigen_mode: EigenMode,
    pub eigen_accuracy: f64,
    pub oracle: InexactnessPolicy,
    pub certificates: bool,
}

impl Default for ScConfig {
    fn default() -> Self {
        Self {
            theta: 1.0,
            sigma: None,
            eps: 1e-12,
            max_iter: 200,
            eigen_mode: EigenMode::Auto,
            eigen_accuracy: 1e-3,
            oracle: InexactnessPolicy::exact(),
            certificates: true,
        }
    }
}

impl ScConfig {
    pub fn sigma_for(&self, problem: &CompositeProblem) -> Result<f64> {
        let sigma = self
            .sigma
            .unwrap_or_else(|| problem.smooth().constants().strong_convexity);
        if sigma > 0.0 && sigma.is_finite() {
            Ok(sigma)
        } else {
            Err(Error::InvalidConfig(format!(
                "the strongly convex solver needs sigma > 0, got {sigma}"
            )))
        }
    }

    pub fn validate(&self, sigma: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidConfig(format!("theta = {} must lie in [0, 1]", self.theta)));
        }
        positive_finite("eps", self.eps)?;
        positive_finite("eigen_accuracy", self.eigen_accuracy)?;
        self.oracle.validate(1.0)?;
        if self.oracle.delta_h >= sigma {
            return Err(Error::InvalidConfig(format!(
                "delta_h = {} must be below sigma = {sigma}",
                self.oracle.delta_h
            )));
        }
        Ok(())
    }
}

/// Runs the strongly convex Newton-type method from `x0`. When the problem
/// carries its minimizer the trace records `e_k = ‖x_k − x*‖` and whether
/// `e_{k+1} ≤ ½e_k` held.
pub fn sc_run(problem: &CompositeProblem, config: &ScConfig, x0: &Vector) -> Result<SolverTrace> {
    let sigma = config.sigma_for(problem)?;
    config.validate(sigma)?;
    check_smooth_start(problem, x0)?;
    let audited = problem.audited();
    let oracle = Oracle::new(&audited, config.oracle.clone())?;
    let raw = problem.smooth();
    let lg = raw.constants().lipschitz_grad;
    let theta = config.theta;
    let ctx = EstimateContext::StronglyConvex {
        sigma,
        lipschitz_grad: lg,
        theta,
        eps: config.eps,
    };
    let diag = config.certificates;
    let probabilistic = config.oracle.mode == OracleMode::Subsampled;
    let n = x0.len();

    let mut trace = SolverTrace::new("sc");
    let mut x = x0.clone();
    let mut previous_g_norm = None;
    let mut previous_error: Option<f64> = None;
    for k in 0..=config.max_iter {
        let est = oracle.estimate(&x, k, &ctx, previous_g_norm)?;
        let g_norm = est.g.norm();
        previous_g_norm = Some(g_norm);
        let mut rec = IterationRecord::new(k, &x, g_norm, est.delta_g, est.delta_h);
        rec.gradient_samples = est.gradient_samples;
        rec.hessian_samples = est.hessian_samples();
        let error = problem.minimizer.as_ref().map(|m| (&x - m).norm());
        rec.error = error;
        if let (Some(prev), Some(e)) = (previous_error, error) {
            if let Some(last) = trace.records.last_mut() {
                last.certify(Certificate::le("contraction", e, 0.5 * prev).informational());
            }
        }
        previous_error = error;
        if diag {
            let grad_norm = raw.gradient(&x).norm();
            rec.exact_residual = Some(grad_norm);
            rec.objective = Some(raw.value(&x));
            let check = verify_estimate(raw, &x, &est, &ctx);
            let mut cg = Certificate::le("oracle-gradient", check.gradient_error, check.gradient_allowed);
            let mut ch = Certificate::le("oracle-hessian", check.hessian_error, check.hessian_allowed);
            if probabilistic {
                cg = cg.informational();
                ch = ch.informational();
            }
            rec.certify(cg);
            rec.certify(ch);
            let mut ratio = Certificate::le("gradient-ratio", grad_norm, (1.0 + est.delta_g) * g_norm * (1.0 + 1e-12));
            if probabilistic {
                ratio = ratio.informational();
            }
            rec.certify(ratio);
            if let Some(e) = error {
                rec.certify(Certificate::le("error-bound", e, grad_norm / sigma * (1.0 + 1e-9) + 1e-14));
            }
        }
        if g_norm <= config.eps {
            rec.counts = audited.counts();
            trace.records.push(rec);
            trace.termination = Termination::Converged;
            break;
        }
        if k == config.max_iter {
            rec.counts = audited.counts();
            trace.records.push(rec);
            break;
        }
        if config.oracle.mode != OracleMode::Exact {
            let cap = g_norm.powf(theta) * (1.0 + 1e-12);
            let mut c = Certificate::le("oracle-levels", est.delta_g.max(est.delta_h), cap);
            if probabilistic {
                c = c.informational();
            }
            rec.certify(c);
        }

        let mu = sc_mu(sigma, est.delta_h, g_norm, theta)?;
        let g_theta = if theta == 0.0 { 1.0 } else { g_norm.powf(theta) };
        let seed = rng::derive(config.oracle.seed, k as u64, 0);
        let eig = min_eigen(&est.hessian, config.eigen_accuracy, config.oracle.confidence, seed, config.eigen_mode)?;
        if eig.lower_bound <= 0.0 {
            return Err(Error::StepCriterion(format!(
                "estimated Hessian is not positive definite (lambda_min >= {:e})",
                eig.lower_bound
            )));
        }
        let tol = sc_cg_tolerance(mu, g_theta, lg, est.delta_h);
        let rep = cg_solve(&est.hessian, &est.g, tol, n)?;
        if !rep.converged {
            return Err(Error::CgNotConverged {
                iterations: rep.iterations,
                achieved: rep.residual_norm() / g_norm,
                target: tol,
            });
        }
        let d = rep.solution.clone();
        let d_norm = d.norm();
        let r_norm = rep.residual_norm();
        rec.step = StepKind::Newton;
        rec.mu = Some(mu);
        rec.step_norm = Some(d_norm);
        rec.xi_norm = Some(r_norm);
        rec.cg_iterations = rep.iterations;
        rec.cg_matvecs = rep.matvecs;
        rec.eigen_matvecs = eig.matvecs;
        rec.eigen_value = Some(eig.value);
        rec.hessian_matvecs = est.hessian_matvecs();
        rec.certify(Certificate::le("step-criterion", r_norm, 0.5 * mu * g_theta * d_norm));
        if diag {
            let (lo, hi) = eigen_range(&est.hessian_matrix());
            let q_norm = lo.abs().max(hi.abs());
            let mut cmin = Certificate::ge("hessian-lower", lo, sigma - est.delta_h - 1e-10 * (1.0 + q_norm));
            let mut cmax = Certificate::le("hessian-upper", q_norm, (lg + est.delta_h) * (1.0 + 1e-12));
            if probabilistic {
                cmin = cmin.informational();
                cmax = cmax.informational();
            }
            rec.certify(cmin);
            rec.certify(cmax);
            rec.certify(Certificate::le(
                "gradient-vs-step",
                g_norm,
                (q_norm + 0.5 * mu * g_theta) * d_norm * (1.0 + 1e-12),
            ));
        }
        rec.counts = audited.counts();
        trace.records.push(rec);
        x += d;
    }
    trace.final_x = x.iter().copied().collect();
    trace.audit = audited.counts();
    Ok(trace)
}
