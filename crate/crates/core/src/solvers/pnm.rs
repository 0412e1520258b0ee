//! Proximal Newton-type method for `min f(x) + h(x)` with inexact `∇f` and
//! `∇²f`.

use serde::{Deserialize, Serialize};

use super::bounds::{ck_global, ck_local, pnm_decrease_coefficient};
use super::subproblem::{solve_subproblem, Model};
use super::{check_start, positive_finite};
use crate::error::{Error, Result};
use crate::linalg::{eigen_range, min_eigen, regularized_hessian, EigenMode};
use crate::oracles::{verify_estimate, EstimateContext, InexactnessPolicy, Oracle};
use crate::problem::CompositeProblem;
use crate::rng;
use crate::trace::{Certificate, IterationRecord, SolverTrace, StepKind, Termination};
use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CkMode {
    #[default]
    Global,
    /// Smaller regularization aimed at fast local convergence.
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PnmConfig {
    pub gamma: f64,
    pub gamma_bar: f64,
    /// `η₀`; `η_k = η₀·eta_rate^k`.
    pub eta: f64,
    pub eta_rate: f64,
    pub eps: f64,
    pub max_iter: usize,
    pub inner_budget: usize,
    pub ck_mode: CkMode,
    /// Floor applied to the local `c_k`.
    pub c_min: f64,
    /// Multiplies `c_k`. Anything other than 1 voids the guarantees; used to
    /// check that the certificates can fail.
    pub ck_scale: f64,
    pub eigen_mode: EigenMode,
    pub eigen_accuracy: f64,
    pub oracle: InexactnessPolicy,
    /// Out-of-band certificate checks with exact derivatives.
    pub certificates: bool,
}

impl Default for PnmConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            gamma_bar: 2.0,
            eta: 0.5,
            eta_rate: 1.0,
            eps: 1e-3,
            max_iter: 10_000,
            inner_budget: 10_000,
            ck_mode: CkMode::Global,
            c_min: 1e-8,
            ck_scale: 1.0,
            eigen_mode: EigenMode::Auto,
            eigen_accuracy: 1e-3,
            oracle: InexactnessPolicy::exact(),
            certificates: true,
        }
    }
}

impl PnmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma = {} must exceed 1", self.gamma)));
        }
        if !(self.gamma_bar > 1.0 && self.gamma_bar.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma_bar = {} must exceed 1", self.gamma_bar)));
        }
        if !(0.0..1.0).contains(&self.eta) {
            return Err(Error::InvalidConfig(format!("eta = {} must lie in [0, 1)", self.eta)));
        }
        if !(self.eta_rate > 0.0 && self.eta_rate <= 1.0) {
            return Err(Error::InvalidConfig(format!("eta_rate = {} must lie in (0, 1]", self.eta_rate)));
        }
        if self.inner_budget == 0 {
            return Err(Error::InvalidConfig("inner_budget must be positive".into()));
        }
        positive_finite("eps", self.eps)?;
        positive_finite("c_min", self.c_min)?;
        positive_finite("ck_scale", self.ck_scale)?;
        positive_finite("eigen_accuracy", self.eigen_accuracy)?;
        self.oracle.validate(0.5)
    }

    pub fn eta_at(&self, k: usize) -> f64 {
        self.eta * self.eta_rate.powi(k.min(i32::MAX as usize) as i32)
    }
}

/// Runs the proximal Newton-type method from `x0`.
pub fn pnm_run(problem: &CompositeProblem, config: &PnmConfig, x0: &Vector) -> Result<SolverTrace> {
    config.validate()?;
    check_start(problem, x0)?;
    let audited = problem.audited();
    let oracle = Oracle::new(&audited, config.oracle.clone())?;
    let lg = problem.smooth().constants().lipschitz_grad;
    let h = &problem.nonsmooth;
    let ctx = EstimateContext::Composite {
        nonsmooth: h,
        eps: config.eps,
    };
    let diag = config.certificates;

    let mut trace = SolverTrace::new("pnm");
    let mut x = x0.clone();
    let mut phi = diag.then(|| problem.objective(&x));
    for k in 0..=config.max_iter {
        let est = oracle.estimate(&x, k, &ctx, None)?;
        if est.gradient_fallback {
            trace.events.push(format!("k={k}: adversarial gradient fell back to the exact gradient"));
        }
        let gt_norm = (&x - h.prox_unchecked(&(&x - &est.g), 1.0)).norm();
        let mut rec = IterationRecord::new(k, &x, gt_norm, est.delta_g, est.delta_h);
        rec.gradient_samples = est.gradient_samples;
        rec.hessian_samples = est.hessian_samples();
        if diag {
            let exact = problem.exact_residual(&x).norm();
            rec.exact_residual = Some(exact);
            rec.objective = phi;
            rec.error = problem.minimizer.as_ref().map(|m| (&x - m).norm());
            let check = verify_estimate(audited.raw(), &x, &est, &ctx);
            // ‖G − G̃‖ ≤ ‖∇f − g‖ ≤ δ^g‖G̃‖
            rec.certify(Certificate::le(
                "residual-gap",
                (exact - gt_norm).abs(),
                check.gradient_error + 1e-12 * (1.0 + exact),
            ));
            rec.certify(Certificate::le("oracle-gradient", check.gradient_error, check.gradient_allowed));
            rec.certify(Certificate::le("oracle-hessian", check.hessian_error, check.hessian_allowed));
        }
        if gt_norm <= config.eps {
            if let Some(exact) = rec.exact_residual {
                rec.certify(Certificate::le(
                    "terminal-residual",
                    exact,
                    (1.0 + est.delta_g) * config.eps + 1e-12,
                ));
            }
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

        let eta = config.eta_at(k);
        let c = match config.ck_mode {
            CkMode::Global => ck_global(config.gamma, lg, eta, est.delta_g, est.delta_h)?,
            CkMode::Local => ck_local(config.gamma_bar, lg, eta, est.delta_g, est.delta_h)?.max(config.c_min),
        } * config.ck_scale;
        let seed = rng::derive(config.oracle.seed, k as u64, 0);
        let eig = min_eigen(&est.hessian, config.eigen_accuracy, config.oracle.confidence, seed, config.eigen_mode)?;
        let reg = regularized_hessian(&est.hessian, c, &eig);
        let h_bound = 2.0 * lg + 2.0 * est.delta_h + c + (eig.value - eig.lower_bound);
        let model = Model {
            center: &x,
            g: &est.g,
            h: &reg,
            c,
            h_bound,
        };
        let sol = solve_subproblem(&model, h, eta, config.inner_budget)?;
        let step_norm = (&sol.x - &x).norm();
        let xi_norm = sol.xi.norm();

        rec.step = StepKind::Prox;
        rec.c = Some(c);
        rec.h_bound = Some(h_bound);
        rec.step_norm = Some(step_norm);
        rec.xi_norm = Some(xi_norm);
        rec.inner_iterations = sol.inner_iterations;
        rec.eigen_matvecs = eig.matvecs;
        rec.eigen_value = Some(eig.value);
        rec.hessian_matvecs = est.hessian_matvecs();
        rec.certify(Certificate::le("inner-criterion", xi_norm, 0.5 * eta * step_norm));
        rec.certify(Certificate::le(
            "residual-vs-step",
            gt_norm,
            (1.0 + 0.5 * eta + h_bound) * step_norm * (1.0 + 1e-12),
        ));
        if diag {
            let (lo, hi) = eigen_range(&est.hessian_matrix());
            let h_norm = (lo + reg.shift).abs().max((hi + reg.shift).abs());
            rec.certify(Certificate::le("model-hessian-bound", h_norm, h_bound * (1.0 + 1e-12)));
            let phi_next = problem.objective(&sol.x);
            let phi_k = phi.expect("diagnostics on");
            let coef = pnm_decrease_coefficient(c, lg, eta, est.delta_g, h_bound);
            let slack = 1e-9 * (1.0 + phi_k.abs());
            let mut dec = Certificate::ge("decrease", phi_k - phi_next, coef * step_norm * step_norm - slack);
            if step_norm > 0.0 && coef <= 0.0 {
                dec.passed = false;
            }
            rec.certify(dec);
            rec.certify(Certificate::ge("decrease-coefficient", coef, 0.0).informational());
            rec.certify(Certificate::le("monotone", phi_next, phi_k + slack));
            phi = Some(phi_next);
        }
        rec.counts = audited.counts();
        trace.records.push(rec);
        x = sol.x;
    }
    trace.final_x = x.iter().copied().collect();
    trace.audit = audited.counts();
    Ok(trace)
}
