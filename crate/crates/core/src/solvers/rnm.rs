//! Regularized Newton method for smooth unconstrained problems with inexact
//! derivatives.

use serde::{Deserialize, Serialize};

use super::bounds::{rnm_ck, rnm_ck_local, rnm_decrease_coefficient};
use super::pnm::CkMode;
use super::subproblem::{solve_subproblem, Model};
use super::{check_smooth_start, positive_finite};
use crate::error::{Error, Result};
use crate::linalg::{min_eigen, regularized_hessian, EigenMode, SymOperator};
use crate::oracles::{verify_estimate, EstimateContext, InexactnessPolicy, Oracle, OracleMode};
use crate::problem::{CompositeProblem, Regularizer};
use crate::rng;
use crate::trace::{Certificate, IterationRecord, SolverTrace, StepKind, Termination};
use crate::Vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RnmConfig {
    pub gamma: f64,
    pub gamma_bar: f64,
    pub eta: f64,
    pub eta_rate: f64,
    pub eps: f64,
    pub max_iter: usize,
    pub ck_mode: CkMode,
    pub c_min: f64,
    pub eigen_mode: EigenMode,
    pub eigen_accuracy: f64,
    pub oracle: InexactnessPolicy,
    pub certificates: bool,
}

impl Default for RnmConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            gamma_bar: 2.0,
            eta: 0.5,
            eta_rate: 1.0,
            eps: 1e-6,
            max_iter: 10_000,
            ck_mode: CkMode::Global,
            c_min: 1e-8,
            eigen_mode: EigenMode::Auto,
            eigen_accuracy: 1e-3,
            oracle: InexactnessPolicy::exact(),
            certificates: true,
        }
    }
}

impl RnmConfig {
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
        positive_finite("eps", self.eps)?;
        positive_finite("c_min", self.c_min)?;
        positive_finite("eigen_accuracy", self.eigen_accuracy)?;
        self.oracle.validate(0.5)
    }

    pub fn eta_at(&self, k: usize) -> f64 {
        self.eta * self.eta_rate.powi(k.min(i32::MAX as usize) as i32)
    }
}

/// Runs the regularized Newton method from `x0` on a problem with `h ≡ 0`.
pub fn rnm_run(problem: &CompositeProblem, config: &RnmConfig, x0: &Vector) -> Result<SolverTrace> {
    config.validate()?;
    check_smooth_start(problem, x0)?;
    let audited = problem.audited();
    let oracle = Oracle::new(&audited, config.oracle.clone())?;
    let raw = problem.smooth();
    let lg = raw.constants().lipschitz_grad;
    let ctx = EstimateContext::Unconstrained { eps: config.eps };
    let diag = config.certificates;
    let probabilistic = config.oracle.mode == OracleMode::Subsampled;

    let mut trace = SolverTrace::new("rnm");
    let mut x = x0.clone();
    let mut f = diag.then(|| raw.value(&x));
    let mut previous_g_norm = None;
    for k in 0..=config.max_iter {
        let est = oracle.estimate(&x, k, &ctx, previous_g_norm)?;
        let g_norm = est.g.norm();
        previous_g_norm = Some(g_norm);
        let mut rec = IterationRecord::new(k, &x, g_norm, est.delta_g, est.delta_h);
        rec.gradient_samples = est.gradient_samples;
        rec.hessian_samples = est.hessian_samples();
        if diag {
            rec.exact_residual = Some(raw.gradient(&x).norm());
            rec.objective = f;
            rec.error = problem.minimizer.as_ref().map(|m| (&x - m).norm());
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
        if g_norm <= config.eps {
            if let Some(exact) = rec.exact_residual {
                let mut c = Certificate::le("terminal-gradient", exact, (1.0 + est.delta_g) * config.eps + 1e-12);
                if probabilistic {
                    c = c.informational();
                }
                rec.certify(c);
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
            CkMode::Global => rnm_ck(config.gamma, lg, eta, est.delta_g, est.delta_h)?,
            CkMode::Local => rnm_ck_local(config.gamma_bar, lg, eta, est.delta_g, est.delta_h)?.max(config.c_min),
        };
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
        let sol = solve_subproblem(&model, &Regularizer::Zero, eta, usize::MAX)?;
        let d = &sol.x - &x;
        let d_norm = d.norm();
        let r_norm = sol.xi.norm();

        rec.step = StepKind::Newton;
        rec.c = Some(c);
        rec.h_bound = Some(h_bound);
        rec.step_norm = Some(d_norm);
        rec.xi_norm = Some(r_norm);
        rec.cg_iterations = sol.inner_iterations;
        rec.eigen_matvecs = eig.matvecs;
        rec.eigen_value = Some(eig.value);
        rec.hessian_matvecs = est.hessian_matvecs();
        if eta > 0.0 {
            rec.certify(Certificate::le("step-criterion", r_norm, 0.5 * eta * d_norm));
        } else {
            let scale = 1e-10 * (1.0 + g_norm);
            rec.certify(Certificate::le("step-criterion", r_norm, scale));
        }
        if diag {
            let f_next = raw.value(&sol.x);
            let f_k = f.expect("diagnostics on");
            let coef = rnm_decrease_coefficient(c, lg, eta, est.delta_g, h_bound);
            let slack = 1e-9 * (1.0 + f_k.abs());
            let mut dec = Certificate::ge("decrease", f_k - f_next, coef * d_norm * d_norm - slack);
            if d_norm > 0.0 && coef <= 0.0 {
                dec.passed = false;
            }
            if probabilistic {
                dec = dec.informational();
            }
            rec.certify(dec);
            f = Some(f_next);
        }
        rec.counts = audited.counts();
        trace.records.push(rec);
        x = sol.x;
    }
    trace.final_x = x.iter().copied().collect();
    trace.audit = audited.counts();
    Ok(trace)
}

/// One regularized Newton direction for given `(g, H)`: CG to the tolerance
/// that enforces `‖Hd + g‖ ≤ (η/2)‖d‖`.
pub fn rnm_step(
    x: &Vector,
    g: &Vector,
    h: &dyn SymOperator,
    c: f64,
    h_bound: f64,
    eta: f64,
) -> Result<(Vector, Vector)> {
    let model = Model {
        center: x,
        g,
        h,
        c,
        h_bound,
    };
    let sol = solve_subproblem(&model, &Regularizer::Zero, eta, usize::MAX)?;
    Ok((&sol.x - x, sol.xi))
}
