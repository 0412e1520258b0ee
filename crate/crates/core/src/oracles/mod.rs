//! Inexact derivative oracles.
//!
//! An [`Oracle`] turns an [`InexactnessPolicy`] into per-iteration estimates
//! `(g_k, Q_k)` together with the levels `(δ^g_k, δ^h_k)` they certify. The
//! reference quantity of the gradient bound depends on the
//! [`EstimateContext`]: `‖G̃(x)‖` for composite problems, `‖g‖` for smooth
//! ones, and the absolute level `ε_g/3` when targeting second-order points.

mod adversarial;
mod sampling;

pub use adversarial::{
    adversarial_gradient, adversarial_hessian, hessian_error, power_norm, GradientNoiseModel,
    NoisyGradient, MAX_HALVINGS,
};
pub use sampling::{
    gradient_sample_bound, gradient_sample_size, hessian_sample_bound, hessian_sample_size,
    sample_indices, sosp_sample_sizes, subsample_estimate, SampledHessian,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, SymOperator};
use crate::problem::{Audited, Regularizer, SmoothObjective};
use crate::rng::{self, Purpose};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMode {
    #[default]
    Exact,
    Adversarial,
    Subsampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Schedule {
    #[default]
    Constant,
    Geometric { rate: f64 },
    /// `min{δ̄, ‖g_k‖^θ}`.
    GradientAdaptive,
}

fn default_confidence() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InexactnessPolicy {
    #[serde(default)]
    pub mode: OracleMode,
    /// `δ̄^g`.
    #[serde(default)]
    pub delta_g: f64,
    /// `δ̄^h`.
    #[serde(default)]
    pub delta_h: f64,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub theta: f64,
    /// `δ̄`, failure probability per subsampled estimate.
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for InexactnessPolicy {
    fn default() -> Self {
        Self::exact()
    }
}

impl InexactnessPolicy {
    pub fn exact() -> Self {
        Self {
            mode: OracleMode::Exact,
            delta_g: 0.0,
            delta_h: 0.0,
            schedule: Schedule::Constant,
            theta: 0.0,
            confidence: default_confidence(),
            seed: 0,
        }
    }

    pub fn adversarial(delta_g: f64, delta_h: f64, seed: u64) -> Self {
        Self {
            mode: OracleMode::Adversarial,
            delta_g,
            delta_h,
            seed,
            ..Self::exact()
        }
    }

    pub fn subsampled(delta_g: f64, delta_h: f64, confidence: f64, seed: u64) -> Self {
        Self {
            mode: OracleMode::Subsampled,
            delta_g,
            delta_h,
            confidence,
            seed,
            ..Self::exact()
        }
    }

    pub fn with_schedule(mut self, schedule: Schedule, theta: f64) -> Self {
        self.schedule = schedule;
        self.theta = theta;
        self
    }

    /// Checks ranges; `max_delta_g` is `½` for the nonconvex solvers and `1`
    /// for the strongly convex one.
    pub fn validate(&self, max_delta_g: f64) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.delta_g >= 0.0 && self.delta_g < max_delta_g) {
            return bad(format!("delta_g = {} must lie in [0, {max_delta_g})", self.delta_g));
        }
        if self.mode != OracleMode::Exact && !(self.delta_h > 0.0 && self.delta_h.is_finite()) {
            return bad(format!("delta_h = {} must be positive", self.delta_h));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad(format!("theta = {} must lie in [0, 1]", self.theta));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return bad(format!("confidence = {} must lie in (0, 1)", self.confidence));
        }
        if let Schedule::Geometric { rate } = self.schedule {
            if !(rate > 0.0 && rate <= 1.0) {
                return bad(format!("geometric rate {rate} must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    /// Scheduled `(δ^g_k, δ^h_k)`. `reference` is a lower bound on `‖g_k‖`
    /// used by the adaptive schedule.
    pub fn levels(&self, k: usize, reference: Option<f64>) -> (f64, f64) {
        if self.mode == OracleMode::Exact {
            return (0.0, 0.0);
        }
        match self.schedule {
            Schedule::Constant => (self.delta_g, self.delta_h),
            Schedule::Geometric { rate } => {
                let f = rate.powi(k.min(i32::MAX as usize) as i32);
                (self.delta_g * f, (self.delta_h * f).max(f64::MIN_POSITIVE))
            }
            Schedule::GradientAdaptive => match reference {
                Some(r) => {
                    let cap = r.powf(self.theta);
                    (self.delta_g.min(cap), self.delta_h.min(cap).max(f64::MIN_POSITIVE))
                }
                None => (self.delta_g, self.delta_h),
            },
        }
    }
}

/// What the gradient error is measured against.
#[derive(Debug, Clone, Copy)]
pub enum EstimateContext<'p> {
    /// `‖g − ∇f‖ ≤ δ^g‖G̃(x)‖`; `eps` is the stopping tolerance used to size
    /// samples.
    Composite { nonsmooth: &'p Regularizer, eps: f64 },
    /// `‖g − ∇f‖ ≤ δ^g‖g‖`.
    Unconstrained { eps: f64 },
    /// As `Unconstrained`, with the additional caps
    /// `δ^g ≤ min{‖g‖^θ, (σ − δ^h)/(2(L_g + δ^h))}` and `δ^h ≤ ‖g‖^θ`.
    StronglyConvex {
        sigma: f64,
        lipschitz_grad: f64,
        theta: f64,
        eps: f64,
    },
    /// Absolute accuracies `ε_g/3` and `ε_h/18`.
    Sosp { eps_g: f64, eps_h: f64 },
}

pub enum HessianEstimate<'a> {
    Dense(Matrix),
    Sampled(SampledHessian<'a>),
}

impl SymOperator for HessianEstimate<'_> {
    fn dim(&self) -> usize {
        match self {
            HessianEstimate::Dense(m) => m.nrows(),
            HessianEstimate::Sampled(s) => s.dim(),
        }
    }

    fn apply(&self, v: &Vector) -> Vector {
        match self {
            HessianEstimate::Dense(m) => m * v,
            HessianEstimate::Sampled(s) => s.apply(v),
        }
    }

    fn dense(&self) -> Option<Matrix> {
        match self {
            HessianEstimate::Dense(m) => Some(m.clone()),
            HessianEstimate::Sampled(_) => None,
        }
    }
}

/// `(g_k, Q_k)` with the levels they certify.
pub struct DerivativeEstimate<'a> {
    pub g: Vector,
    pub hessian: HessianEstimate<'a>,
    pub delta_g: f64,
    pub delta_h: f64,
    pub gradient_fallback: bool,
    pub halvings: u32,
    pub gradient_samples: usize,
    pub full_gradient: bool,
    pub full_hessian: bool,
    /// Sampled components whose gradient norm exceeded `Û_g`.
    pub gradient_bound_violations: usize,
}

impl DerivativeEstimate<'_> {
    pub fn hessian_samples(&self) -> usize {
        match &self.hessian {
            HessianEstimate::Dense(_) => 0,
            HessianEstimate::Sampled(s) => s.sample_size(),
        }
    }

    pub fn hessian_bound_violations(&self) -> usize {
        match &self.hessian {
            HessianEstimate::Dense(_) => 0,
            HessianEstimate::Sampled(s) => s.bound_violations(),
        }
    }

    /// Applications of a sampled `Q_k` so far; zero for dense estimates.
    pub fn hessian_matvecs(&self) -> usize {
        match &self.hessian {
            HessianEstimate::Dense(_) => 0,
            HessianEstimate::Sampled(s) => s.matvecs(),
        }
    }

    /// Dense `Q_k` without touching operation counters. Diagnostics only.
    pub fn hessian_matrix(&self) -> Matrix {
        match &self.hessian {
            HessianEstimate::Dense(m) => m.clone(),
            HessianEstimate::Sampled(s) => s.dense_uncounted(),
        }
    }
}

/// Issues estimates for one run.
pub struct Oracle<'a> {
    problem: &'a Audited<'a>,
    policy: InexactnessPolicy,
}

impl<'a> Oracle<'a> {
    pub fn new(problem: &'a Audited<'a>, policy: InexactnessPolicy) -> Result<Self> {
        if policy.mode == OracleMode::Subsampled && !problem.is_finite_sum() {
            return Err(Error::InvalidConfig(
                "subsampled oracles need a finite-sum problem".into(),
            ));
        }
        Ok(Self { problem, policy })
    }

    pub fn policy(&self) -> &InexactnessPolicy {
        &self.policy
    }

    /// Estimate at iterate `k`. `previous_g_norm` feeds the adaptive
    /// schedule of subsampled oracles, which cannot see `∇f(x)`.
    pub fn estimate(
        &self,
        x: &Vector,
        k: usize,
        ctx: &EstimateContext<'_>,
        previous_g_norm: Option<f64>,
    ) -> Result<DerivativeEstimate<'a>> {
        match self.policy.mode {
            OracleMode::Exact => Ok(DerivativeEstimate {
                g: self.problem.gradient(x),
                hessian: HessianEstimate::Dense(self.problem.hessian(x)),
                delta_g: 0.0,
                delta_h: 0.0,
                gradient_fallback: false,
                halvings: 0,
                gradient_samples: 0,
                full_gradient: true,
                full_hessian: true,
                gradient_bound_violations: 0,
            }),
            OracleMode::Adversarial => self.adversarial(x, k, ctx),
            OracleMode::Subsampled => self.subsampled(x, k, ctx, previous_g_norm),
        }
    }

    fn capped_levels(&self, k: usize, ctx: &EstimateContext<'_>, reference: Option<f64>) -> (f64, f64) {
        let (mut dg, mut dh) = self.policy.levels(k, reference);
        if let EstimateContext::StronglyConvex {
            sigma,
            lipschitz_grad,
            theta,
            ..
        } = *ctx
        {
            if let Some(r) = reference {
                let cap = r.powf(theta);
                dh = dh.min(cap).max(f64::MIN_POSITIVE);
                dg = dg.min(cap);
            }
            dg = dg.min((sigma - dh) / (2.0 * (lipschitz_grad + dh))).max(0.0);
        }
        (dg, dh)
    }

    fn adversarial(&self, x: &Vector, k: usize, ctx: &EstimateContext<'_>) -> Result<DerivativeEstimate<'a>> {
        let grad = self.problem.gradient(x);
        let hess = self.problem.hessian(x);
        let seed = self.policy.seed;
        let mut grng = rng::stream(seed, k as u64, Purpose::GradientNoise);
        let mut hrng = rng::stream(seed, k as u64, Purpose::HessianNoise);
        // ‖g‖ ≥ ‖∇f‖/(1 + δ̄^g) for every admissible draw.
        let reference = grad.norm() / (1.0 + self.policy.delta_g);
        let (delta_g, delta_h, model, h_magnitude) = match *ctx {
            EstimateContext::Sosp { eps_g, eps_h } => {
                let level = eps_g / 3.0;
                let hlevel = eps_h / 18.0;
                let mag = hlevel * rand::Rng::random_range(&mut hrng, 0.5..=1.0);
                (level, hlevel, GradientNoiseModel::Absolute { level }, mag)
            }
            EstimateContext::Composite { nonsmooth, .. } => {
                let (dg, dh) = self.capped_levels(k, ctx, Some(reference));
                (dg, dh, GradientNoiseModel::Composite { x, nonsmooth }, dh)
            }
            _ => {
                let (dg, dh) = self.capped_levels(k, ctx, Some(reference));
                (dg, dh, GradientNoiseModel::Relative, dh)
            }
        };
        let noisy = adversarial_gradient(&grad, delta_g, model, &mut grng);
        let q = adversarial_hessian(&hess, delta_h, h_magnitude, &mut hrng);
        Ok(DerivativeEstimate {
            g: noisy.g,
            hessian: HessianEstimate::Dense(q),
            delta_g,
            delta_h,
            gradient_fallback: noisy.fallback,
            halvings: noisy.halvings,
            gradient_samples: 0,
            full_gradient: false,
            full_hessian: false,
            gradient_bound_violations: 0,
        })
    }

    fn subsampled(
        &self,
        x: &Vector,
        k: usize,
        ctx: &EstimateContext<'_>,
        previous_g_norm: Option<f64>,
    ) -> Result<DerivativeEstimate<'a>> {
        let m = self.problem.num_components().expect("finite sum");
        let bounds = self.problem.component_bounds().expect("finite sum");
        let n = x.len();
        let conf = self.policy.confidence;
        let (sg, sh, dg, dh) = match *ctx {
            EstimateContext::Sosp { eps_g, eps_h } => {
                let (sg, sh) = sosp_sample_sizes(eps_g, eps_h, n, bounds.gradient, bounds.hessian, conf, Some(m))?;
                (sg, sh, eps_g / 3.0, eps_h / 18.0)
            }
            EstimateContext::Composite { eps, .. }
            | EstimateContext::Unconstrained { eps }
            | EstimateContext::StronglyConvex { eps, .. } => {
                let (dg, dh) = self.capped_levels(k, ctx, previous_g_norm);
                let sg = if dg > 0.0 {
                    gradient_sample_size(dg, eps, bounds.gradient, conf, Some(m))?
                } else {
                    m
                };
                let sh = if dh > 0.0 {
                    hessian_sample_size(dh, n, bounds.hessian, conf, Some(m))?
                } else {
                    m
                };
                (sg, sh, dg, dh)
            }
        };
        let mut est = subsample_estimate(self.problem, x, sg, sh, self.policy.seed, k as u64)?;
        est.delta_g = if est.full_gradient { 0.0 } else { dg };
        est.delta_h = if est.full_hessian { 0.0 } else { dh };
        if let EstimateContext::Sosp { .. } = ctx {
            est.delta_g = dg;
            est.delta_h = dh;
        }
        Ok(est)
    }
}

/// Out-of-band comparison of an estimate against exact derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub gradient_error: f64,
    pub gradient_allowed: f64,
    pub hessian_error: f64,
    pub hessian_allowed: f64,
}

impl OracleCheck {
    pub fn gradient_ok(&self) -> bool {
        self.gradient_error <= self.gradient_allowed
    }

    pub fn hessian_ok(&self) -> bool {
        self.hessian_error <= self.hessian_allowed
    }
}

/// Checks `est` against the exact derivatives of `raw` at `x`, in the form
/// required by `ctx`. Allowances include a relative floating-point slack of
/// `1e−12` (gradient) and `1e−10` (Hessian).
pub fn verify_estimate(
    raw: &dyn SmoothObjective,
    x: &Vector,
    est: &DerivativeEstimate<'_>,
    ctx: &EstimateContext<'_>,
) -> OracleCheck {
    let grad = raw.gradient(x);
    let hess = raw.hessian(x);
    let gradient_error = (&est.g - &grad).norm();
    let reference = match *ctx {
        EstimateContext::Composite { nonsmooth, .. } => {
            (x - nonsmooth.prox_unchecked(&(x - &est.g), 1.0)).norm() * est.delta_g
        }
        EstimateContext::Unconstrained { .. } | EstimateContext::StronglyConvex { .. } => {
            est.g.norm() * est.delta_g
        }
        EstimateContext::Sosp { eps_g, .. } => eps_g / 3.0,
    };
    let hessian_error = hessian_error(&est.hessian_matrix(), &hess);
    let hessian_allowed = match *ctx {
        EstimateContext::Sosp { eps_h, .. } => eps_h / 18.0,
        _ => est.delta_h,
    };
    OracleCheck {
        gradient_error,
        gradient_allowed: reference + 1e-12 * grad.norm(),
        hessian_error,
        hessian_allowed: hessian_allowed + 1e-10 * (1.0 + spectral_norm(&hess)),
    }
}
