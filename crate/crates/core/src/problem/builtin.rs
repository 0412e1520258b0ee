//! Built-in benchmark instances.
//!
//! | name            | f                                         | h          |
//! |-----------------|-------------------------------------------|------------|
//! | `l1-student-t`  | `(1/m) Σ log(1 + (aᵢᵀx − bᵢ)²)`           | `λ‖x‖₁`    |
//! | `ridge-logistic`| `(1/m) Σ log(1 + exp(−yᵢaᵢᵀx)) + μ‖x‖²/2` | `0`        |
//! | `quadratic`     | `½xᵀAx − bᵀx`                             | `0`        |
//! | `saddle-2d`     | `½x₁² − ½x₂² + κx₂⁴/4`                    | `0`        |
//!
//! `l1-student-t` with `lambda = 0` is the unregularized Student-t regression.
//! Every instance is a deterministic function of its descriptor.

use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT as StudentTDist};
use serde::{Deserialize, Serialize};

use super::composite::CompositeProblem;
use super::prox::Regularizer;
use super::smooth::{ComponentBounds, FiniteSum, SmoothConstants, SmoothObjective};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::{Matrix, Vector};

/// `max |d³/dr³ log(1 + r²)|`, attained at `r = 1 − √2`.
pub const STUDENT_T_THIRD_DERIVATIVE_BOUND: f64 = 1.5 + std::f64::consts::SQRT_2;

/// `max |s'''|` for the logistic loss `s(t) = log(1 + e^{−t})`.
pub const LOGISTIC_THIRD_DERIVATIVE_BOUND: f64 = 0.096_225_044_864_937_63;

/// Default L1 weight of `l1-student-t`, below `‖∇f(0)‖_∞` of the default instances.
pub const DEFAULT_LAMBDA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    L1StudentT,
    RidgeLogistic,
    Quadratic,
    Saddle2d,
}

impl ProblemKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "l1-student-t" => Ok(Self::L1StudentT),
            "ridge-logistic" => Ok(Self::RidgeLogistic),
            "quadratic" => Ok(Self::Quadratic),
            "saddle-2d" => Ok(Self::Saddle2d),
            other => Err(Error::UnknownProblem(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::L1StudentT => "l1-student-t",
            Self::RidgeLogistic => "ridge-logistic",
            Self::Quadratic => "quadratic",
            Self::Saddle2d => "saddle-2d",
        }
    }
}

/// JSON descriptor of a built-in instance. Unset sizes fall back to
/// per-problem defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDescriptor {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// L1 weight for `l1-student-t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Ridge weight (= strong convexity) for `ridge-logistic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Quartic coefficient κ for `saddle-2d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quartic: Option<f64>,
    /// `quadratic` only: draw an indefinite spectrum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indefinite: Option<bool>,
    /// `quadratic` only: ratio of largest to smallest eigenvalue magnitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<f64>,
}

impl ProblemDescriptor {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            m: None,
            n: None,
            seed: 0,
            lambda: None,
            mu: None,
            quartic: None,
            indefinite: None,
            condition: None,
        }
    }

    pub fn with_sizes(mut self, m: usize, n: usize) -> Self {
        self.m = Some(m);
        self.n = Some(n);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = Some(mu);
        self
    }

    pub fn kind(&self) -> Result<ProblemKind> {
        ProblemKind::parse(&self.name)
    }
}

/// Builds the instance described by `desc`.
pub fn builtin_problem(desc: &ProblemDescriptor) -> Result<CompositeProblem> {
    let kind = desc.kind()?;
    let positive = |name: &str, v: f64| -> Result<f64> {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
        }
    };
    let mut problem = match kind {
        ProblemKind::L1StudentT => {
            let m = desc.m.unwrap_or(200);
            let n = desc.n.unwrap_or(50);
            let lambda = desc.lambda.unwrap_or(DEFAULT_LAMBDA);
            if lambda < 0.0 {
                return Err(Error::InvalidArgument("lambda must be nonnegative".into()));
            }
            let (a, b) = student_t_data(m, n, desc.seed);
            let f = Arc::new(StudentTRegression::new(a, b)?);
            let h = if lambda == 0.0 {
                Regularizer::Zero
            } else {
                Regularizer::L1 { lambda }
            };
            // f ≥ 0 and h ≥ 0, so 0 is a certified lower bound on φ.
            CompositeProblem::from_finite_sum(f, h)
        }
        ProblemKind::RidgeLogistic => {
            let m = desc.m.unwrap_or(500);
            let n = desc.n.unwrap_or(20);
            let mu = positive("mu", desc.mu.unwrap_or(0.1))?;
            let (a, y) = logistic_data(m, n, desc.seed);
            let f = Arc::new(RidgeLogistic::new(a, y, mu)?);
            let x_star = newton_reference(f.as_ref(), &Vector::zeros(n), 200, 1e-14);
            let mut p = CompositeProblem::from_finite_sum(f.clone(), Regularizer::Zero);
            p.lower_bound = Some(f.value(&x_star));
            p.stationary_points = vec![x_star.clone()];
            p.minimizer = Some(x_star);
            p
        }
        ProblemKind::Quadratic => {
            let n = desc.n.unwrap_or(10);
            let cond = desc.condition.unwrap_or(10.0);
            if cond < 1.0 {
                return Err(Error::InvalidArgument("condition must be >= 1".into()));
            }
            let (a, b) = quadratic_data(n, cond, desc.indefinite.unwrap_or(false), desc.seed);
            Quadratic::new(a, b)?.into_problem()
        }
        ProblemKind::Saddle2d => {
            let kappa = desc.quartic.unwrap_or(1.0);
            if kappa < 0.0 {
                return Err(Error::InvalidArgument("quartic must be nonnegative".into()));
            }
            Saddle2d::new(kappa).into_problem()
        }
    };
    problem.descriptor = Some(desc.clone());
    Ok(problem)
}

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn student_t_data(m: usize, n: usize, seed: u64) -> (Matrix, Vector) {
    let mut rng = rng::stream(seed, 0, Purpose::Data);
    // Rows of unit expected norm keep L_h moderate.
    let a = gaussian_matrix(&mut rng, m, n) / (n as f64).sqrt();
    let support = (n / 5).max(1);
    // Signal aᵢᵀx_true with variance about 4.
    let scale = 2.0 * (n as f64 / support as f64).sqrt();
    let x_true = Vector::from_fn(n, |j, _| {
        if j < support {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        } else {
            0.0
        }
    });
    let noise = StudentTDist::new(3.0).expect("valid dof");
    let b = &a * &x_true + Vector::from_fn(m, |_, _| 0.5 * noise.sample(&mut rng));
    (a, b)
}

fn logistic_data(m: usize, n: usize, seed: u64) -> (Matrix, Vector) {
    let mut rng = rng::stream(seed, 0, Purpose::Data);
    let a = gaussian_matrix(&mut rng, m, n);
    let w = Vector::from_fn(n, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z / (n as f64).sqrt()
    });
    let margin = &a * &w;
    let y = Vector::from_fn(m, |i, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        if margin[i] + 0.5 * z >= 0.0 {
            1.0
        } else {
            -1.0
        }
    });
    (a, y)
}

fn quadratic_data(n: usize, cond: f64, indefinite: bool, seed: u64) -> (Matrix, Vector) {
    let mut rng = rng::stream(seed, 0, Purpose::Data);
    let q = gaussian_matrix(&mut rng, n, n).qr().q();
    let eig = Vector::from_fn(n, |i, _| {
        let frac = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        let mag = cond.powf(frac);
        // Indefinite: the smallest third of the spectrum flips sign.
        if indefinite && (i as f64) < (n as f64 / 3.0).max(1.0) {
            -mag
        } else {
            mag
        }
    });
    let a = &q * Matrix::from_diagonal(&eig) * q.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let b = Vector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    (a, b)
}

fn row_norms(a: &Matrix) -> Vec<f64> {
    (0..a.nrows()).map(|i| a.row(i).norm()).collect()
}

fn spectral_norm_sq(a: &Matrix) -> f64 {
    // ‖A‖² = λ_max(AᵀA)
    let ata = a.transpose() * a;
    SymmetricEigen::new(ata).eigenvalues.max()
}

/// Student-t robust regression `f(x) = (1/m) Σ log(1 + (aᵢᵀx − bᵢ)²)`.
#[derive(Debug, Clone)]
pub struct StudentTRegression {
    a: Matrix,
    b: Vector,
    rows: Vec<Vector>,
    constants: SmoothConstants,
    bounds: ComponentBounds,
}

impl StudentTRegression {
    pub fn new(a: Matrix, b: Vector) -> Result<Self> {
        if a.nrows() != b.len() || a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        let m = a.nrows() as f64;
        let norms = row_norms(&a);
        let max_row = norms.iter().cloned().fold(0.0, f64::max);
        let cube_mean = norms.iter().map(|r| r * r * r).sum::<f64>() / m;
        let constants = SmoothConstants {
            // |φ''| ≤ 2 for φ(r) = log(1 + r²)
            lipschitz_grad: 2.0 * spectral_norm_sq(&a) / m,
            lipschitz_hess: Some(STUDENT_T_THIRD_DERIVATIVE_BOUND * cube_mean),
            strong_convexity: 0.0,
            lower_bound: Some(0.0),
        };
        let bounds = ComponentBounds {
            gradient: max_row,
            hessian: 2.0 * max_row * max_row,
            heuristic: false,
        };
        let rows = (0..a.nrows()).map(|i| a.row(i).transpose()).collect();
        Ok(Self {
            a,
            b,
            rows,
            constants,
            bounds,
        })
    }

    pub fn data(&self) -> (&Matrix, &Vector) {
        (&self.a, &self.b)
    }

    fn residual(&self, i: usize, x: &Vector) -> f64 {
        self.rows[i].dot(x) - self.b[i]
    }
}

fn student_t_d1(r: f64) -> f64 {
    2.0 * r / (1.0 + r * r)
}

fn student_t_d2(r: f64) -> f64 {
    let s = 1.0 + r * r;
    2.0 * (1.0 - r * r) / (s * s)
}

impl SmoothObjective for StudentTRegression {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &Vector) -> f64 {
        let m = self.a.nrows();
        (0..m).map(|i| self.residual(i, x).powi(2).ln_1p()).sum::<f64>() / m as f64
    }

    fn gradient(&self, x: &Vector) -> Vector {
        let m = self.num_components();
        let mut acc = Vector::zeros(self.dim());
        for i in 0..m {
            acc += self.component_gradient(i, x);
        }
        acc / m as f64
    }

    fn hessian(&self, x: &Vector) -> Matrix {
        let m = self.a.nrows();
        let w = Vector::from_fn(m, |i, _| student_t_d2(self.residual(i, x)));
        let wa = Matrix::from_fn(m, self.dim(), |i, j| w[i] * self.a[(i, j)]);
        let h = self.a.transpose() * wa / m as f64;
        (&h + h.transpose()) * 0.5
    }

    fn hessian_vector(&self, x: &Vector, v: &Vector) -> Vector {
        let m = self.a.nrows();
        let av = &self.a * v;
        let w = Vector::from_fn(m, |i, _| student_t_d2(self.residual(i, x)) * av[i]);
        self.a.transpose() * w / m as f64
    }

    fn constants(&self) -> SmoothConstants {
        self.constants
    }
}

impl FiniteSum for StudentTRegression {
    fn num_components(&self) -> usize {
        self.a.nrows()
    }

    fn component_gradient(&self, i: usize, x: &Vector) -> Vector {
        &self.rows[i] * student_t_d1(self.residual(i, x))
    }

    fn component_hessian(&self, i: usize, x: &Vector) -> Matrix {
        let a = &self.rows[i];
        a * a.transpose() * student_t_d2(self.residual(i, x))
    }

    fn component_hessian_vector(&self, i: usize, x: &Vector, v: &Vector) -> Vector {
        let a = &self.rows[i];
        a * (student_t_d2(self.residual(i, x)) * a.dot(v))
    }

    fn component_bounds(&self) -> ComponentBounds {
        self.bounds
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// L2-regularized logistic regression with labels `yᵢ ∈ {−1, +1}`.
///
/// Each component carries the full ridge term, so `f_i(x) = log(1 +
/// exp(−yᵢaᵢᵀx)) + μ‖x‖²/2`.
#[derive(Debug, Clone)]
pub struct RidgeLogistic {
    a: Matrix,
    y: Vector,
    mu: f64,
    rows: Vec<Vector>,
    constants: SmoothConstants,
    bounds: ComponentBounds,
}

impl RidgeLogistic {
    pub fn new(a: Matrix, y: Vector, mu: f64) -> Result<Self> {
        if a.nrows() != y.len() || a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: y.len(),
            });
        }
        if y.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidArgument("labels must be ±1".into()));
        }
        let m = a.nrows() as f64;
        let norms = row_norms(&a);
        let max_row = norms.iter().cloned().fold(0.0, f64::max);
        let cube_mean = norms.iter().map(|r| r * r * r).sum::<f64>() / m;
        let constants = SmoothConstants {
            lipschitz_grad: spectral_norm_sq(&a) / (4.0 * m) + mu,
            lipschitz_hess: Some(LOGISTIC_THIRD_DERIVATIVE_BOUND * cube_mean),
            strong_convexity: mu,
            lower_bound: Some(0.0),
        };
        // On the level set of x₀ = 0: μ‖x‖²/2 ≤ f(0) = ln 2.
        let radius = (2.0 * std::f64::consts::LN_2 / mu).sqrt();
        let bounds = ComponentBounds {
            gradient: max_row + mu * radius,
            hessian: 0.25 * max_row * max_row + mu,
            heuristic: false,
        };
        let rows = (0..a.nrows()).map(|i| a.row(i).transpose()).collect();
        Ok(Self {
            a,
            y,
            mu,
            rows,
            constants,
            bounds,
        })
    }

    pub fn data(&self) -> (&Matrix, &Vector) {
        (&self.a, &self.y)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    fn margin(&self, i: usize, x: &Vector) -> f64 {
        self.y[i] * self.rows[i].dot(x)
    }
}

impl SmoothObjective for RidgeLogistic {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &Vector) -> f64 {
        let m = self.a.nrows();
        let loss = (0..m).map(|i| softplus(-self.margin(i, x))).sum::<f64>() / m as f64;
        loss + 0.5 * self.mu * x.norm_squared()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        let m = self.num_components();
        let mut acc = Vector::zeros(self.dim());
        for i in 0..m {
            acc += self.component_gradient(i, x);
        }
        acc / m as f64
    }

    fn hessian(&self, x: &Vector) -> Matrix {
        let m = self.a.nrows();
        let w = Vector::from_fn(m, |i, _| {
            let p = sigmoid(self.margin(i, x));
            p * (1.0 - p)
        });
        let wa = Matrix::from_fn(m, self.dim(), |i, j| w[i] * self.a[(i, j)]);
        let h = self.a.transpose() * wa / m as f64;
        (&h + h.transpose()) * 0.5 + Matrix::identity(self.dim(), self.dim()) * self.mu
    }

    fn hessian_vector(&self, x: &Vector, v: &Vector) -> Vector {
        let m = self.a.nrows();
        let av = &self.a * v;
        let w = Vector::from_fn(m, |i, _| {
            let p = sigmoid(self.margin(i, x));
            p * (1.0 - p) * av[i]
        });
        self.a.transpose() * w / m as f64 + v * self.mu
    }

    fn constants(&self) -> SmoothConstants {
        self.constants
    }
}

impl FiniteSum for RidgeLogistic {
    fn num_components(&self) -> usize {
        self.a.nrows()
    }

    fn component_gradient(&self, i: usize, x: &Vector) -> Vector {
        let coef = -self.y[i] * sigmoid(-self.margin(i, x));
        &self.rows[i] * coef + x * self.mu
    }

    fn component_hessian(&self, i: usize, x: &Vector) -> Matrix {
        let p = sigmoid(self.margin(i, x));
        let a = &self.rows[i];
        a * a.transpose() * (p * (1.0 - p)) + Matrix::identity(self.dim(), self.dim()) * self.mu
    }

    fn component_hessian_vector(&self, i: usize, x: &Vector, v: &Vector) -> Vector {
        let p = sigmoid(self.margin(i, x));
        let a = &self.rows[i];
        a * (p * (1.0 - p) * a.dot(v)) + v * self.mu
    }

    fn component_bounds(&self) -> ComponentBounds {
        self.bounds
    }
}

/// `f(x) = ½xᵀAx − bᵀx` with symmetric `A`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    a: Matrix,
    b: Vector,
    eigenvalues: Vector,
    constants: SmoothConstants,
}

impl Quadratic {
    /// Hessian Lipschitz constant recorded for quadratics. The Hessian is
    /// constant, so any positive value is a valid bound.
    pub const LIPSCHITZ_HESS: f64 = 1.0;

    pub fn new(a: Matrix, b: Vector) -> Result<Self> {
        if !a.is_square() || a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        let asym = (&a - a.transpose()).abs().max();
        if asym > 1e-12 * (1.0 + a.abs().max()) {
            return Err(Error::InvalidArgument("quadratic matrix must be symmetric".into()));
        }
        let eigenvalues = SymmetricEigen::new(a.clone()).eigenvalues;
        let lmin = eigenvalues.min();
        let lmax_abs = eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let lower_bound = if lmin > 0.0 {
            let x = a.clone().cholesky().expect("SPD").solve(&b);
            Some(-0.5 * b.dot(&x))
        } else {
            None
        };
        let constants = SmoothConstants {
            lipschitz_grad: lmax_abs.max(f64::MIN_POSITIVE),
            lipschitz_hess: Some(Self::LIPSCHITZ_HESS),
            strong_convexity: lmin.max(0.0),
            lower_bound,
        };
        Ok(Self {
            a,
            b,
            eigenvalues,
            constants,
        })
    }

    pub fn data(&self) -> (&Matrix, &Vector) {
        (&self.a, &self.b)
    }

    pub fn eigenvalues(&self) -> &Vector {
        &self.eigenvalues
    }

    /// Unique stationary point `A⁻¹b` when `A` is nonsingular.
    pub fn stationary_point(&self) -> Option<Vector> {
        self.a.clone().lu().solve(&self.b)
    }

    pub fn into_problem(self) -> CompositeProblem {
        let stationary = self.stationary_point();
        let convex = self.constants.strong_convexity > 0.0;
        let mut p = CompositeProblem::new(Arc::new(self), Regularizer::Zero);
        if let Some(x) = stationary {
            if convex {
                p.minimizer = Some(x.clone());
            }
            p.stationary_points = vec![x];
        }
        p
    }
}

impl SmoothObjective for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.a * x)) - self.b.dot(x)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        &self.a * x - &self.b
    }

    fn hessian(&self, _x: &Vector) -> Matrix {
        self.a.clone()
    }

    fn hessian_vector(&self, _x: &Vector, v: &Vector) -> Vector {
        &self.a * v
    }

    fn constants(&self) -> SmoothConstants {
        self.constants
    }
}

/// `f(x) = ½x₁² − ½x₂² + κx₂⁴/4`: strict saddle at the origin, minima at
/// `(0, ±1/√κ)` when `κ > 0`.
///
/// For `κ > 0` the constants are certified on the slab `|x₂| ≤ 2/√κ`, which
/// contains the level set of any start with `f(x₀) ≤ 0` plus every step the
/// solvers take from it.
#[derive(Debug, Clone, Copy)]
pub struct Saddle2d {
    kappa: f64,
}

impl Saddle2d {
    pub fn new(kappa: f64) -> Self {
        Self { kappa }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn into_problem(self) -> CompositeProblem {
        let mut points = vec![Vector::zeros(2)];
        let mut minimizer = None;
        if self.kappa > 0.0 {
            let r = 1.0 / self.kappa.sqrt();
            points.push(Vector::from_vec(vec![0.0, r]));
            points.push(Vector::from_vec(vec![0.0, -r]));
            minimizer = Some(Vector::from_vec(vec![0.0, r]));
        }
        let mut p = CompositeProblem::new(Arc::new(self), Regularizer::Zero);
        p.stationary_points = points;
        p.minimizer = minimizer;
        p
    }
}

impl SmoothObjective for Saddle2d {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * x[0] * x[0] - 0.5 * x[1] * x[1] + 0.25 * self.kappa * x[1].powi(4)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        Vector::from_vec(vec![x[0], -x[1] + self.kappa * x[1].powi(3)])
    }

    fn hessian(&self, x: &Vector) -> Matrix {
        Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0 + 3.0 * self.kappa * x[1] * x[1]])
    }

    fn constants(&self) -> SmoothConstants {
        if self.kappa == 0.0 {
            SmoothConstants {
                lipschitz_grad: 1.0,
                lipschitz_hess: Some(1.0),
                strong_convexity: 0.0,
                lower_bound: None,
            }
        } else {
            // On |x₂| ≤ 2/√κ: |f''₂₂| ≤ 11 and |f'''₂₂₂| = 6κ|x₂| ≤ 12√κ.
            SmoothConstants {
                lipschitz_grad: 11.0,
                lipschitz_hess: Some(12.0 * self.kappa.sqrt()),
                strong_convexity: 0.0,
                lower_bound: Some(-0.25 / self.kappa),
            }
        }
    }
}

/// Exact Newton iterations from `x0`, used to compute reference minimizers of
/// strongly convex instances. Stops once `‖∇f‖ ≤ tol`.
pub fn newton_reference(f: &dyn SmoothObjective, x0: &Vector, max_iter: usize, tol: f64) -> Vector {
    let mut x = x0.clone();
    for _ in 0..max_iter {
        let g = f.gradient(&x);
        if g.norm() <= tol {
            break;
        }
        let h = f.hessian(&x);
        let step = match h.cholesky() {
            Some(ch) => ch.solve(&g),
            None => break,
        };
        x -= step;
    }
    x
}

/// Writes the data matrix as CSV rows `a_1,…,a_n,b` (labels for
/// `ridge-logistic`, the linear term for `quadratic`).
pub fn write_data_csv<W: Write>(problem: &CompositeProblem, writer: W) -> Result<()> {
    let (a, b) = problem_data(problem)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for i in 0..a.nrows() {
        let mut record: Vec<String> = a.row(i).iter().map(|v| format!("{v:?}")).collect();
        record.push(format!("{:?}", b[i]));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

fn problem_data(problem: &CompositeProblem) -> Result<(Matrix, Vector)> {
    let desc = problem
        .descriptor
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("problem has no descriptor".into()))?;
    // Rebuilding from the descriptor is deterministic and avoids downcasting.
    match desc.kind()? {
        ProblemKind::L1StudentT => Ok(student_t_data(
            desc.m.unwrap_or(200),
            desc.n.unwrap_or(50),
            desc.seed,
        )),
        ProblemKind::RidgeLogistic => Ok(logistic_data(
            desc.m.unwrap_or(500),
            desc.n.unwrap_or(20),
            desc.seed,
        )),
        ProblemKind::Quadratic => Ok(quadratic_data(
            desc.n.unwrap_or(10),
            desc.condition.unwrap_or(10.0),
            desc.indefinite.unwrap_or(false),
            desc.seed,
        )),
        ProblemKind::Saddle2d => Err(Error::InvalidArgument("saddle-2d has no data matrix".into())),
    }
}

/// Rebuilds an instance from its descriptor and a CSV dump written by
/// [`write_data_csv`].
pub fn load_problem<R: Read>(desc: &ProblemDescriptor, data: R) -> Result<CompositeProblem> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(data);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("bad number `{s}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let width = rows.first().map(|r| r.len()).unwrap_or(0);
    if width < 2 || rows.iter().any(|r| r.len() != width) {
        return Err(Error::InvalidArgument("ragged or empty data CSV".into()));
    }
    let n = width - 1;
    let a = Matrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let b = Vector::from_fn(rows.len(), |i, _| rows[i][n]);
    let mut problem = match desc.kind()? {
        ProblemKind::L1StudentT => {
            let lambda = desc.lambda.unwrap_or(DEFAULT_LAMBDA);
            let h = if lambda == 0.0 {
                Regularizer::Zero
            } else {
                Regularizer::L1 { lambda }
            };
            CompositeProblem::from_finite_sum(Arc::new(StudentTRegression::new(a, b)?), h)
        }
        ProblemKind::RidgeLogistic => {
            let f = Arc::new(RidgeLogistic::new(a, b, desc.mu.unwrap_or(0.1))?);
            let x_star = newton_reference(f.as_ref(), &Vector::zeros(n), 200, 1e-14);
            let mut p = CompositeProblem::from_finite_sum(f.clone(), Regularizer::Zero);
            p.lower_bound = Some(f.value(&x_star));
            p.stationary_points = vec![x_star.clone()];
            p.minimizer = Some(x_star);
            p
        }
        ProblemKind::Quadratic => Quadratic::new(a, b)?.into_problem(),
        ProblemKind::Saddle2d => {
            return Err(Error::InvalidArgument("saddle-2d has no data matrix".into()))
        }
    };
    problem.descriptor = Some(desc.clone());
    Ok(problem)
}

/// Pilot-sample estimate of component derivative bounds: 1.1× the largest
/// norm seen over `points` random `(x, i)` pairs in the ball `B(center,
/// radius)`. Flagged heuristic.
pub fn estimate_component_bounds(
    fs: &dyn FiniteSum,
    center: &Vector,
    radius: f64,
    points: usize,
    seed: u64,
) -> ComponentBounds {
    let mut rng = rng::stream(seed, 0, Purpose::Data);
    let n = fs.dim();
    let m = fs.num_components();
    let mut gmax: f64 = 0.0;
    let mut hmax: f64 = 0.0;
    for _ in 0..points {
        let dir = rng::unit_vector(&mut rng, n);
        let r: f64 = radius * rng.random::<f64>().powf(1.0 / n as f64);
        let x = center + dir * r;
        let i = rng.random_range(0..m);
        gmax = gmax.max(fs.component_gradient(i, &x).norm());
        let h = fs.component_hessian(i, &x);
        let spec = SymmetricEigen::new(h).eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        hmax = hmax.max(spec);
    }
    ComponentBounds {
        gradient: 1.1 * gmax,
        hessian: 1.1 * hmax,
        heuristic: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn identity_quadratic_constants() {
        let q = Quadratic::new(Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let c = q.constants();
        assert_eq!(c.lipschitz_grad, 1.0);
        assert_eq!(c.strong_convexity, 1.0);
        assert_eq!(q.stationary_point().unwrap(), Vector::zeros(2));
        let p = q.into_problem();
        assert_eq!(p.minimizer.clone().unwrap(), Vector::zeros(2));
    }

    #[test]
    fn pure_saddle_has_constant_negative_curvature() {
        let s = Saddle2d::new(0.0);
        for x in [dvector![0.0, 0.0], dvector![3.0, -7.0], dvector![-0.1, 100.0]] {
            let eig = SymmetricEigen::new(s.hessian(&x)).eigenvalues;
            assert_eq!(eig.min(), -1.0);
        }
    }

    #[test]
    fn unknown_name_is_rejected() {
        let err = builtin_problem(&ProblemDescriptor::new("rosenbrock")).unwrap_err();
        assert!(matches!(err, Error::UnknownProblem(_)));
    }

    #[test]
    fn descriptor_rejects_unknown_keys() {
        let bad = r#"{"name": "quadratic", "n": 3, "colour": "red"}"#;
        assert!(serde_json::from_str::<ProblemDescriptor>(bad).is_err());
    }

    #[test]
    fn student_t_is_deterministic() {
        let desc = ProblemDescriptor::new("l1-student-t").with_sizes(200, 50).with_seed(7);
        let mut first = Vec::new();
        let mut second = Vec::new();
        write_data_csv(&builtin_problem(&desc).unwrap(), &mut first).unwrap();
        write_data_csv(&builtin_problem(&desc).unwrap(), &mut second).unwrap();
        assert!(!first.is_empty());
        assert_eq!(first, second);
    }

    #[test]
    fn csv_round_trip_preserves_oracles() {
        let desc = ProblemDescriptor::new("l1-student-t").with_sizes(30, 6).with_seed(3);
        let p = builtin_problem(&desc).unwrap();
        let mut buf = Vec::new();
        write_data_csv(&p, &mut buf).unwrap();
        let q = load_problem(&desc, buf.as_slice()).unwrap();
        let x = Vector::from_fn(6, |i, _| 0.1 * i as f64 - 0.2);
        assert_eq!(p.smooth().gradient(&x), q.smooth().gradient(&x));
        assert_eq!(p.smooth().constants(), q.smooth().constants());
    }

    #[test]
    fn finite_sum_gradient_is_component_mean() {
        let desc = ProblemDescriptor::new("ridge-logistic").with_sizes(40, 5).with_seed(1);
        let p = builtin_problem(&desc).unwrap();
        let fs = p.finite_sum().unwrap();
        let x = Vector::from_fn(5, |i, _| (i as f64).sin());
        let mut acc = Vector::zeros(5);
        for i in 0..fs.num_components() {
            acc += fs.component_gradient(i, &x);
        }
        assert_eq!(acc / 40.0, fs.gradient(&x));
    }

    #[test]
    fn third_derivative_constants() {
        let phi3 = |r: f64| 4.0 * r * (r * r - 3.0) / (1.0 + r * r).powi(3);
        let r = 1.0 - std::f64::consts::SQRT_2;
        assert!((phi3(r).abs() - STUDENT_T_THIRD_DERIVATIVE_BOUND).abs() < 1e-12);
        // logistic: max |p(1−p)(1−2p)| at p = (3 ± √3)/6
        let p = (3.0 - 3f64.sqrt()) / 6.0;
        let v = (p * (1.0 - p) * (1.0 - 2.0 * p)).abs();
        assert!((v - LOGISTIC_THIRD_DERIVATIVE_BOUND).abs() < 1e-15);
    }

    #[test]
    fn heuristic_bounds_cover_analytic_region() {
        let desc = ProblemDescriptor::new("l1-student-t").with_sizes(50, 4).with_seed(2);
        let p = builtin_problem(&desc).unwrap();
        let fs = p.finite_sum().unwrap();
        let est = estimate_component_bounds(fs, &Vector::zeros(4), 1.0, 500, 9);
        let exact = fs.component_bounds();
        assert!(est.heuristic && !exact.heuristic);
        assert!(est.gradient <= 1.1 * exact.gradient + 1e-12);
        assert!(est.hessian <= 1.1 * exact.hessian + 1e-12);
    }
}
