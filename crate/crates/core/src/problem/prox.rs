use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::Vector;

/// Convex nonsmooth term `h` with a closed-form proximal map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Regularizer {
    Zero,
    L1 { lambda: f64 },
    /// Indicator of `[lower, upper]^n`.
    Box { lower: f64, upper: f64 },
}

impl Regularizer {
    pub fn is_zero(&self) -> bool {
        matches!(self, Regularizer::Zero)
    }

    /// `h(x)`; `+inf` outside the box for [`Regularizer::Box`].
    pub fn value(&self, x: &Vector) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda } => lambda * x.lp_norm(1),
            Regularizer::Box { lower, upper } => {
                if x.iter().all(|&v| v >= lower && v <= upper) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `argmin_x { h(x) + ‖x − u‖² / (2t) }`.
    pub fn prox(&self, u: &Vector, t: f64) -> Result<Vector> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("prox step {t} must be positive")));
        }
        ensure_finite("prox input", u)?;
        Ok(self.prox_unchecked(u, t))
    }

    pub(crate) fn prox_unchecked(&self, u: &Vector, t: f64) -> Vector {
        match *self {
            Regularizer::Zero => u.clone(),
            Regularizer::L1 { lambda } => {
                let thr = lambda * t;
                u.map(|v| soft_threshold(v, thr))
            }
            Regularizer::Box { lower, upper } => u.map(|v| v.clamp(lower, upper)),
        }
    }

    /// Whether `v ∈ ∂h(x)` up to `tol` (exact for the built-in regularizers).
    pub fn subdifferential_contains(&self, x: &Vector, v: &Vector, tol: f64) -> bool {
        if x.len() != v.len() {
            return false;
        }
        match *self {
            Regularizer::Zero => v.iter().all(|vi| vi.abs() <= tol),
            Regularizer::L1 { lambda } => x.iter().zip(v.iter()).all(|(&xi, &vi)| {
                if xi > 0.0 {
                    (vi - lambda).abs() <= tol
                } else if xi < 0.0 {
                    (vi + lambda).abs() <= tol
                } else {
                    vi.abs() <= lambda + tol
                }
            }),
            Regularizer::Box { lower, upper } => x.iter().zip(v.iter()).all(|(&xi, &vi)| {
                if xi < lower || xi > upper {
                    false
                } else if xi == lower && xi == upper {
                    true
                } else if xi == lower {
                    vi <= tol
                } else if xi == upper {
                    vi >= -tol
                } else {
                    vi.abs() <= tol
                }
            }),
        }
    }
}

fn soft_threshold(v: f64, thr: f64) -> f64 {
    if v > thr {
        v - thr
    } else if v < -thr {
        v + thr
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn l1_soft_threshold() {
        let h = Regularizer::L1 { lambda: 1.0 };
        assert_eq!(h.prox(&dvector![3.0, -0.5], 1.0).unwrap(), dvector![2.0, 0.0]);
        let h = Regularizer::L1 { lambda: 0.5 };
        assert_eq!(h.prox(&dvector![1.5], 2.0).unwrap(), dvector![0.5]);
    }

    #[test]
    fn zero_is_identity() {
        let u = dvector![1.7, -4.0];
        for t in [1e-3, 1.0, 50.0] {
            assert_eq!(Regularizer::Zero.prox(&u, t).unwrap(), u);
        }
    }

    #[test]
    fn box_clamps() {
        let h = Regularizer::Box { lower: -1.0, upper: 2.0 };
        assert_eq!(h.prox(&dvector![-3.0, 0.5, 9.0], 0.3).unwrap(), dvector![-1.0, 0.5, 2.0]);
        assert!(h.value(&dvector![3.0]).is_infinite());
    }

    #[test]
    fn rejects_bad_input() {
        let h = Regularizer::L1 { lambda: 1.0 };
        assert!(h.prox(&dvector![f64::NAN], 1.0).is_err());
        assert!(h.prox(&dvector![1.0], 0.0).is_err());
        assert!(h.prox(&dvector![1.0], -1.0).is_err());
    }

    #[test]
    fn prox_optimality_certificate() {
        // (u - p)/t ∈ ∂h(p) characterizes p = prox(u, t).
        let h = Regularizer::L1 { lambda: 0.7 };
        let u = dvector![2.0, -0.3, 0.0, -5.0];
        let t = 1.3;
        let p = h.prox(&u, t).unwrap();
        let v = (&u - &p) / t;
        assert!(h.subdifferential_contains(&p, &v, 1e-12));
    }
}
