//! Closed-form constants: regularization parameters, iteration bounds and the
//! local-rate constants of the strongly convex method.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} = {v} must be positive")))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} = {v} must be nonnegative")))
    }
}

fn half_pole(delta_g: f64) -> Result<()> {
    nonnegative("delta_g", delta_g)?;
    if delta_g < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("delta_g = {delta_g} must be below 1/2")))
    }
}

/// `γ(L_g + η + 2δ^g(1 + η/2 + 2L_g + 2δ^h))/(1 − 2δ^g)`.
pub fn ck_global(gamma: f64, lg: f64, eta: f64, delta_g: f64, delta_h: f64) -> Result<f64> {
    half_pole(delta_g)?;
    positive("lipschitz_grad", lg)?;
    nonnegative("eta", eta)?;
    nonnegative("delta_h", delta_h)?;
    let inner = 1.0 + eta / 2.0 + 2.0 * lg + 2.0 * delta_h;
    Ok(gamma * (lg + eta + 2.0 * delta_g * inner) / (1.0 - 2.0 * delta_g))
}

/// `γ̄(η(1 + 2L_g + 2δ^h) + 2δ^g(1 + η/2 + 2L_g + 2δ^h))/(2 − η − 2δ^g)`.
pub fn ck_local(gamma_bar: f64, lg: f64, eta: f64, delta_g: f64, delta_h: f64) -> Result<f64> {
    nonnegative("eta", eta)?;
    nonnegative("delta_g", delta_g)?;
    nonnegative("delta_h", delta_h)?;
    let den = 2.0 - eta - 2.0 * delta_g;
    if den <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "eta + 2 delta_g = {} must be below 2",
            eta + 2.0 * delta_g
        )));
    }
    let num = eta * (1.0 + 2.0 * lg + 2.0 * delta_h)
        + 2.0 * delta_g * (1.0 + eta / 2.0 + 2.0 * lg + 2.0 * delta_h);
    Ok(gamma_bar * num / den)
}

/// `γ(L_g + η + 2δ^g(η/2 + 2L_g + 2δ^h))/(1 − 2δ^g)`.
pub fn rnm_ck(gamma: f64, lg: f64, eta: f64, delta_g: f64, delta_h: f64) -> Result<f64> {
    half_pole(delta_g)?;
    positive("lipschitz_grad", lg)?;
    nonnegative("eta", eta)?;
    nonnegative("delta_h", delta_h)?;
    let inner = eta / 2.0 + 2.0 * lg + 2.0 * delta_h;
    Ok(gamma * (lg + eta + 2.0 * delta_g * inner) / (1.0 - 2.0 * delta_g))
}

/// `γ̄(η + 2δ^g(η/2 + 2L_g + 2δ^h))/(2(1 − δ^g))`.
pub fn rnm_ck_local(gamma_bar: f64, lg: f64, eta: f64, delta_g: f64, delta_h: f64) -> Result<f64> {
    nonnegative("eta", eta)?;
    nonnegative("delta_g", delta_g)?;
    nonnegative("delta_h", delta_h)?;
    if delta_g >= 1.0 {
        return Err(Error::InvalidArgument(format!("delta_g = {delta_g} must be below 1")));
    }
    let num = eta + 2.0 * delta_g * (eta / 2.0 + 2.0 * lg + 2.0 * delta_h);
    Ok(gamma_bar * num / (2.0 * (1.0 - delta_g)))
}

/// Decrease coefficient `½(c − L_g − η − 2δ^g(1 + η/2 + ‖H‖))` for the
/// proximal method, with `‖H‖` replaced by `h_bound`.
pub fn pnm_decrease_coefficient(c: f64, lg: f64, eta: f64, delta_g: f64, h_bound: f64) -> f64 {
    0.5 * (c - lg - eta - 2.0 * delta_g * (1.0 + eta / 2.0 + h_bound))
}

/// Smooth analogue `½(c − L_g − η − 2δ^g(η/2 + ‖H‖))`.
pub fn rnm_decrease_coefficient(c: f64, lg: f64, eta: f64, delta_g: f64, h_bound: f64) -> f64 {
    0.5 * (c - lg - eta - 2.0 * delta_g * (eta / 2.0 + h_bound))
}

/// Checks `φ_k − φ_{k+1} ≥ coef·‖step‖² − 1e−9(1 + |φ_k|)`; a non-positive
/// coefficient fails.
pub fn decrease_certificate(phi_k: f64, phi_next: f64, coefficient: f64, step_norm: f64) -> bool {
    if step_norm == 0.0 {
        return phi_next <= phi_k + 1e-9 * (1.0 + phi_k.abs());
    }
    coefficient > 0.0 && phi_k - phi_next >= coefficient * step_norm * step_norm - 1e-9 * (1.0 + phi_k.abs())
}

fn checked_gap(phi0: f64, phi_star: Option<f64>) -> Result<f64> {
    let star = phi_star.ok_or(Error::MissingConstant("lower bound f_*"))?;
    let gap = phi0 - star;
    if gap < -1e-12 * (1.0 + phi0.abs()) {
        return Err(Error::InvalidArgument(format!(
            "initial value {phi0} lies below the lower bound {star}"
        )));
    }
    Ok(gap.max(0.0))
}

/// `β₀ = 2L_g + 2δ̄^h + γ(L_g + 1 + 2δ̄^g(3/2 + 2L_g + 2δ̄^h))/(1 − 2δ̄^g)`.
pub fn beta0(gamma: f64, lg: f64, delta_g: f64, delta_h: f64) -> Result<f64> {
    half_pole(delta_g)?;
    Ok(2.0 * lg
        + 2.0 * delta_h
        + gamma * (lg + 1.0 + 2.0 * delta_g * (1.5 + 2.0 * lg + 2.0 * delta_h)) / (1.0 - 2.0 * delta_g))
}

/// `β̃₀`: as [`beta0`] with the smooth regularization parameter at `η = 1`.
pub fn beta0_tilde(gamma: f64, lg: f64, delta_g: f64, delta_h: f64) -> Result<f64> {
    half_pole(delta_g)?;
    Ok(2.0 * lg
        + 2.0 * delta_h
        + gamma * (lg + 1.0 + 2.0 * delta_g * (0.5 + 2.0 * lg + 2.0 * delta_h)) / (1.0 - 2.0 * delta_g))
}

fn ceil_count(v: f64) -> Result<u64> {
    if !v.is_finite() || v > u64::MAX as f64 {
        return Err(Error::InvalidArgument(format!("iteration bound {v} overflows")));
    }
    Ok(v.ceil() as u64)
}

/// `K̄₁ = ⌈2(3/2 + β₀)²(φ₀ − φ_*)/((γ − 1)L_g ε²)⌉`.
#[allow(clippy::too_many_arguments)]
pub fn iteration_bound_k1(
    phi0: f64,
    phi_star: Option<f64>,
    gamma: f64,
    lg: f64,
    delta_g: f64,
    delta_h: f64,
    eps: f64,
) -> Result<u64> {
    let gap = checked_gap(phi0, phi_star)?;
    positive("eps", eps)?;
    if gamma <= 1.0 {
        return Err(Error::InvalidArgument(format!("gamma = {gamma} must exceed 1")));
    }
    let b = beta0(gamma, lg, delta_g, delta_h)?;
    ceil_count(2.0 * (1.5 + b).powi(2) * gap / ((gamma - 1.0) * lg * eps * eps))
}

/// `K̄₂ = ⌈2(3/2 + β̃₀)²(f₀ − f_*)/((γ − 1)L_g ε²)⌉`.
pub fn iteration_bound_k2(
    f0: f64,
    f_star: Option<f64>,
    gamma: f64,
    lg: f64,
    delta_g: f64,
    delta_h: f64,
    eps: f64,
) -> Result<u64> {
    let gap = checked_gap(f0, f_star)?;
    positive("eps", eps)?;
    if gamma <= 1.0 {
        return Err(Error::InvalidArgument(format!("gamma = {gamma} must exceed 1")));
    }
    let b = beta0_tilde(gamma, lg, delta_g, delta_h)?;
    ceil_count(2.0 * (1.5 + b).powi(2) * gap / ((gamma - 1.0) * lg * eps * eps))
}

/// `μ = min{1, (σ − δ^h)/(4‖g‖^θ)}`.
pub fn sc_mu(sigma: f64, delta_h: f64, g_norm: f64, theta: f64) -> Result<f64> {
    if !(sigma > delta_h && delta_h >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need sigma > delta_h >= 0, got sigma = {sigma}, delta_h = {delta_h}"
        )));
    }
    if theta > 0.0 && g_norm <= 0.0 {
        return Err(Error::InvalidArgument("gradient norm must be positive when theta > 0".into()));
    }
    let gt = if theta == 0.0 { 1.0 } else { g_norm.powf(theta) };
    Ok((0.25 * (sigma - delta_h) / gt).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScConstants {
    pub varsigma0: f64,
    pub varsigma1: f64,
    pub varsigma2: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
}

/// Local constants of the strongly convex method for the ball radius `ε̂₀`.
#[allow(clippy::too_many_arguments)]
pub fn theoretical_sc_constants(
    sigma: f64,
    lg: f64,
    lh: f64,
    eps0: f64,
    delta_g: f64,
    delta_h: f64,
    theta: f64,
    ug: f64,
) -> Result<ScConstants> {
    positive("sigma", sigma)?;
    positive("lipschitz_grad", lg)?;
    positive("lipschitz_hess", lh)?;
    positive("eps0", eps0)?;
    nonnegative("ug", ug)?;
    if !(delta_h >= 0.0 && delta_h < sigma) {
        return Err(Error::InvalidArgument(format!("delta_h = {delta_h} must lie in [0, sigma)")));
    }
    if !(delta_g >= 0.0 && delta_g < 1.0) {
        return Err(Error::InvalidArgument(format!("delta_g = {delta_g} must lie in [0, 1)")));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidArgument(format!("theta = {theta} must lie in [0, 1]")));
    }
    let s0 = 2.0 * (lh * eps0 + 2.0 * lg) / (sigma - delta_h);
    let eps1 = eps0 / (1.0 + s0);
    let odg = 1.0 - delta_g;
    let a = lg + sigma + ug.powf(theta) / (2.0 * odg.powf(theta));
    let s1 = (a + sigma + 0.5) * a.powf(theta) / odg;
    let s2 = ((1.0 + delta_g) / sigma)
        * (lh * s0 * s0 * eps1.powf(1.0 - theta) / (2.0 * odg) + s1 * s0.powf(1.0 + theta));
    let eps2 = if theta == 0.0 {
        eps1
    } else {
        eps1.min((2.0 * s2).powf(-1.0 / theta))
    };
    let eps3 = eps2 / (1.0 + 2.0 * s0);
    Ok(ScConstants {
        varsigma0: s0,
        varsigma1: s1,
        varsigma2: s2,
        eps1,
        eps2,
        eps3,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct K3Bounds {
    pub c_nc: f64,
    pub c_sol: f64,
    pub k3: u64,
}

/// `c_nc = 17/(10368√L_h)`.
pub fn nc_decrease_constant(lh: f64) -> f64 {
    17.0 / (10368.0 * lh.sqrt())
}

/// `c_sol = √2η/(9√3(L_h + η)^{3/2})`.
pub fn sol_decrease_constant(lh: f64, eta: f64) -> f64 {
    2f64.sqrt() * eta / (9.0 * 3f64.sqrt() * (lh + eta).powf(1.5))
}

/// `K̄₃ = ⌈2(f₀ − f_*)/min{c_nc, c_sol}·ε^{−3/2}⌉ + 1`.
pub fn theoretical_bounds_k3(f0: f64, f_star: Option<f64>, lh: f64, eta: f64, eps: f64) -> Result<K3Bounds> {
    let gap = checked_gap(f0, f_star)?;
    positive("lipschitz_hess", lh)?;
    positive("eta", eta)?;
    positive("eps", eps)?;
    let c_nc = nc_decrease_constant(lh);
    let c_sol = sol_decrease_constant(lh, eta);
    let k3 = ceil_count(2.0 * gap / c_nc.min(c_sol) * eps.powf(-1.5))? + 1;
    Ok(K3Bounds { c_nc, c_sol, k3 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ck_global_examples() {
        assert_relative_eq!(ck_global(2.0, 1.0, 1.0, 0.0, 0.0).unwrap(), 4.0);
        assert_relative_eq!(ck_global(2.0, 1.0, 0.0, 0.25, 0.5).unwrap(), 12.0);
        assert!(ck_global(2.0, 1.0, 0.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn ck_global_is_increasing() {
        let base = ck_global(2.0, 1.0, 0.3, 0.1, 0.2).unwrap();
        assert!(ck_global(2.0, 1.0, 0.3, 0.11, 0.2).unwrap() > base);
        assert!(ck_global(2.0, 1.0, 0.3, 0.1, 0.21).unwrap() > base);
        assert!(ck_global(2.0, 1.0, 0.31, 0.1, 0.2).unwrap() > base);
        assert!(ck_global(2.0, 1.01, 0.3, 0.1, 0.2).unwrap() > base);
    }

    #[test]
    fn ck_local_examples() {
        assert_eq!(ck_local(2.0, 1.0, 0.0, 0.0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(ck_local(2.0, 1.0, 0.5, 0.0, 0.0).unwrap(), 2.0);
        assert!(ck_local(2.0, 1.0, 1.0, 0.5, 0.0).is_err());
        assert!(ck_local(2.0, 1.0, 0.999, 0.5, 0.0).unwrap() > 1e3);
    }

    #[test]
    fn rnm_ck_examples() {
        assert_relative_eq!(rnm_ck(2.0, 1.0, 1.0, 0.0, 0.0).unwrap(), 4.0);
        let diff = ck_global(2.0, 1.0, 0.0, 0.25, 0.5).unwrap() - rnm_ck(2.0, 1.0, 0.0, 0.25, 0.5).unwrap();
        assert_relative_eq!(diff, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn rnm_ck_local_at_zero_inexactness() {
        assert_relative_eq!(rnm_ck_local(2.0, 1.0, 0.5, 0.0, 0.0).unwrap(), 0.5);
        assert_eq!(rnm_ck_local(2.0, 1.0, 0.0, 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn k1_examples() {
        assert_eq!(iteration_bound_k1(1.0, Some(1.0), 2.0, 1.0, 0.0, 0.0, 1e-3).unwrap(), 0);
        assert_relative_eq!(beta0(2.0, 1.0, 0.0, 0.0).unwrap(), 6.0);
        // 2·7.5²·1/1e-2 = 11250.
        assert_eq!(iteration_bound_k1(1.0, Some(0.0), 2.0, 1.0, 0.0, 0.0, 0.1).unwrap(), 11250);
        assert!(matches!(
            iteration_bound_k1(1.0, None, 2.0, 1.0, 0.0, 0.0, 0.1),
            Err(Error::MissingConstant(_))
        ));
        let a = iteration_bound_k1(1.0, Some(0.0), 2.0, 1.0, 0.1, 0.1, 0.1).unwrap();
        let b = iteration_bound_k1(1.0, Some(0.0), 2.0, 1.0, 0.1, 0.1, 0.2).unwrap();
        assert!(a > b);
    }

    #[test]
    fn k2_uses_smooth_beta() {
        assert_relative_eq!(beta0_tilde(2.0, 1.0, 0.0, 0.0).unwrap(), 6.0);
        assert!(beta0_tilde(2.0, 1.0, 0.25, 0.5).unwrap() < beta0(2.0, 1.0, 0.25, 0.5).unwrap());
        assert_eq!(iteration_bound_k2(1.0, Some(0.0), 2.0, 1.0, 0.0, 0.0, 0.1).unwrap(), 11250);
    }

    #[test]
    fn sc_mu_examples() {
        assert_relative_eq!(sc_mu(1.0, 0.0, 1.0, 1.0).unwrap(), 0.25);
        assert_eq!(sc_mu(1.0, 0.0, 1e-6, 1.0).unwrap(), 1.0);
        assert_relative_eq!(sc_mu(1.0, 0.2, 123.0, 0.0).unwrap(), 0.2);
        assert!(sc_mu(1.0, 0.0, 0.0, 0.5).is_err());
        assert!(sc_mu(1.0, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn sc_constant_examples() {
        let c = theoretical_sc_constants(1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(c.varsigma0, 6.0);
        assert_relative_eq!(c.eps1, 1.0 / 7.0);
        for v in [c.varsigma0, c.varsigma1, c.varsigma2, c.eps1, c.eps2, c.eps3] {
            assert!(v > 0.0);
        }
        assert!(c.eps3 < c.eps2 && c.eps2 <= c.eps1);
        let c0 = theoretical_sc_constants(1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(c0.eps2, c0.eps1);
        assert!(theoretical_sc_constants(1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn sc_constants_by_hand() {
        // θ = 1, δ = 0, σ = L_g = L_h = ε̂₀ = U_g = 1: A = 2.5, ς₁ = 4·2.5 = 10,
        // ς₂ = 36/2 + 10·36 = 378.
        let c = theoretical_sc_constants(1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(c.varsigma1, 10.0);
        assert_relative_eq!(c.varsigma2, 378.0);
        assert_relative_eq!(c.eps2, 1.0 / 756.0);
        assert_relative_eq!(c.eps3, 1.0 / (756.0 * 13.0));
    }

    #[test]
    fn k3_examples() {
        let b = theoretical_bounds_k3(1.0, Some(0.0), 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(b.c_nc, 17.0 / 10368.0);
        assert_relative_eq!(b.c_sol, 1.0 / (18.0 * 3f64.sqrt()), epsilon = 1e-15);
        assert_eq!(b.k3, 1221);
        assert!(theoretical_bounds_k3(1.0, None, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn decrease_certificate_cases() {
        assert!(decrease_certificate(1.0, 1.0, 0.5, 0.0));
        assert!(decrease_certificate(1.0, 0.5, 0.5, 1.0));
        assert!(!decrease_certificate(1.0, 0.6, 0.5, 1.0));
        assert!(!decrease_certificate(1.0, 0.0, -0.1, 1.0));
    }
}
