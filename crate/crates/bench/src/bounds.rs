//! Theoretical bound table for one experiment.

use anyhow::Result;

use oef_core::oracles::{gradient_sample_size, hessian_sample_size, sosp_sample_sizes, InexactnessPolicy};
use oef_core::solvers::{
    iteration_bound_k1, iteration_bound_k2, theoretical_bounds_k3, theoretical_sc_constants, PnmConfig,
    Rn2cmConfig, RnmConfig, ScConfig,
};

use crate::config::{Experiment, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub quantity: String,
    /// `None` renders as `N/A`.
    pub value: Option<f64>,
    pub note: String,
}

fn row(quantity: &str, value: Option<f64>, note: impl Into<String>) -> BoundRow {
    BoundRow {
        quantity: quantity.to_string(),
        value,
        note: note.into(),
    }
}

fn from_result<T: Into<f64>>(quantity: &str, r: oef_core::Result<T>) -> BoundRow {
    match r {
        Ok(v) => row(quantity, Some(v.into()), ""),
        Err(e) => row(quantity, None, e.to_string()),
    }
}

fn count(v: u64) -> f64 {
    v as f64
}

/// Ball radius `ε̂₀` on a log grid that maximizes `ε̂₃`.
fn best_ball(sigma: f64, lg: f64, lh: f64, dg: f64, dh: f64, theta: f64, ug: f64) -> Option<(f64, f64)> {
    (-80..=40)
        .map(|i| 10f64.powf(i as f64 / 10.0))
        .filter_map(|e0| {
            theoretical_sc_constants(sigma, lg, lh, e0, dg, dh, theta, ug)
                .ok()
                .map(|c| (e0, c.eps3))
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

/// Builds the table. Each solver's rows use the configured settings when the
/// experiment targets that solver and the solver defaults otherwise, with the
/// oracle levels of the experiment.
pub fn bounds(exp: &Experiment) -> Result<Vec<BoundRow>> {
    let p = &exp.problem;
    let k = p.smooth().constants();
    let o = &exp.config.constants;
    let lg = o.lipschitz_grad.unwrap_or(k.lipschitz_grad);
    let lh = o.lipschitz_hess.or(k.lipschitz_hess);
    let sigma = o.strong_convexity.unwrap_or(k.strong_convexity);
    let f_star = o.lower_bound.or(p.lower_bound);
    let x0 = exp.config.start.point(p, exp.seeds[0])?;
    let phi0 = o.initial_value.unwrap_or_else(|| p.objective(&x0));
    let policy: InexactnessPolicy = match &exp.solver {
        SolverConfig::Pnm(c) => c.oracle.clone(),
        SolverConfig::Rnm(c) => c.oracle.clone(),
        SolverConfig::Sc(c) => c.oracle.clone(),
        SolverConfig::Rn2cm(c) => c.oracle.clone(),
    };
    let (dg, dh) = (policy.delta_g, policy.delta_h);

    let mut rows = vec![
        row("lipschitz_grad", Some(lg), ""),
        row("lipschitz_hess", lh, if lh.is_none() { "unknown" } else { "" }),
        row("strong_convexity", Some(sigma), ""),
        row("lower_bound", f_star, if f_star.is_none() { "unknown" } else { "" }),
        row("initial_value", Some(phi0), ""),
    ];

    let pnm = match &exp.solver {
        SolverConfig::Pnm(c) => c.clone(),
        _ => PnmConfig::default(),
    };
    rows.push(from_result(
        "K1",
        iteration_bound_k1(phi0, f_star, pnm.gamma, lg, dg, dh, pnm.eps).map(count),
    ));
    let rnm = match &exp.solver {
        SolverConfig::Rnm(c) => c.clone(),
        _ => RnmConfig::default(),
    };
    rows.push(from_result(
        "K2",
        iteration_bound_k2(phi0, f_star, rnm.gamma, lg, dg, dh, rnm.eps).map(count),
    ));

    let rn2cm = match &exp.solver {
        SolverConfig::Rn2cm(c) => c.clone(),
        _ => Rn2cmConfig::default(),
    };
    match lh {
        Some(lh) => match theoretical_bounds_k3(phi0, f_star, lh, rn2cm.eta, rn2cm.eps_g) {
            Ok(b) => {
                rows.push(row("c_nc", Some(b.c_nc), ""));
                rows.push(row("c_sol", Some(b.c_sol), ""));
                rows.push(row("K3", Some(count(b.k3)), ""));
            }
            Err(e) => {
                rows.push(row("K3", None, e.to_string()));
            }
        },
        None => rows.push(row("K3", None, "L_h unknown")),
    }

    let sc = match &exp.solver {
        SolverConfig::Sc(c) => c.clone(),
        _ => ScConfig::default(),
    };
    let sc_names = ["eps0", "varsigma0", "varsigma1", "varsigma2", "eps1", "eps2", "eps3"];
    let ug = 2.0 * lg;
    let sc_rows = match lh {
        Some(lh) if sigma > 0.0 => best_ball(sigma, lg, lh, dg, dh, sc.theta, ug)
            .ok_or_else(|| "no admissible ball radius".to_string())
            .and_then(|(e0, _)| {
                theoretical_sc_constants(sigma, lg, lh, e0, dg, dh, sc.theta, ug)
                    .map(|c| vec![e0, c.varsigma0, c.varsigma1, c.varsigma2, c.eps1, c.eps2, c.eps3])
                    .map_err(|e| e.to_string())
            }),
        Some(_) => Err("sigma unknown".to_string()),
        None => Err("L_h unknown".to_string()),
    };
    match sc_rows {
        Ok(vals) => rows.extend(sc_names.iter().zip(vals).map(|(n, v)| row(n, Some(v), ""))),
        Err(e) => rows.extend(sc_names.iter().map(|n| row(n, None, e.clone()))),
    }

    match p.finite_sum() {
        Some(fs) => {
            let cb = fs.component_bounds();
            let m = fs.num_components();
            let n = p.dim();
            let conf = policy.confidence;
            let eps = match &exp.solver {
                SolverConfig::Pnm(c) => c.eps,
                SolverConfig::Rnm(c) => c.eps,
                SolverConfig::Sc(c) => c.eps,
                SolverConfig::Rn2cm(c) => c.eps_g,
            };
            let sized = |r: oef_core::Result<usize>| r.map(|s| s as f64);
            rows.push(from_result(
                "sample_gradient",
                sized(gradient_sample_size(dg, eps, cb.gradient, conf, Some(m))),
            ));
            rows.push(from_result(
                "sample_hessian",
                sized(hessian_sample_size(dh, n, cb.hessian, conf, Some(m))),
            ));
            match lh {
                Some(lh) => {
                    let eps_h = (lh * rn2cm.eps_g).sqrt();
                    match sosp_sample_sizes(rn2cm.eps_g, eps_h, n, cb.gradient, cb.hessian, conf, Some(m)) {
                        Ok((sg, sh)) => {
                            rows.push(row("sample_gradient_second_order", Some(sg as f64), ""));
                            rows.push(row("sample_hessian_second_order", Some(sh as f64), ""));
                        }
                        Err(e) => {
                            rows.push(row("sample_gradient_second_order", None, e.to_string()));
                            rows.push(row("sample_hessian_second_order", None, e.to_string()));
                        }
                    }
                }
                None => {
                    rows.push(row("sample_gradient_second_order", None, "L_h unknown"));
                    rows.push(row("sample_hessian_second_order", None, "L_h unknown"));
                }
            }
        }
        None => {
            for n in [
                "sample_gradient",
                "sample_hessian",
                "sample_gradient_second_order",
                "sample_hessian_second_order",
            ] {
                rows.push(row(n, None, "not a finite sum"));
            }
        }
    }
    Ok(rows)
}

pub fn render(rows: &[BoundRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["quantity", "value", "note"])?;
    for r in rows {
        let v = r.value.map(|v| v.to_string()).unwrap_or_else(|| "N/A".into());
        w.write_record([r.quantity.as_str(), v.as_str(), r.note.as_str()])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
