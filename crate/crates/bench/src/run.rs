//! Seed sweeps and their artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use oef_core::problem::{AuditCounts, CompositeProblem};
use oef_core::rates::{fit_order, median, usable_pairs};
use oef_core::solvers::{iteration_bound_k1, iteration_bound_k2, k3_for, pnm_run, rn2cm_run, rnm_run, sc_run};
use oef_core::trace::SolverTrace;
use oef_core::{Error, Vector};

use crate::config::{Experiment, SolverConfig};
use crate::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstFailure {
    pub k: usize,
    pub certificate: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    /// Set when the solver returned an error instead of a trace.
    pub error: Option<String>,
    pub iterations: usize,
    pub termination: Option<String>,
    pub residual: Option<f64>,
    /// Computed out-of-band, only with certificates on.
    pub exact_residual: Option<f64>,
    pub certificates_passed: usize,
    pub certificates_total: usize,
    pub first_failure: Option<FirstFailure>,
    pub bound_name: Option<String>,
    pub bound: Option<u64>,
    pub bound_ratio: Option<f64>,
    pub wall_time_s: f64,
    pub operations: AuditCounts,
    pub cg_iterations: usize,
    pub eigen_matvecs: usize,
    pub inner_iterations: usize,
    pub rate_pairs: usize,
    pub fitted_order: Option<f64>,
    pub events: usize,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.first_failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub solver: String,
    pub problem: String,
    pub certificates: bool,
    pub runs: Vec<RunSummary>,
    pub all_passed: bool,
    pub decrease_pass_rate: Option<f64>,
    pub median_order: Option<f64>,
}

fn solve(problem: &CompositeProblem, solver: &SolverConfig, x0: &Vector) -> oef_core::Result<SolverTrace> {
    match solver {
        SolverConfig::Pnm(c) => pnm_run(problem, c, x0),
        SolverConfig::Rnm(c) => rnm_run(problem, c, x0),
        SolverConfig::Sc(c) => sc_run(problem, c, x0),
        SolverConfig::Rn2cm(c) => rn2cm_run(problem, c, x0),
    }
}

/// `(name, value)` of the iteration bound for this solver, when the constants
/// it needs are known.
fn iteration_bound(problem: &CompositeProblem, solver: &SolverConfig, x0: &Vector) -> Option<(&'static str, u64)> {
    let lg = problem.smooth().constants().lipschitz_grad;
    match solver {
        SolverConfig::Pnm(c) => iteration_bound_k1(
            problem.objective(x0),
            problem.lower_bound,
            c.gamma,
            lg,
            c.oracle.delta_g,
            c.oracle.delta_h,
            c.eps,
        )
        .ok()
        .map(|k| ("K1", k)),
        SolverConfig::Rnm(c) => iteration_bound_k2(
            problem.smooth().value(x0),
            problem.lower_bound,
            c.gamma,
            lg,
            c.oracle.delta_g,
            c.oracle.delta_h,
            c.eps,
        )
        .ok()
        .map(|k| ("K2", k)),
        SolverConfig::Sc(_) => None,
        SolverConfig::Rn2cm(c) => k3_for(problem, c, x0).ok().map(|k| ("K3", k)),
    }
}

struct SeedRun {
    summary: RunSummary,
    trace: Option<SolverTrace>,
    invalid: bool,
}

fn run_seed(exp: &Experiment, seed: u64) -> SeedRun {
    let mut summary = RunSummary {
        seed,
        error: None,
        iterations: 0,
        termination: None,
        residual: None,
        exact_residual: None,
        certificates_passed: 0,
        certificates_total: 0,
        first_failure: None,
        bound_name: None,
        bound: None,
        bound_ratio: None,
        wall_time_s: 0.0,
        operations: AuditCounts::default(),
        cg_iterations: 0,
        eigen_matvecs: 0,
        inner_iterations: 0,
        rate_pairs: 0,
        fitted_order: None,
        events: 0,
    };
    let x0 = match exp.config.start.point(&exp.problem, seed) {
        Ok(x) => x,
        Err(e) => {
            summary.error = Some(format!("{e:#}"));
            return SeedRun {
                summary,
                trace: None,
                invalid: true,
            };
        }
    };
    let solver = exp.solver.for_seed(seed);
    let started = Instant::now();
    let result = solve(&exp.problem, &solver, &x0);
    summary.wall_time_s = started.elapsed().as_secs_f64();
    let trace = match result {
        Ok(t) => t,
        Err(e) => {
            let invalid = matches!(
                e,
                Error::InvalidConfig(_) | Error::InvalidArgument(_) | Error::MissingConstant(_)
            );
            summary.error = Some(e.to_string());
            return SeedRun {
                summary,
                trace: None,
                invalid,
            };
        }
    };
    let certify = solver.certificates();
    summary.iterations = trace.iterations();
    summary.termination = Some(format!("{:?}", trace.termination));
    summary.residual = trace.records.last().map(|r| r.residual);
    if certify {
        summary.exact_residual = Some(exact_residual_norm(&exp.problem, &trace.final_point()));
    }
    let (passed, total) = trace.certificate_counts();
    summary.certificates_passed = passed;
    summary.certificates_total = total;
    summary.first_failure = trace.first_failure().map(|(k, c)| FirstFailure {
        k,
        certificate: c.name.clone(),
        lhs: c.lhs,
        rhs: c.rhs,
    });
    if let Some((name, b)) = iteration_bound(&exp.problem, &solver, &x0) {
        summary.bound_name = Some(name.to_string());
        summary.bound = Some(b);
        summary.bound_ratio = Some(summary.iterations as f64 / b as f64);
    }
    summary.operations = trace.audit;
    summary.cg_iterations = trace.records.iter().map(|r| r.cg_iterations).sum();
    summary.eigen_matvecs = trace.records.iter().map(|r| r.eigen_matvecs).sum();
    summary.inner_iterations = trace.records.iter().map(|r| r.inner_iterations).sum();
    let errors = trace.errors();
    summary.rate_pairs = usable_pairs(&errors).len();
    summary.fitted_order = fit_order(&errors);
    summary.events = trace.events.len();
    SeedRun {
        summary,
        trace: Some(trace),
        invalid: false,
    }
}

fn exact_residual_norm(problem: &CompositeProblem, x: &Vector) -> f64 {
    problem.exact_residual(x).norm()
}

pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed-{seed}.csv"))
}

fn bounds_table(runs: &[RunSummary]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seed", "bound", "value", "observed", "ratio", "certified"])?;
    for r in runs {
        let na = || "N/A".to_string();
        w.write_record([
            r.seed.to_string(),
            r.bound_name.clone().unwrap_or_else(na),
            r.bound.map(|b| b.to_string()).unwrap_or_else(na),
            r.iterations.to_string(),
            r.bound_ratio.map(|x| format!("{x:e}")).unwrap_or_else(na),
            r.passed().to_string(),
        ])?;
    }
    Ok(w.into_inner()?)
}

/// Outcome of a sweep, mapped to the process exit code by the caller.
pub enum Outcome {
    Passed,
    Failed(Vec<String>),
    Invalid(String),
}

/// Runs every seed, writes the artifacts and reports the outcome.
pub fn run(exp: &Experiment) -> Result<(Summary, Outcome)> {
    std::fs::create_dir_all(&exp.output_dir)?;
    let results: Vec<Result<SeedRun>> = exp
        .seeds
        .par_iter()
        .map(|&seed| {
            let r = run_seed(exp, seed);
            if let Some(t) = &r.trace {
                let mut buf = Vec::new();
                t.write_csv(&mut buf)?;
                write_atomic(&trace_path(&exp.output_dir, seed), &buf)?;
            }
            Ok(r)
        })
        .collect();
    let mut runs = Vec::with_capacity(results.len());
    let mut invalid = None;
    for r in results {
        let r = r?;
        if r.invalid && invalid.is_none() {
            invalid = r.summary.error.clone();
        }
        runs.push(r.summary);
    }
    let decrease: Vec<bool> = runs
        .iter()
        .filter(|r| r.error.is_none() && r.certificates_total > 0)
        .map(|r| r.first_failure.as_ref().is_none_or(|f| f.certificate != "decrease"))
        .collect();
    let decrease_pass_rate = if decrease.is_empty() {
        None
    } else {
        Some(decrease.iter().filter(|&&ok| ok).count() as f64 / decrease.len() as f64)
    };
    let orders: Vec<f64> = runs.iter().filter_map(|r| r.fitted_order).collect();
    let summary = Summary {
        name: exp.name.clone(),
        solver: exp.config.solver.name().to_string(),
        problem: exp.config.problem.name.clone(),
        certificates: exp.solver.certificates(),
        all_passed: runs.iter().all(|r| r.passed()),
        decrease_pass_rate,
        median_order: median(&orders),
        runs,
    };
    write_atomic(&exp.output_dir.join("summary.json"), &serde_json::to_vec_pretty(&summary)?)?;
    write_atomic(&exp.output_dir.join("bounds.csv"), &bounds_table(&summary.runs)?)?;

    if let Some(msg) = invalid {
        return Ok((summary, Outcome::Invalid(msg)));
    }
    let failures: Vec<String> = summary
        .runs
        .iter()
        .filter(|r| !r.passed())
        .map(|r| match (&r.error, &r.first_failure) {
            (Some(e), _) => format!("seed {}: solver error: {e}", r.seed),
            (None, Some(f)) => format!(
                "seed {}: certificate `{}` failed at iteration {} ({:e} vs {:e})",
                r.seed, f.certificate, f.k, f.lhs, f.rhs
            ),
            (None, None) => unreachable!("a run without error or failure passes"),
        })
        .collect();
    let outcome = if failures.is_empty() {
        Outcome::Passed
    } else {
        Outcome::Failed(failures)
    };
    Ok((summary, outcome))
}
