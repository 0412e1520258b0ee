//! Per-iteration solver records, certificate flags and CSV output.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::problem::AuditCounts;
use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    /// Proximal Newton step from the model subproblem.
    Prox,
    /// Regularized or plain Newton step from CG.
    Newton,
    /// Negative curvature step.
    Nc,
    Sol,
    /// Unit SOL step followed by termination.
    TerminalSol,
    /// No step taken at this record (stopping test or budget end).
    Stop,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Prox => "prox",
            StepKind::Newton => "newton",
            StepKind::Nc => "nc",
            StepKind::Sol => "sol",
            StepKind::TerminalSol => "terminal-sol",
            StepKind::Stop => "stop",
        }
    }
}

/// One checked inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub name: String,
    pub passed: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// Informational checks are reported but do not fail a run.
    pub required: bool,
}

impl Certificate {
    pub fn le(name: &str, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.to_string(),
            passed: lhs <= rhs,
            lhs,
            rhs,
            required: true,
        }
    }

    pub fn ge(name: &str, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.to_string(),
            passed: lhs >= rhs,
            lhs,
            rhs,
            required: true,
        }
    }

    pub fn informational(mut self) -> Self {
        self.required = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub x: Vec<f64>,
    /// `‖G̃(x_k)‖` for composite problems, `‖g_k‖` otherwise.
    pub residual: f64,
    /// Out-of-band: `‖G(x_k)‖` or `‖∇f(x_k)‖`.
    pub exact_residual: Option<f64>,
    /// Out-of-band: `φ(x_k)` or `f(x_k)`.
    pub objective: Option<f64>,
    /// Out-of-band: `‖x_k − x*‖`.
    pub error: Option<f64>,
    pub delta_g: f64,
    pub delta_h: f64,
    pub phase: Option<u8>,
    pub step: StepKind,
    pub c: Option<f64>,
    pub h_bound: Option<f64>,
    pub mu: Option<f64>,
    pub step_norm: Option<f64>,
    pub xi_norm: Option<f64>,
    pub alpha: Option<f64>,
    pub eigen_value: Option<f64>,
    pub inner_iterations: usize,
    pub cg_iterations: usize,
    pub cg_matvecs: usize,
    pub eigen_matvecs: usize,
    /// Applications of the sampled Hessian operator.
    pub hessian_matvecs: usize,
    pub gradient_samples: usize,
    pub hessian_samples: usize,
    pub counts: AuditCounts,
    pub certificates: Vec<Certificate>,
}

impl IterationRecord {
    pub fn new(k: usize, x: &Vector, residual: f64, delta_g: f64, delta_h: f64) -> Self {
        Self {
            k,
            x: x.iter().copied().collect(),
            residual,
            exact_residual: None,
            objective: None,
            error: None,
            delta_g,
            delta_h,
            phase: None,
            step: StepKind::Stop,
            c: None,
            h_bound: None,
            mu: None,
            step_norm: None,
            xi_norm: None,
            alpha: None,
            eigen_value: None,
            inner_iterations: 0,
            cg_iterations: 0,
            cg_matvecs: 0,
            eigen_matvecs: 0,
            hessian_matvecs: 0,
            gradient_samples: 0,
            hessian_samples: 0,
            counts: AuditCounts::default(),
            certificates: Vec::new(),
        }
    }

    pub fn certify(&mut self, c: Certificate) {
        self.certificates.push(c);
    }

    pub fn certificate(&self, name: &str) -> Option<&Certificate> {
        self.certificates.iter().find(|c| c.name == name)
    }

    pub fn passed(&self) -> bool {
        self.certificates.iter().all(|c| c.passed || !c.required)
    }

    pub fn x_vector(&self) -> Vector {
        Vector::from_vec(self.x.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// First-order stopping test met.
    Converged,
    /// Unit SOL step with a short direction.
    ShortStep,
    /// Second phase found no negative curvature.
    SecondPhase,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub solver: String,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    pub final_x: Vec<f64>,
    pub audit: AuditCounts,
    pub events: Vec<String>,
}

impl SolverTrace {
    pub fn new(solver: &str) -> Self {
        Self {
            solver: solver.to_string(),
            records: Vec::new(),
            termination: Termination::MaxIterations,
            final_x: Vec::new(),
            audit: AuditCounts::default(),
            events: Vec::new(),
        }
    }

    /// Index of the iteration at which the run stopped.
    pub fn iterations(&self) -> usize {
        self.records.last().map(|r| r.k).unwrap_or(0)
    }

    pub fn terminated(&self) -> bool {
        self.termination != Termination::MaxIterations
    }

    pub fn final_point(&self) -> Vector {
        Vector::from_vec(self.final_x.clone())
    }

    pub fn all_certificates_pass(&self) -> bool {
        self.records.iter().all(|r| r.passed())
    }

    /// First failing required certificate as `(k, certificate)`.
    pub fn first_failure(&self) -> Option<(usize, &Certificate)> {
        self.records.iter().find_map(|r| {
            r.certificates
                .iter()
                .find(|c| c.required && !c.passed)
                .map(|c| (r.k, c))
        })
    }

    pub fn certificate_counts(&self) -> (usize, usize) {
        let mut passed = 0;
        let mut total = 0;
        for c in self.records.iter().flat_map(|r| &r.certificates).filter(|c| c.required) {
            total += 1;
            if c.passed {
                passed += 1;
            }
        }
        (passed, total)
    }

    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.error).collect()
    }

    pub const CSV_HEADER: [&'static str; 33] = [
        "k",
        "phase",
        "step",
        "residual",
        "exact_residual",
        "objective",
        "error",
        "delta_g",
        "delta_h",
        "c",
        "h_bound",
        "mu",
        "step_norm",
        "xi_norm",
        "alpha",
        "eigen_value",
        "inner_iterations",
        "cg_iterations",
        "cg_matvecs",
        "eigen_matvecs",
        "hessian_matvecs",
        "gradient_samples",
        "hessian_samples",
        "objective_evals",
        "gradient_evals",
        "hessian_evals",
        "hessian_vector_products",
        "component_gradient_evals",
        "component_hessian_evals",
        "component_hessian_vector_products",
        "certificates_checked",
        "certificates_passed",
        "failed_certificates",
    ];

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|v| v.to_string()).unwrap_or_default()
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::CSV_HEADER)?;
        for r in &self.records {
            let failed: Vec<&str> = r
                .certificates
                .iter()
                .filter(|c| c.required && !c.passed)
                .map(|c| c.name.as_str())
                .collect();
            let checked = r.certificates.iter().filter(|c| c.required).count();
            let c = &r.counts;
            w.write_record([
                r.k.to_string(),
                opt(r.phase),
                r.step.as_str().to_string(),
                r.residual.to_string(),
                opt(r.exact_residual),
                opt(r.objective),
                opt(r.error),
                r.delta_g.to_string(),
                r.delta_h.to_string(),
                opt(r.c),
                opt(r.h_bound),
                opt(r.mu),
                opt(r.step_norm),
                opt(r.xi_norm),
                opt(r.alpha),
                opt(r.eigen_value),
                r.inner_iterations.to_string(),
                r.cg_iterations.to_string(),
                r.cg_matvecs.to_string(),
                r.eigen_matvecs.to_string(),
                r.hessian_matvecs.to_string(),
                r.gradient_samples.to_string(),
                r.hessian_samples.to_string(),
                c.objective_evals.to_string(),
                c.gradient_evals.to_string(),
                c.hessian_evals.to_string(),
                c.hessian_vector_products.to_string(),
                c.component_gradient_evals.to_string(),
                c.component_hessian_evals.to_string(),
                c.component_hessian_vector_products.to_string(),
                checked.to_string(),
                (checked - failed.len()).to_string(),
                failed.join(";"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn informational_certificates_do_not_fail() {
        let mut r = IterationRecord::new(0, &Vector::zeros(1), 1.0, 0.0, 0.0);
        r.certify(Certificate::le("contraction", 2.0, 1.0).informational());
        assert!(r.passed());
        r.certify(Certificate::ge("decrease", 0.0, 1.0));
        assert!(!r.passed());
    }

    #[test]
    fn csv_has_one_row_per_record() {
        let mut t = SolverTrace::new("test");
        t.records.push(IterationRecord::new(0, &Vector::zeros(2), 1.0, 0.0, 0.0));
        t.records.push(IterationRecord::new(1, &Vector::zeros(2), 0.5, 0.0, 0.0));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("k,phase,step"));
    }
}
