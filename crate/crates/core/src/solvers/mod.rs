//! Objective-evaluation-free solvers and their bound calculators.
//!
//! Every solver takes a [`CompositeProblem`] and a starting point, queries
//! derivatives only through an [`crate::oracles::Oracle`] over the problem's
//! counting view, and returns a [`crate::trace::SolverTrace`]. With
//! certificates enabled, exact derivatives and objective values are computed
//! out-of-band on the raw problem and never reach the iteration logic.

mod bounds;
mod pnm;
mod rn2cm;
mod rnm;
mod sc;
mod subproblem;

pub use bounds::{
    beta0, beta0_tilde, ck_global, ck_local, decrease_certificate, iteration_bound_k1,
    iteration_bound_k2, nc_decrease_constant, pnm_decrease_coefficient, rnm_ck, rnm_ck_local,
    rnm_decrease_coefficient, sc_mu, sol_decrease_constant, theoretical_bounds_k3,
    theoretical_sc_constants, K3Bounds, ScConstants,
};
pub use pnm::{pnm_run, CkMode, PnmConfig};
pub use rn2cm::{
    k3_for, nc_step, operation_accounting, rn2cm_run, sol_cg_budget, sol_cg_tolerance,
    sol_step_size, ComplexityReport, Rn2cmConfig,
};
pub use rnm::{rnm_run, rnm_step, RnmConfig};
pub use sc::{sc_run, ScConfig};
pub use subproblem::{solve_subproblem, Model, SubproblemSolution};

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::problem::CompositeProblem;
use crate::Vector;

pub(crate) fn positive_finite(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} = {v} must be positive and finite")))
    }
}

pub(crate) fn check_start(problem: &CompositeProblem, x0: &Vector) -> Result<()> {
    ensure_dim(problem.dim(), x0)?;
    ensure_finite("x0", x0)?;
    if !problem.nonsmooth.value(x0).is_finite() {
        return Err(Error::InvalidArgument("x0 lies outside the domain of h".into()));
    }
    Ok(())
}

pub(crate) fn check_smooth_start(problem: &CompositeProblem, x0: &Vector) -> Result<()> {
    if !problem.nonsmooth.is_zero() {
        return Err(Error::InvalidConfig(
            "this solver handles smooth problems only; use pnm for a nonsmooth term".into(),
        ));
    }
    check_start(problem, x0)
}
