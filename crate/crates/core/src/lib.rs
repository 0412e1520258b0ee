//! Objective-evaluation-free Newton-type methods driven by inexact gradients
//! and Hessians.
//!
//! The crate is organised bottom-up:
//!
//! - [`problem`]: smooth objectives, finite sums, proximal regularizers and the
//!   built-in benchmark instances.
//! - [`oracles`]: inexact derivative oracles (seeded adversarial noise and
//!   finite-sum subsampling) together with the sample-size rules.
//! - [`linalg`]: conjugate gradients with relative-residual stopping,
//!   minimum-eigenvalue estimation and the regularized Hessian operator.
//! - [`solvers`]: the proximal Newton-type method, the regularized Newton
//!   method, the strongly convex Newton-type method and the two-phase
//!   regularized Newton / negative curvature method, each with the bound
//!   calculators used to certify their runs.
//!
//! None of the solvers ever evaluate the objective. Every run reports how many
//! objective evaluations went through its oracle wrapper, and that count must
//! be zero.

pub mod error;
pub mod linalg;
pub mod oracles;
pub mod problem;
pub mod rates;
pub mod rng;
pub mod solvers;
pub mod trace;

pub use error::{Error, Result};

/// Dense column vector used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
