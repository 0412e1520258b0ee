//! Objective representations, proximal regularizers and built-in instances.

mod audit;
pub mod builtin;
mod composite;
mod prox;
mod smooth;

pub use audit::{AuditCounts, Audited};
pub use builtin::{builtin_problem, ProblemDescriptor, ProblemKind};
pub use composite::{kkt_residual, CompositeProblem};
pub use prox::Regularizer;
pub use smooth::{ComponentBounds, FiniteSum, SmoothConstants, SmoothObjective};
