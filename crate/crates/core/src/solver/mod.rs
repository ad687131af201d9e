//! Linear integer arithmetic over exact rationals.

mod fm;
mod linear;
mod witness;

use thiserror::Error;

pub use fm::{Feasibility, Solver, DEFAULT_MAX_CONSTRAINTS};
pub use linear::{condition_dnf, normalize_condition, Conjunction, LinearConstraint, LinearTerm, Model, Relation};
pub use witness::{integer_witness, IntBox, MAX_BOX_VOLUME};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("nonlinear term: {0}")]
    Nonlinear(String),
    #[error("not an arithmetic expression: {0}")]
    NotArithmetic(String),
    #[error("constraint blow-up: more than {limit} constraints")]
    Blowup { limit: usize },
    #[error("search box too large ({volume} points)")]
    BoxTooLarge { volume: u64 },
    #[error("variable {0} has no bound")]
    Unbounded(String),
}

/// Feasibility with the default constraint cap.
pub fn is_feasible(c: &Conjunction) -> Result<Feasibility, SolverError> {
    Solver::default().is_feasible(c)
}

/// Entailment with the default constraint cap.
pub fn entails(c: &Conjunction, atom: &LinearConstraint) -> bool {
    Solver::default().entails(c, atom)
}
