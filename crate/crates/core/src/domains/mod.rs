//! Bundled analyses.

pub mod callstack;
pub mod explicit;
pub mod location;
pub mod octagon;
pub mod predicate;

pub use callstack::{CallstackCpa, CallstackState, Frame};
pub use explicit::{ExplicitCpa, ExplicitPrecision, ExplicitState};
pub use location::{LocationCpa, LocationState};
pub use octagon::{Dbm, OctagonCpa, OctagonState};
pub use predicate::{Predicate, PredicateCpa, PredicatePrecision, PredicateState};

use crate::cpa::{CpaContext, DynCpa};
use crate::solver::Solver;

pub(crate) fn build_builtin(name: &str, ctx: &CpaContext) -> Result<Box<dyn DynCpa>, String> {
    let program = ctx.program.clone();
    let cfg = ctx.config;
    Ok(match name {
        "location" => Box::new(LocationCpa),
        "callstack" => Box::new(CallstackCpa::new(&program, cfg.callstack_depth)?),
        "explicit" => Box::new(ExplicitCpa::new(program, cfg.threshold, cfg.counter)),
        "octagon" => Box::new(OctagonCpa::new(program)),
        "predicate" => Box::new(PredicateCpa::new(program, Solver::new(cfg.solver_max_constraints))),
        other => return Err(format!("no built-in analysis named `{other}`")),
    })
}
