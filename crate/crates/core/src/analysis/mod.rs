//! Reachability, counterexample analysis and the refinement loop.

pub mod cegar;
pub mod path;
pub mod reach;
pub mod refine;

pub use path::{check_feasibility, path_formula, ssa_name, split_ssa_name, PathFeasibility, PathFormula, PathModel, PathStep, Witness};
pub use reach::{run_cpa_plus, Arg, ArgNode, Limit, ReachOptions, ReachOutcome, ReachResult};
pub use refine::{discover_predicates, extend_precision, DiscoveredPredicates};
pub use cegar::{thread_cpu_time, verify, verify_with, Counterexample, Statistics, Verdict, VerificationReport, VerifyError};
