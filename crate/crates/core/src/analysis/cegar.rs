//! Counterexample-guided refinement around the reachability algorithm.

use std::fmt;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::config::Config;
use crate::cpa::{AnyPrecision, CompositePrecision, CompositeState, Cpa, CpaRegistry, RegistryError};
use crate::domains::PredicatePrecision;
use crate::frontend::{CfaEdge, ProgramRef};
use crate::interp::{replay, Outcome};
use crate::solver::{Model, Solver};

use super::path::{check_feasibility, PathFeasibility, Witness};
use super::reach::{run_cpa_plus, Arg, ReachOptions, ReachOutcome};
use super::refine::{discover_predicates, extend_precision};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Safe,
    Unsafe,
    Unknown(String),
}

impl Verdict {
    /// Process exit status for this verdict.
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Safe => 0,
            Verdict::Unsafe => 1,
            Verdict::Unknown(_) => 2,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Safe => "SAFE",
            Verdict::Unsafe => "UNSAFE",
            Verdict::Unknown(_) => "UNKNOWN",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Counterexample {
    pub edges: Vec<CfaEdge>,
    /// Abstract states along the path, one more than there are edges.
    pub states: Vec<CompositeState>,
    pub model: Model,
    pub witness: Witness,
    /// The model is rational only; the path may not be executable.
    pub relaxed: bool,
    /// Result of running the witness on the concrete interpreter.
    pub replay: Outcome,
}

#[derive(Debug, Clone, Default)]
pub struct Statistics {
    /// Distinct predicates in the final precision.
    pub predicates: usize,
    /// Predicates summed over locations.
    pub predicates_per_location: usize,
    pub refinements: usize,
    /// Reached-set size of the last reachability run.
    pub reached: usize,
    /// Waitlist pops over all runs.
    pub pops: usize,
    pub wall_time: Duration,
    /// Thread CPU time, where the platform reports it.
    pub cpu_time: Option<Duration>,
}

#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub verdict: Verdict,
    pub counterexample: Option<Counterexample>,
    pub stats: Statistics,
    pub precision: PredicatePrecision,
    /// Per-location precision size after each refinement.
    pub precision_growth: Vec<usize>,
    /// Graph of the last reachability run.
    pub arg: Arg<CompositeState, CompositePrecision>,
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

/// CPU time consumed by the calling thread.
pub fn thread_cpu_time() -> Option<Duration> {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid out-pointer for the duration of the call.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    (rc == 0).then(|| Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32))
}

/// Verifies `program` with the built-in analyses.
pub fn verify(program: &ProgramRef, config: &Config) -> Result<VerificationReport, VerifyError> {
    verify_with(&CpaRegistry::with_defaults(), program, config)
}

/// Verifies `program`, resolving analysis names through `registry`.
pub fn verify_with(registry: &CpaRegistry, program: &ProgramRef, config: &Config) -> Result<VerificationReport, VerifyError> {
    let start = Instant::now();
    let cpu_start = thread_cpu_time();
    let cpa = registry.build_composite(program, config)?;
    let solver = Solver::new(config.solver_max_constraints);
    let pred_index = cpa.index_of("predicate");
    let base_precision = cpa.initial_precision();
    let opts = ReachOptions {
        order: config.waitlist,
        max_pops: config.limits.max_pops,
        deadline: config.limits.time_limit.map(|t| start + t),
        check_invariants: false,
    };
    let mut precision = PredicatePrecision::new();
    let mut growth = Vec::new();
    let mut stats = Statistics::default();
    let (verdict, counterexample, arg) = loop {
        let init_prec = match pred_index {
            Some(i) => base_precision.with_component(i, AnyPrecision::new(precision.clone())),
            None => base_precision.clone(),
        };
        let result = run_cpa_plus(&cpa, program, cpa.initial_state(program.entry()), init_prec, &opts);
        stats.pops += result.pops;
        stats.reached = result.reached_count();
        let node = match result.outcome {
            ReachOutcome::Completed => break (Verdict::Safe, None, result.arg),
            ReachOutcome::LimitExceeded(l) => break (Verdict::Unknown(l.to_string()), None, result.arg),
            ReachOutcome::ErrorReached(n) => n,
        };
        let (edges, ids) = result.arg.path_to(node);
        let states: Vec<CompositeState> = ids.iter().map(|&i| result.arg.node(i).state.clone()).collect();
        let (model, relaxed) = match check_feasibility(program, &edges, &solver) {
            PathFeasibility::Concrete(m) => (m, false),
            PathFeasibility::RelaxedOnly(m) => (m, true),
            PathFeasibility::Infeasible(k) => {
                let Some(_) = pred_index else {
                    let why = "spurious counterexample and no predicate analysis to refine";
                    break (Verdict::Unknown(why.into()), None, result.arg);
                };
                if stats.refinements >= config.limits.max_refinements {
                    let why = format!("refinement limit ({}) reached", config.limits.max_refinements);
                    break (Verdict::Unknown(why), None, result.arg);
                }
                if opts.deadline.is_some_and(|d| Instant::now() >= d) {
                    break (Verdict::Unknown("time limit exceeded".into()), None, result.arg);
                }
                let found = match discover_predicates(program, &edges, k, &solver) {
                    Ok(f) => f,
                    Err(e) => break (Verdict::Unknown(format!("refinement failed: {e}")), None, result.arg),
                };
                if extend_precision(&mut precision, &found, config.scope) == 0 {
                    let why = "refinement found no new predicates";
                    break (Verdict::Unknown(why.into()), None, result.arg);
                }
                stats.refinements += 1;
                growth.push(precision.per_location_sum());
                continue;
            }
        };
        let replay = replay(program.ast(), &model.witness);
        let cex = Counterexample {
            edges,
            states,
            model: model.model,
            witness: model.witness,
            relaxed,
            replay,
        };
        break (Verdict::Unsafe, Some(cex), result.arg);
    };
    stats.predicates = precision.distinct().len();
    stats.predicates_per_location = precision.per_location_sum();
    stats.wall_time = start.elapsed();
    stats.cpu_time = match (cpu_start, thread_cpu_time()) {
        (Some(a), Some(b)) => Some(b.saturating_sub(a)),
        _ => None,
    };
    Ok(VerificationReport {
        verdict,
        counterexample,
        stats,
        precision,
        precision_growth: growth,
        arg,
    })
}
