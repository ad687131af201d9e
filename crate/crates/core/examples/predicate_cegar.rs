//! One refinement round by hand: reach an error, find the path spurious,
//! mine predicates and rerun with them.

use std::sync::Arc;

use minicpa::analysis::{
    check_feasibility, discover_predicates, extend_precision, run_cpa_plus, PathFeasibility, ReachOptions,
    ReachOutcome,
};
use minicpa::config::{Config, PredicateScope, Threshold};
use minicpa::cpa::{AnyPrecision, Cpa, CpaRegistry};
use minicpa::domains::PredicatePrecision;
use minicpa::frontend::parse;
use minicpa::solver::Solver;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let program = Arc::new(parse("void main(){ int x; x = 0; x = x + 1; if (x == 0) { ERROR: ; } }")?);
    let cfg = Config::default().with_threshold(Threshold::Finite(0));
    let cpa = CpaRegistry::with_defaults().build_composite(&program, &cfg)?;
    let pred = cpa.index_of("predicate").expect("predicate analysis configured");
    let solver = Solver::default();
    let mut precision = PredicatePrecision::new();

    for round in 0.. {
        let init = cpa.initial_precision().with_component(pred, AnyPrecision::new(precision.clone()));
        let result = run_cpa_plus(&cpa, &program, cpa.initial_state(program.entry()), init, &ReachOptions::default());
        let ReachOutcome::ErrorReached(node) = result.outcome else {
            println!("round {round}: {:?} with {} reached states", result.outcome, result.reached_count());
            break;
        };
        let (edges, _) = result.arg.path_to(node);
        println!("round {round}: error path");
        for e in &edges {
            println!("  {e}");
        }
        match check_feasibility(&program, &edges, &solver) {
            PathFeasibility::Infeasible(k) => {
                let found = discover_predicates(&program, &edges, k, &solver)?;
                for (loc, ps) in &found {
                    let names: Vec<String> = ps.iter().map(ToString::to_string).collect();
                    println!("  {loc}: {}", names.join(", "));
                }
                extend_precision(&mut precision, &found, PredicateScope::Location);
            }
            other => {
                println!("  feasible: {other:?}");
                break;
            }
        }
    }
    Ok(())
}
