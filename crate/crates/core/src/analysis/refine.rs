//! Predicate discovery from infeasible counterexample prefixes.
//!
//! The contradiction is first shrunk to a minimal infeasible subset of the
//! path constraints. At every cut of the prefix, the constraints before the
//! cut (strongest postcondition) are projected onto the variables' current
//! symbols and their atoms become predicates at the cut's location. The
//! last cut also contributes the atoms of the suffix's precondition.
//! Projection is exact over the rationals, so the postcondition chain alone
//! makes the Cartesian abstraction refute the path.

use std::collections::{BTreeMap, BTreeSet};

use crate::config::PredicateScope;
use crate::domains::{Predicate, PredicatePrecision};
use crate::frontend::{CfaEdge, LocationId, Program};
use crate::solver::{Conjunction, Feasibility, LinearConstraint, Solver, SolverError};

use super::path::{path_formula, split_ssa_name, PathFormula};

/// Branch combinations examined when assumptions are disjunctive.
const MAX_COMBINATIONS: usize = 64;

pub type DiscoveredPredicates = BTreeMap<LocationId, BTreeSet<Predicate>>;

/// Mines predicates from the first `prefix_len` edges of `edges`, which
/// must be contradictory.
pub fn discover_predicates(
    program: &Program,
    edges: &[CfaEdge],
    prefix_len: usize,
    solver: &Solver,
) -> Result<DiscoveredPredicates, SolverError> {
    let prefix = &edges[..prefix_len.min(edges.len())];
    let formula = path_formula(program, prefix)?;
    let mut out = DiscoveredPredicates::new();
    for combo in combinations(&formula) {
        let constraints: Vec<(usize, LinearConstraint)> = combo
            .iter()
            .enumerate()
            .flat_map(|(step, &b)| formula.steps[step].branches[b].iter().map(move |c| (step, c.clone())))
            .collect();
        let core = minimal_core(constraints, solver);
        for i in 1..prefix.len() {
            let keep = formula.current_symbols(i);
            let loc = prefix[i - 1].target;
            let before: Conjunction = core.iter().filter(|(s, _)| *s < i).map(|(_, c)| c.clone()).collect();
            let after: Conjunction = core.iter().filter(|(s, _)| *s >= i).map(|(_, c)| c.clone()).collect();
            // suffix atoms only at the last cut; earlier ones mostly restate
            // loop counters the explicit component already tracks
            let parts = if i + 1 == prefix.len() { vec![before, after] } else { vec![before] };
            for part in parts {
                if part.is_empty() {
                    continue;
                }
                if let Some(proj) = solver.project(&part, &keep)? {
                    for atom in simplify(&proj, solver) {
                        if let Some(p) = to_program_vars(&atom) {
                            out.entry(loc).or_default().insert(p);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Adds discovered predicates to `precision`; returns how many were new.
pub fn extend_precision(precision: &mut PredicatePrecision, found: &DiscoveredPredicates, scope: PredicateScope) -> usize {
    let mut added = 0;
    for (loc, preds) in found {
        for p in preds {
            let fresh = match scope {
                PredicateScope::Location => precision.insert_at(*loc, p.clone()),
                PredicateScope::Global => precision.insert_global(p.clone()),
            };
            added += usize::from(fresh);
        }
    }
    added
}

/// Branch choices for each step, in lexicographic order.
fn combinations(f: &PathFormula) -> Vec<Vec<usize>> {
    let widths: Vec<usize> = f.steps.iter().map(|s| s.branches.len()).collect();
    if widths.contains(&0) {
        // an unmatched return: nothing to mine beyond the structure
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur = vec![0; widths.len()];
    loop {
        out.push(cur.clone());
        if out.len() >= MAX_COMBINATIONS {
            break;
        }
        let mut i = widths.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < widths[i] {
                break;
            }
            cur[i] = 0;
        }
    }
    out
}

fn infeasible(cs: &[(usize, LinearConstraint)], solver: &Solver) -> bool {
    let c: Conjunction = cs.iter().map(|(_, c)| c.clone()).collect();
    matches!(solver.is_feasible(&c), Ok(Feasibility::Infeasible))
}

/// Deletion-based shrinking to a minimal infeasible subset. Later
/// constraints are tried first, so the core leans on facts established
/// early in the path. A feasible input is returned unchanged.
fn minimal_core(mut cs: Vec<(usize, LinearConstraint)>, solver: &Solver) -> Vec<(usize, LinearConstraint)> {
    if !infeasible(&cs, solver) {
        return cs;
    }
    cs.reverse();
    let mut i = 0;
    while i < cs.len() {
        let mut without = cs.clone();
        without.remove(i);
        if infeasible(&without, solver) {
            cs = without;
        } else {
            i += 1;
        }
    }
    cs.reverse();
    cs
}

/// Drops atoms implied by the others.
fn simplify(c: &Conjunction, solver: &Solver) -> Vec<LinearConstraint> {
    let mut atoms: Vec<LinearConstraint> = c.iter().filter(|a| !a.is_trivially_true()).cloned().collect();
    let mut i = 0;
    while i < atoms.len() {
        let rest: Conjunction = atoms.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, a)| a.clone()).collect();
        if solver.entails(&rest, &atoms[i]) {
            atoms.remove(i);
        } else {
            i += 1;
        }
    }
    atoms
}

fn to_program_vars(atom: &LinearConstraint) -> Option<Predicate> {
    if atom.vars().any(|s| split_ssa_name(s).is_none()) {
        return None;
    }
    let renamed = atom.rename(&|s| split_ssa_name(s).map(|(v, _)| v.to_string()).unwrap_or_default());
    (!renamed.is_trivially_true()).then(|| Predicate::new(renamed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::path::check_feasibility;
    use crate::analysis::PathFeasibility;
    use crate::frontend::{parse, EdgeOp};
    use crate::solver::LinearTerm;

    fn error_path(p: &Program) -> Vec<CfaEdge> {
        let mut edges = Vec::new();
        let mut loc = p.entry();
        while !p.is_error(loc) {
            let out = p.outgoing(loc);
            let e = out
                .iter()
                .find(|e| !matches!(e.op, EdgeOp::Assume { truth: false, .. }))
                .unwrap_or(&out[0])
                .clone();
            loc = e.target;
            edges.push(e);
        }
        edges
    }

    fn x_eq(c: i64) -> Predicate {
        Predicate::new(LinearConstraint::eq(LinearTerm::from_parts([("main::x", 1)], -c)))
    }

    #[test]
    fn increment_path_yields_sp_and_wp_atoms() {
        let p = parse("void main(){ int x; x = 0; x = x + 1; if (x == 0) { ERROR: ; } }").unwrap();
        let edges = error_path(&p);
        let s = Solver::default();
        let PathFeasibility::Infeasible(k) = check_feasibility(&p, &edges, &s) else { panic!() };
        let found = discover_predicates(&p, &edges, k, &s).unwrap();
        let after_increment = &found[&edges[1].target];
        assert!(after_increment.contains(&x_eq(1)));
        assert!(after_increment.contains(&x_eq(0)));
    }

    #[test]
    fn contradictory_assumes_yield_tightened_bound() {
        let p = parse("void main(){ int y; if (y > 2) { if (y < 1) { ERROR: ; } } }").unwrap();
        let edges = error_path(&p);
        let s = Solver::default();
        let PathFeasibility::Infeasible(k) = check_feasibility(&p, &edges, &s) else { panic!() };
        assert_eq!(k, 2);
        let found = discover_predicates(&p, &edges, k, &s).unwrap();
        let between = &found[&edges[0].target];
        let y_ge_3 = Predicate::new(LinearConstraint::le(LinearTerm::from_parts([("main::y", -1)], 3)));
        assert!(between.contains(&y_ge_3));
    }

    #[test]
    fn fresh_precision_always_grows() {
        let p = parse("void main(){ int x; x = 0; x = x + 1; if (x == 0) { ERROR: ; } }").unwrap();
        let edges = error_path(&p);
        let s = Solver::default();
        let found = discover_predicates(&p, &edges, 3, &s).unwrap();
        let mut prec = PredicatePrecision::new();
        assert!(extend_precision(&mut prec, &found, PredicateScope::Location) > 0);
        assert_eq!(extend_precision(&mut prec, &found, PredicateScope::Location), 0);
    }

    #[test]
    fn core_ignores_irrelevant_variables() {
        let p = parse("void main(){ int x; int z; z = 7; x = 0; if (x == 1) { ERROR: ; } }").unwrap();
        let edges = error_path(&p);
        let s = Solver::default();
        let PathFeasibility::Infeasible(k) = check_feasibility(&p, &edges, &s) else { panic!() };
        let found = discover_predicates(&p, &edges, k, &s).unwrap();
        assert!(found.values().flatten().all(|q| !q.atom().vars().any(|v| v == "main::z")));
    }

    #[test]
    fn combinations_are_capped() {
        let mut body = String::from("ERROR: ;");
        for k in 0..7 {
            body = format!("if (x == {k} || y == {k}) {{ {body} }}");
        }
        let p = parse(&format!("void main(){{ int x; int y; {body} }}")).unwrap();
        let edges = error_path(&p);
        let f = path_formula(&p, &edges).unwrap();
        assert!(f.steps.iter().all(|s| s.branches.len() <= 2));
        assert_eq!(combinations(&f).len(), MAX_COMBINATIONS);
    }
}
