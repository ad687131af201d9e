//! Path formulas in single-assignment form and counterexample feasibility.
//!
//! Every assignment gives its target a fresh symbol `x@k`; `x@0` is the
//! value a variable holds before it is first written. The SSA encoding
//! follows the static storage model of the lowering: a local keeps its
//! last value across calls.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::frontend::{CfaEdge, EdgeOp, Expr, LocationId, Program};
use crate::solver::{
    condition_dnf, integer_witness, Conjunction, Feasibility, IntBox, LinearConstraint, LinearTerm, Model,
    Solver, SolverError, MAX_BOX_VOLUME,
};

pub fn ssa_name(var: &str, version: usize) -> String {
    format!("{var}@{version}")
}

/// Splits `x@k` into `(x, k)`.
pub fn split_ssa_name(sym: &str) -> Option<(&str, usize)> {
    let (v, k) = sym.rsplit_once('@')?;
    Some((v, k.parse().ok()?))
}

/// Constraints contributed by one edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathStep {
    /// Disjunction of alternatives; empty means the edge cannot be taken.
    pub branches: Vec<Conjunction>,
    /// Variable versions after the edge.
    pub versions: BTreeMap<String, usize>,
    pub is_assume: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathFormula {
    pub steps: Vec<PathStep>,
    /// Fresh symbols introduced by `nondet()`, in execution order.
    pub nondet: Vec<String>,
    /// Program variables mentioned anywhere along the path.
    pub variables: BTreeSet<String>,
}

impl PathFormula {
    /// Versions in force at cut `i` (before edge `i`).
    pub fn versions_at(&self, i: usize) -> BTreeMap<String, usize> {
        if i == 0 {
            BTreeMap::new()
        } else {
            self.steps[i - 1].versions.clone()
        }
    }

    /// Current symbols of every path variable at cut `i`.
    pub fn current_symbols(&self, i: usize) -> BTreeSet<String> {
        let vers = self.versions_at(i);
        self.variables
            .iter()
            .map(|v| ssa_name(v, vers.get(v).copied().unwrap_or(0)))
            .collect()
    }
}

fn at_version(e: &Expr, vers: &BTreeMap<String, usize>) -> Expr {
    e.rename(&|v| ssa_name(v, vers.get(v).copied().unwrap_or(0)))
}

/// Encodes an edge sequence.
pub fn path_formula(program: &Program, edges: &[CfaEdge]) -> Result<PathFormula, SolverError> {
    let mut vers: BTreeMap<String, usize> = BTreeMap::new();
    let mut calls: Vec<LocationId> = Vec::new();
    let mut steps = Vec::with_capacity(edges.len());
    let mut nondet = Vec::new();
    let mut variables = BTreeSet::new();
    let bump = |vers: &mut BTreeMap<String, usize>, x: &str| {
        let k = vers.entry(x.to_string()).or_insert(0);
        *k += 1;
        ssa_name(x, *k)
    };
    for e in edges {
        let mut is_assume = false;
        let branches = match &e.op {
            EdgeOp::Assume { .. } => {
                is_assume = true;
                let cond = e.op.assumed_condition().expect("assume");
                variables.extend(cond.variables().into_iter().map(String::from));
                condition_dnf(&at_version(&cond, &vers), false)?
            }
            EdgeOp::Assign { lhs, rhs } => {
                variables.insert(lhs.clone());
                if matches!(rhs, Expr::Nondet) {
                    nondet.push(bump(&mut vers, lhs));
                    vec![Conjunction::new()]
                } else {
                    variables.extend(rhs.variables().into_iter().map(String::from));
                    let t = LinearTerm::from_expr(&at_version(rhs, &vers))?;
                    let fresh = bump(&mut vers, lhs);
                    vec![Conjunction::from_constraints([LinearConstraint::eq(LinearTerm::var(fresh).sub(&t))])]
                }
            }
            EdgeOp::Call {
                callee,
                args,
                return_target,
            } => {
                calls.push(*return_target);
                let params = program.cfa(callee).map(|c| c.params.clone()).unwrap_or_default();
                let mut c = Conjunction::new();
                let terms = args
                    .iter()
                    .map(|a| {
                        variables.extend(a.variables().into_iter().map(String::from));
                        LinearTerm::from_expr(&at_version(a, &vers))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                for (p, t) in params.iter().zip(terms) {
                    variables.insert(p.clone());
                    let fresh = bump(&mut vers, p);
                    c.insert(LinearConstraint::eq(LinearTerm::var(fresh).sub(&t)));
                }
                vec![c]
            }
            EdgeOp::Return { .. } => {
                if calls.pop() == Some(e.target) {
                    vec![Conjunction::new()]
                } else {
                    Vec::new()
                }
            }
            EdgeOp::Skip => vec![Conjunction::new()],
        };
        steps.push(PathStep {
            branches,
            versions: vers.clone(),
            is_assume,
        });
    }
    Ok(PathFormula {
        steps,
        nondet,
        variables,
    })
}


/// Concrete inputs that drive an execution down a path.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Witness {
    /// Values of variables read before their first write.
    pub initial: BTreeMap<String, BigInt>,
    /// Results of successive `nondet()` calls.
    pub nondet: Vec<BigInt>,
}

impl Witness {
    fn from_model(f: &PathFormula, model: &Model) -> Witness {
        let int = |sym: &str| model.get(sym).map(|q| q.floor().to_integer()).unwrap_or_else(BigInt::zero);
        let initial = f
            .variables
            .iter()
            .filter(|v| model.contains_key(&ssa_name(v, 0)))
            .map(|v| (v.clone(), int(&ssa_name(v, 0))))
            .collect();
        let nondet = f.nondet.iter().map(|s| int(s)).collect();
        Witness { initial, nondet }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathModel {
    /// Assignment to the SSA symbols of the path formula.
    pub model: Model,
    pub witness: Witness,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathFeasibility {
    /// An integer execution follows the path.
    Concrete(PathModel),
    /// Only a rational model was found (or the solver gave up).
    RelaxedOnly(PathModel),
    /// The first `n` edges are already contradictory.
    Infeasible(usize),
}

/// Feasible alternatives kept while walking a path; beyond this the check
/// gives up and reports the path as relaxed-feasible.
const MAX_FRONTIER: usize = 256;

/// Radius of the box searched around a rational model.
const BOX_RADIUS: i64 = 16;

/// Decides whether a path is executable, finding the shortest infeasible
/// prefix otherwise.
pub fn check_feasibility(program: &Program, edges: &[CfaEdge], solver: &Solver) -> PathFeasibility {
    let relaxed = || PathFeasibility::RelaxedOnly(PathModel {
        model: Model::new(),
        witness: Witness::default(),
    });
    let Ok(formula) = path_formula(program, edges) else {
        return relaxed();
    };
    let mut frontier = vec![Conjunction::new()];
    for (i, step) in formula.steps.iter().enumerate() {
        let mut next: Vec<Conjunction> = Vec::new();
        for f in &frontier {
            for b in &step.branches {
                let c = f.union(b);
                if next.contains(&c) {
                    continue;
                }
                // assignments only add definitions of fresh symbols
                if !step.is_assume {
                    next.push(c);
                    continue;
                }
                match solver.is_feasible(&c) {
                    Ok(Feasibility::Feasible(_)) => next.push(c),
                    Ok(Feasibility::Infeasible) => {}
                    Err(_) => return relaxed(),
                }
            }
        }
        if next.is_empty() {
            return PathFeasibility::Infeasible(i + 1);
        }
        if next.len() > MAX_FRONTIER {
            return relaxed();
        }
        frontier = next;
    }
    let mut first_rational = None;
    for c in &frontier {
        let model = match solver.is_feasible(c) {
            Ok(Feasibility::Feasible(m)) => m,
            Ok(Feasibility::Infeasible) => continue,
            Err(_) => return relaxed(),
        };
        if let Some(m) = integer_model(c, model.clone(), solver) {
            let witness = Witness::from_model(&formula, &m);
            return PathFeasibility::Concrete(PathModel { model: m, witness });
        }
        first_rational.get_or_insert(model);
    }
    match first_rational {
        Some(model) => PathFeasibility::RelaxedOnly(PathModel {
            witness: Witness::from_model(&formula, &model),
            model,
        }),
        None => PathFeasibility::Infeasible(edges.len()),
    }
}

fn is_integral(m: &Model) -> bool {
    m.values().all(|q| q.is_integer())
}

/// Turns a rational model of `c` into an integer one: first by fixing
/// fractional variables to a neighbouring integer one at a time, then by
/// searching a box around the model.
fn integer_model(c: &Conjunction, model: Model, solver: &Solver) -> Option<Model> {
    if is_integral(&model) {
        return Some(model);
    }
    let mut cur = c.clone();
    let mut m = model.clone();
    'dive: loop {
        let Some((v, q)) = m.iter().find(|(_, q)| !q.is_integer()) else {
            return Some(m);
        };
        let (v, q) = (v.clone(), q.clone());
        for k in [q.floor().to_integer(), q.ceil().to_integer()] {
            let mut probe = cur.clone();
            probe.insert(LinearConstraint::eq(LinearTerm::var(v.clone()).plus_constant(-k)));
            if let Ok(Feasibility::Feasible(m2)) = solver.is_feasible(&probe) {
                cur = probe;
                m = m2;
                continue 'dive;
            }
        }
        break;
    }
    let vars = c.vars();
    let fits = |r: i64| (2 * r + 1).checked_pow(vars.len() as u32).is_some_and(|vol| vol as u64 <= MAX_BOX_VOLUME);
    let radius = (0..=BOX_RADIUS).rev().find(|&r| fits(r)).unwrap_or(0);
    let bx: IntBox = vars
        .iter()
        .map(|v| {
            let centre = model.get(v).cloned().unwrap_or_else(BigRational::zero).round().to_integer();
            (v.clone(), (&centre - radius, &centre + radius))
        })
        .collect();
    integer_witness(c, &bx).ok().flatten()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    fn main_path(src: &str) -> (Program, Vec<CfaEdge>) {
        let p = parse(src).unwrap();
        // follow the unique path that never takes a false branch of an
        // error-guarding test, i.e. the one ending at the error label
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
        (p, edges)
    }

    #[test]
    fn nondet_path_is_concrete() {
        let (p, edges) = main_path("void main(){ int x; x = nondet(); if (x == 1) { ERROR: ; } }");
        let PathFeasibility::Concrete(m) = check_feasibility(&p, &edges, &Solver::default()) else {
            panic!()
        };
        assert_eq!(m.witness.nondet, vec![BigInt::from(1)]);
        let f = path_formula(&p, &edges).unwrap();
        for step in &f.steps {
            assert!(step.branches.iter().any(|b| b.satisfied_by(&m.model)));
        }
    }

    #[test]
    fn increment_then_zero_is_infeasible_at_three() {
        let (p, edges) = main_path("void main(){ int x; x = 0; x = x + 1; if (x == 0) { ERROR: ; } }");
        assert_eq!(check_feasibility(&p, &edges, &Solver::default()), PathFeasibility::Infeasible(3));
    }

    #[test]
    fn parity_is_relaxed_only() {
        let (p, edges) = main_path("void main(){ int x; if (2*x == 1) { ERROR: ; } }");
        assert!(matches!(check_feasibility(&p, &edges, &Solver::default()), PathFeasibility::RelaxedOnly(_)));
    }

    #[test]
    fn fractional_model_is_rounded_to_integers() {
        // 3y - 2x == 1 has rational solutions at x = 0 and integral ones at x = 1
        let (p, edges) = main_path("void main(){ int x; int y; if (3*y - 2*x == 1) { ERROR: ; } }");
        let PathFeasibility::Concrete(m) = check_feasibility(&p, &edges, &Solver::default()) else {
            panic!()
        };
        let x = &m.witness.initial["main::x"];
        let y = &m.witness.initial["main::y"];
        assert_eq!(BigInt::from(3) * y - BigInt::from(2) * x, BigInt::from(1));
    }

    #[test]
    fn uninitialised_reads_become_initial_values() {
        let (p, edges) = main_path("void main(){ int x; int y; y = x + 2; if (y == 7) { ERROR: ; } }");
        let PathFeasibility::Concrete(m) = check_feasibility(&p, &edges, &Solver::default()) else {
            panic!()
        };
        assert_eq!(m.witness.initial["main::x"], BigInt::from(5));
    }

    #[test]
    fn calls_bind_parameters() {
        let src = "int inc(int a){ return a + 1; } void main(){ int r; r = inc(4); if (r == 5) { ERROR: ; } }";
        let (p, edges) = main_path(src);
        assert!(matches!(check_feasibility(&p, &edges, &Solver::default()), PathFeasibility::Concrete(_)));
        let src = "int inc(int a){ return a + 1; } void main(){ int r; r = inc(4); if (r == 4) { ERROR: ; } }";
        let (p, edges) = main_path(src);
        assert!(matches!(check_feasibility(&p, &edges, &Solver::default()), PathFeasibility::Infeasible(_)));
    }

    #[test]
    fn ssa_names_round_trip() {
        assert_eq!(split_ssa_name(&ssa_name("main::x", 12)), Some(("main::x", 12)));
        assert_eq!(split_ssa_name("x"), None);
    }
}
