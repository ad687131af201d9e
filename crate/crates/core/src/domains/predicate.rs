use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::cpa::{Cpa, ReachedView};
use crate::frontend::{CfaEdge, EdgeOp, Expr, LocationId, ProgramRef};
use crate::solver::{normalize_condition, Conjunction, Feasibility, LinearConstraint, LinearTerm, Solver, SolverError};

/// A canonical linear atom used as an abstraction predicate.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    atom: LinearConstraint,
}

impl Predicate {
    pub fn new(atom: LinearConstraint) -> Self {
        Predicate { atom }
    }

    pub fn atom(&self) -> &LinearConstraint {
        &self.atom
    }

    /// Human-readable form with function qualifiers stripped.
    pub fn display_text(&self) -> String {
        self.atom
            .rename(&|v| v.rsplit("::").next().unwrap_or(v).to_string())
            .to_string()
    }

    /// Parses a condition such as `x >= 1`; `None` unless it is a single
    /// linear atom.
    pub fn from_condition(cond: &Expr) -> Option<Predicate> {
        match normalize_condition(cond).ok()?.as_slice() {
            [c] if c.len() == 1 => Some(Predicate::new(c.iter().next().unwrap().clone())),
            _ => None,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.atom)
    }
}

/// Predicates known to hold, read conjunctively.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PredicateState {
    Bottom,
    Holds(Arc<BTreeSet<Predicate>>),
}

impl PredicateState {
    pub fn top() -> Self {
        PredicateState::Holds(Arc::default())
    }

    pub fn holding(ps: impl IntoIterator<Item = Predicate>) -> Self {
        PredicateState::Holds(Arc::new(ps.into_iter().collect()))
    }

    pub fn predicates(&self) -> Option<&BTreeSet<Predicate>> {
        match self {
            PredicateState::Holds(h) => Some(h),
            PredicateState::Bottom => None,
        }
    }
}

impl fmt::Display for PredicateState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredicateState::Bottom => write!(f, "⊥"),
            PredicateState::Holds(h) => {
                let parts: Vec<String> = h.iter().map(|p| p.to_string()).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
        }
    }
}

/// Location-indexed predicate sets plus predicates tracked everywhere.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PredicatePrecision {
    by_location: BTreeMap<LocationId, BTreeSet<Predicate>>,
    global: BTreeSet<Predicate>,
}

impl PredicatePrecision {
    pub fn new() -> Self {
        Self::default()
    }

    /// Effective predicates at `loc`.
    pub fn at(&self, loc: LocationId) -> BTreeSet<&Predicate> {
        let mut out: BTreeSet<&Predicate> = self.global.iter().collect();
        if let Some(s) = self.by_location.get(&loc) {
            out.extend(s.iter());
        }
        out
    }

    pub fn contains_at(&self, loc: LocationId, p: &Predicate) -> bool {
        self.global.contains(p) || self.by_location.get(&loc).is_some_and(|s| s.contains(p))
    }

    /// Returns whether the predicate was new at `loc`.
    pub fn insert_at(&mut self, loc: LocationId, p: Predicate) -> bool {
        if self.global.contains(&p) {
            return false;
        }
        self.by_location.entry(loc).or_default().insert(p)
    }

    /// Returns whether the predicate was new globally.
    pub fn insert_global(&mut self, p: Predicate) -> bool {
        for s in self.by_location.values_mut() {
            s.remove(&p);
        }
        self.by_location.retain(|_, s| !s.is_empty());
        self.global.insert(p)
    }

    pub fn by_location(&self) -> &BTreeMap<LocationId, BTreeSet<Predicate>> {
        &self.by_location
    }

    pub fn global(&self) -> &BTreeSet<Predicate> {
        &self.global
    }

    /// Distinct predicates regardless of where they are tracked.
    pub fn distinct(&self) -> BTreeSet<&Predicate> {
        let mut out: BTreeSet<&Predicate> = self.global.iter().collect();
        for s in self.by_location.values() {
            out.extend(s.iter());
        }
        out
    }

    /// Sum of per-location set sizes (global predicates count once).
    pub fn per_location_sum(&self) -> usize {
        self.global.len() + self.by_location.values().map(BTreeSet::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.global.is_empty() && self.by_location.is_empty()
    }
}

/// Cartesian predicate abstraction, recomputed on every edge.
#[derive(Debug, Clone)]
pub struct PredicateCpa {
    program: Option<ProgramRef>,
    solver: Solver,
}

fn old_name(v: &str) -> String {
    format!("{v}#old")
}

fn conj_of(holds: &BTreeSet<Predicate>) -> Conjunction {
    holds.iter().map(|p| p.atom.clone()).collect()
}

/// `lhs = rhs` where `rhs` reads the pre-state through renamed `#old`
/// symbols. `None` for a havoc.
fn defining_eq(lhs: &str, rhs: &Expr, renamed: &BTreeSet<String>) -> Result<Option<LinearConstraint>, SolverError> {
    if matches!(rhs, Expr::Nondet) {
        return Ok(None);
    }
    let t = LinearTerm::from_expr(rhs)?.rename(&|v| if renamed.contains(v) { old_name(v) } else { v.to_string() });
    Ok(Some(LinearConstraint::eq(LinearTerm::var(lhs).sub(&t))))
}

impl PredicateCpa {
    pub fn new(program: ProgramRef, solver: Solver) -> Self {
        PredicateCpa {
            program: Some(program),
            solver,
        }
    }

    /// A predicate analysis usable on edges without calls.
    pub fn standalone(solver: Solver) -> Self {
        PredicateCpa { program: None, solver }
    }

    /// Strongest postconditions of `holds` along `edge`, one per DNF branch,
    /// and whether they are trivially satisfiable.
    fn posts(&self, holds: &BTreeSet<Predicate>, edge: &CfaEdge) -> Result<(Vec<Conjunction>, bool), SolverError> {
        let base = conj_of(holds);
        let assigned: Vec<(String, Expr)> = match &edge.op {
            EdgeOp::Assign { lhs, rhs } => vec![(lhs.clone(), rhs.clone())],
            EdgeOp::Call { callee, args, .. } => {
                let program = self.program.as_ref().expect("calls need a program");
                let params = &program.cfa(callee).expect("callee exists").params;
                params.iter().cloned().zip(args.iter().cloned()).collect()
            }
            EdgeOp::Assume { .. } => {
                let cond = edge.op.assumed_condition().unwrap();
                let branches = normalize_condition(&cond)?;
                return Ok((branches.into_iter().map(|b| base.union(&b)).collect(), false));
            }
            EdgeOp::Skip | EdgeOp::Return { .. } => return Ok((vec![base], true)),
        };
        let renamed: BTreeSet<String> = assigned.iter().map(|(l, _)| l.clone()).collect();
        let mut phi = base.rename(&|v| if renamed.contains(v) { old_name(v) } else { v.to_string() });
        for (lhs, rhs) in &assigned {
            if let Some(eq) = defining_eq(lhs, rhs, &renamed)? {
                phi.insert(eq);
            }
        }
        Ok((vec![phi], holds.is_empty()))
    }

    fn entails(&self, phi: &Conjunction, vars: &BTreeSet<String>, p: &Predicate) -> bool {
        // φ is satisfiable here, so an atom over an unconstrained variable cannot follow
        if p.atom.vars().any(|v| !vars.contains(v)) {
            return false;
        }
        self.solver.entails(phi, &p.atom)
    }
}

impl Cpa for PredicateCpa {
    type State = PredicateState;
    type Precision = PredicatePrecision;

    fn name(&self) -> &str {
        "predicate"
    }

    fn initial_state(&self, _entry: LocationId) -> PredicateState {
        PredicateState::top()
    }

    fn initial_precision(&self) -> PredicatePrecision {
        PredicatePrecision::new()
    }

    fn is_bottom(&self, s: &PredicateState) -> bool {
        matches!(s, PredicateState::Bottom)
    }

    fn less_or_equal(&self, a: &PredicateState, b: &PredicateState) -> bool {
        match (a, b) {
            (PredicateState::Bottom, _) => true,
            (_, PredicateState::Bottom) => false,
            (PredicateState::Holds(a), PredicateState::Holds(b)) => b.is_subset(a),
        }
    }

    fn join(&self, a: &PredicateState, b: &PredicateState) -> PredicateState {
        match (a, b) {
            (PredicateState::Bottom, x) | (x, PredicateState::Bottom) => x.clone(),
            (PredicateState::Holds(a), PredicateState::Holds(b)) => {
                PredicateState::Holds(Arc::new(a.intersection(b).cloned().collect()))
            }
        }
    }

    fn transfer(&self, s: &PredicateState, edge: &CfaEdge, prec: &PredicatePrecision) -> Vec<PredicateState> {
        let PredicateState::Holds(holds) = s else {
            return Vec::new();
        };
        let wanted = prec.at(edge.target);
        let Ok((branches, trivially_sat)) = self.posts(holds, edge) else {
            // not expressible in linear arithmetic: keep nothing
            return vec![PredicateState::top()];
        };
        let feasible: Vec<(Conjunction, BTreeSet<String>)> = branches
            .into_iter()
            .filter(|phi| {
                trivially_sat
                    || !phi.has_trivially_false()
                        && !matches!(self.solver.is_feasible(phi), Ok(Feasibility::Infeasible))
            })
            .map(|phi| {
                let vars = phi.vars();
                (phi, vars)
            })
            .collect();
        if feasible.is_empty() {
            return Vec::new();
        }
        if wanted.is_empty() {
            return vec![PredicateState::top()];
        }
        let result: BTreeSet<Predicate> = wanted
            .into_iter()
            .filter(|p| feasible.iter().all(|(phi, vars)| self.entails(phi, vars, p)))
            .cloned()
            .collect();
        vec![PredicateState::Holds(Arc::new(result))]
    }

    fn prec(&self, s: &PredicateState, prec: &PredicatePrecision, view: &ReachedView) -> (PredicateState, PredicatePrecision) {
        match s {
            PredicateState::Holds(h) if h.iter().any(|p| !prec.contains_at(view.location, p)) => {
                let kept = h.iter().filter(|p| prec.contains_at(view.location, p)).cloned().collect();
                (PredicateState::Holds(Arc::new(kept)), prec.clone())
            }
            _ => (s.clone(), prec.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{ArithOp, CmpOp};

    fn pred(op: CmpOp, v: &str, k: i64) -> Predicate {
        Predicate::from_condition(&Expr::cmp(op, Expr::var(v), Expr::int(k))).unwrap()
    }

    fn edge(op: EdgeOp) -> CfaEdge {
        CfaEdge {
            source: LocationId(1),
            target: LocationId(2),
            op,
        }
    }

    fn precision_at_target(ps: impl IntoIterator<Item = Predicate>) -> PredicatePrecision {
        let mut p = PredicatePrecision::new();
        for x in ps {
            p.insert_at(LocationId(2), x);
        }
        p
    }

    #[test]
    fn assume_establishes_predicate() {
        let cpa = PredicateCpa::standalone(Solver::default());
        let x_ge_1 = pred(CmpOp::Ge, "x", 1);
        let prec = precision_at_target([x_ge_1.clone()]);
        let e = edge(EdgeOp::Assume {
            cond: Expr::cmp(CmpOp::Gt, Expr::var("x"), Expr::int(0)),
            truth: true,
        });
        assert_eq!(cpa.transfer(&PredicateState::top(), &e, &prec), vec![PredicateState::holding([x_ge_1])]);
    }

    #[test]
    fn havoc_kills_predicates() {
        let cpa = PredicateCpa::standalone(Solver::default());
        let x_ge_1 = pred(CmpOp::Ge, "x", 1);
        let prec = precision_at_target([x_ge_1.clone()]);
        let e = edge(EdgeOp::Assign {
            lhs: "x".into(),
            rhs: Expr::Nondet,
        });
        assert_eq!(cpa.transfer(&PredicateState::holding([x_ge_1]), &e, &prec), vec![PredicateState::top()]);
    }

    #[test]
    fn contradictory_assume_is_infeasible() {
        let cpa = PredicateCpa::standalone(Solver::default());
        let prec = precision_at_target([pred(CmpOp::Eq, "x", 0)]);
        let e = edge(EdgeOp::Assume {
            cond: Expr::cmp(CmpOp::Eq, Expr::var("x"), Expr::int(0)),
            truth: true,
        });
        let s = PredicateState::holding([pred(CmpOp::Eq, "x", 1)]);
        assert!(cpa.transfer(&s, &e, &prec).is_empty());
    }

    #[test]
    fn assignment_tracks_through_old_value() {
        let cpa = PredicateCpa::standalone(Solver::default());
        let x1 = pred(CmpOp::Eq, "x", 1);
        let prec = precision_at_target([x1.clone(), pred(CmpOp::Eq, "x", 0)]);
        let e = edge(EdgeOp::Assign {
            lhs: "x".into(),
            rhs: Expr::arith(ArithOp::Add, Expr::var("x"), Expr::int(1)),
        });
        let s = PredicateState::holding([pred(CmpOp::Eq, "x", 0)]);
        assert_eq!(cpa.transfer(&s, &e, &prec), vec![PredicateState::holding([x1])]);
    }

    #[test]
    fn disjunctive_assume_keeps_common_consequences() {
        let cpa = PredicateCpa::standalone(Solver::default());
        let ne0 = Expr::cmp(CmpOp::Ne, Expr::var("x"), Expr::int(0));
        let nonneg = pred(CmpOp::Ge, "x", 1);
        let prec = precision_at_target([nonneg]);
        let s = PredicateState::holding([pred(CmpOp::Ge, "x", 0)]);
        let e = edge(EdgeOp::Assume { cond: ne0, truth: true });
        // only the x >= 1 branch survives, so x >= 1 holds
        assert_eq!(cpa.transfer(&s, &e, &prec), vec![PredicateState::holding([pred(CmpOp::Ge, "x", 1)])]);
    }

    #[test]
    fn order_and_prec() {
        let cpa = PredicateCpa::standalone(Solver::default());
        let a = pred(CmpOp::Ge, "x", 1);
        let b = pred(CmpOp::Ge, "y", 0);
        let ab = PredicateState::holding([a.clone(), b]);
        let just_a = PredicateState::holding([a.clone()]);
        assert!(cpa.less_or_equal(&ab, &just_a));
        assert!(!cpa.less_or_equal(&PredicateState::top(), &just_a));
        assert!(cpa.less_or_equal(&PredicateState::Bottom, &just_a));
        let view = ReachedView {
            location: LocationId(2),
            reached_at_location: 0,
        };
        let prec = precision_at_target([a.clone()]);
        assert_eq!(cpa.prec(&just_a, &prec, &view).0, just_a);
        let (s, p) = cpa.prec(&just_a, &PredicatePrecision::new(), &view);
        assert_eq!((s, p), (PredicateState::top(), PredicatePrecision::new()));
        assert_eq!(cpa.prec(&PredicateState::Bottom, &prec, &view).0, PredicateState::Bottom);
    }

    #[test]
    fn display_strips_qualifiers() {
        let p = pred(CmpOp::Ge, "main::x", 1);
        assert_eq!(p.display_text(), "x >= 1");
        assert_eq!(p.to_string(), "main::x >= 1");
    }

    #[test]
    fn precision_counts() {
        let mut prec = PredicatePrecision::new();
        let a = pred(CmpOp::Ge, "x", 1);
        assert!(prec.insert_at(LocationId(1), a.clone()));
        assert!(prec.insert_at(LocationId(2), a.clone()));
        assert!(!prec.insert_at(LocationId(2), a.clone()));
        assert_eq!(prec.distinct().len(), 1);
        assert_eq!(prec.per_location_sum(), 2);
        assert!(prec.insert_global(a.clone()));
        assert_eq!(prec.per_location_sum(), 1);
        assert!(!prec.insert_at(LocationId(3), a));
    }
}
