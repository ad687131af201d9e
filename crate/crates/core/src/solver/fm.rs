//! Exact rational Fourier–Motzkin elimination.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::linear::{Conjunction, LinearConstraint, LinearTerm, Model, Relation};
use super::SolverError;

/// Default cap on the number of live inequalities during elimination.
pub const DEFAULT_MAX_CONSTRAINTS: usize = 50_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Feasibility {
    Feasible(Model),
    Infeasible,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

enum Step {
    /// `v` was solved from `coeff·v + rest = 0`.
    Solve(String, LinearTerm),
    /// `v` was eliminated from these inequalities.
    Eliminate(String, Vec<LinearTerm>),
}

/// Rational linear-arithmetic decision procedure.
#[derive(Clone, Copy, Debug)]
pub struct Solver {
    pub max_constraints: usize,
}

impl Default for Solver {
    fn default() -> Self {
        Solver {
            max_constraints: DEFAULT_MAX_CONSTRAINTS,
        }
    }
}

fn pick_pivot(t: &LinearTerm, allowed: &dyn Fn(&str) -> bool) -> Option<String> {
    t.coeffs()
        .iter()
        .filter(|(v, _)| allowed(v))
        .min_by(|(va, ca), (vb, cb)| ca.abs().cmp(&cb.abs()).then(va.cmp(vb)))
        .map(|(v, _)| v.clone())
}

/// `|a|·row − sign(a)·b·eq`, eliminating `v` from `row` using `eq`.
fn combine(row: &LinearTerm, eq: &LinearTerm, v: &str) -> LinearTerm {
    let b = row.coeff(v);
    if b.is_zero() {
        return row.clone();
    }
    let a = eq.coeff(v);
    let factor = if a.is_negative() { -b.clone() } else { b.clone() };
    row.scale(&a.abs()).sub(&eq.scale(&factor)).primitive()
}

struct Elimination {
    eqs: Vec<LinearTerm>,
    ineqs: Vec<LinearTerm>,
    steps: Vec<Step>,
}

impl Solver {
    pub fn new(max_constraints: usize) -> Self {
        Solver { max_constraints }
    }

    /// Decides rational satisfiability; feasible results carry a model that
    /// satisfies every constraint exactly. Integral values are preferred
    /// when choosing from an interval.
    pub fn is_feasible(&self, c: &Conjunction) -> Result<Feasibility, SolverError> {
        if let Some(ne) = c.iter().find(|x| x.relation() == Relation::Ne) {
            // most disequalities hold in a model of the rest anyway
            let plain: Conjunction = c.iter().filter(|x| x.relation() != Relation::Ne).cloned().collect();
            match self.is_feasible(&plain)? {
                Feasibility::Infeasible => return Ok(Feasibility::Infeasible),
                Feasibility::Feasible(m) if c.satisfied_by(&m) => return Ok(Feasibility::Feasible(m)),
                Feasibility::Feasible(_) => {}
            }
            let base: Conjunction = c.iter().filter(|x| *x != ne).cloned().collect();
            // t != 0  ⇔  t <= -1  ∨  t >= 1
            for branch in LinearConstraint::eq(ne.term().clone()).negate() {
                let mut q = base.clone();
                q.insert(branch);
                if let Feasibility::Feasible(m) = self.is_feasible(&q)? {
                    return Ok(Feasibility::Feasible(m));
                }
            }
            return Ok(Feasibility::Infeasible);
        }
        let all: BTreeSet<String> = c.vars();
        let Some(elim) = self.eliminate(c, &|_| true)? else {
            return Ok(Feasibility::Infeasible);
        };
        debug_assert!(elim.eqs.is_empty() && elim.ineqs.is_empty());
        let mut model = Model::new();
        for step in elim.steps.iter().rev() {
            match step {
                Step::Solve(v, eq) => {
                    let a = BigRational::from_integer(eq.coeff(v));
                    let rest = eq.substitute(v, &LinearTerm::zero());
                    let val = -eval_defaulting(&rest, &mut model) / a;
                    model.insert(v.clone(), val);
                }
                Step::Eliminate(v, rows) => {
                    let val = choose_value(v, rows, &mut model);
                    model.insert(v.clone(), val);
                }
            }
        }
        for v in all {
            model.entry(v).or_insert_with(BigRational::zero);
        }
        debug_assert!(c.satisfied_by(&model), "model {model:?} violates {c}");
        Ok(Feasibility::Feasible(model))
    }

    /// `c ⊨ atom`. A blow-up is reported as non-entailment.
    pub fn entails(&self, c: &Conjunction, atom: &LinearConstraint) -> bool {
        if c.contains(atom) || atom.is_trivially_true() {
            return true;
        }
        atom.negate().into_iter().all(|neg| {
            let mut q = c.clone();
            q.insert(neg);
            matches!(self.is_feasible(&q), Ok(Feasibility::Infeasible))
        })
    }

    /// Eliminates every variable not in `keep`. Returns `None` if an
    /// inconsistency surfaced during elimination.
    pub fn project(&self, c: &Conjunction, keep: &BTreeSet<String>) -> Result<Option<Conjunction>, SolverError> {
        let plain: Conjunction = c.iter().filter(|x| x.relation() != Relation::Ne).cloned().collect();
        let Some(elim) = self.eliminate(&plain, &|v| !keep.contains(v))? else {
            return Ok(None);
        };
        // disequalities follow the equality substitutions; any that still
        // mention a dropped variable carry no projected information
        let mut ne = Vec::new();
        for x in c.iter().filter(|x| x.relation() == Relation::Ne) {
            let mut t = x.term().clone();
            for step in &elim.steps {
                if let Step::Solve(v, eq) = step {
                    t = combine(&t, eq, v);
                }
            }
            if t.vars().all(|v| keep.contains(v)) {
                ne.push(LinearConstraint::ne(t));
            }
        }
        let mut out: Conjunction = ne.into_iter().collect();
        for e in elim.eqs {
            out.insert(LinearConstraint::eq(e));
        }
        for i in elim.ineqs {
            out.insert(LinearConstraint::le(i));
        }
        if out.has_trivially_false() {
            return Ok(None);
        }
        Ok(Some(out))
    }

    /// Eliminates the variables accepted by `drop`, equalities first.
    fn eliminate(&self, c: &Conjunction, drop: &dyn Fn(&str) -> bool) -> Result<Option<Elimination>, SolverError> {
        let mut eqs: Vec<LinearTerm> = Vec::new();
        let mut ineqs: Vec<LinearTerm> = Vec::new();
        for x in c.iter() {
            match x.relation() {
                Relation::Eq => eqs.push(x.term().primitive()),
                Relation::Le => ineqs.push(x.term().primitive()),
                Relation::Ne => unreachable!("disequalities are split before elimination"),
            }
        }
        let mut steps = Vec::new();
        let mut kept_eqs = Vec::new();
        while let Some(eq) = eqs.pop() {
            if eq.is_constant() {
                if !eq.constant_part().is_zero() {
                    return Ok(None);
                }
                continue;
            }
            let Some(v) = pick_pivot(&eq, drop) else {
                kept_eqs.push(eq);
                continue;
            };
            for row in eqs.iter_mut().chain(ineqs.iter_mut()).chain(kept_eqs.iter_mut()) {
                *row = combine(row, &eq, &v);
            }
            steps.push(Step::Solve(v, eq));
        }
        // kept equalities may have become constant after later substitutions
        let mut eqs = Vec::new();
        for eq in kept_eqs {
            if eq.is_constant() {
                if !eq.constant_part().is_zero() {
                    return Ok(None);
                }
            } else {
                eqs.push(eq);
            }
        }

        loop {
            let Some(rows) = dedupe(ineqs) else {
                return Ok(None);
            };
            ineqs = rows;
            let mut counts: BTreeMap<&String, (usize, usize)> = BTreeMap::new();
            for row in &ineqs {
                for (v, c) in row.coeffs() {
                    if drop(v) {
                        let e = counts.entry(v).or_default();
                        if c.is_positive() {
                            e.0 += 1;
                        } else {
                            e.1 += 1;
                        }
                    }
                }
            }
            let Some(v) = counts
                .iter()
                .min_by_key(|(v, (p, n))| ((p * n) as i64 - (p + n) as i64, v.to_string()))
                .map(|(v, _)| (*v).clone())
            else {
                break;
            };
            let (with, without): (Vec<_>, Vec<_>) = ineqs.into_iter().partition(|r| r.mentions(&v));
            let (pos, neg): (Vec<_>, Vec<_>) = with.iter().partition(|r| r.coeff(&v).is_positive());
            let mut next = without;
            for p in &pos {
                let a = p.coeff(&v);
                for n in &neg {
                    let b = -n.coeff(&v);
                    next.push(p.scale(&b).add(&n.scale(&a)).primitive());
                }
                if next.len() > self.max_constraints {
                    return Err(SolverError::Blowup {
                        limit: self.max_constraints,
                    });
                }
            }
            steps.push(Step::Eliminate(v, with));
            ineqs = next;
        }
        Ok(Some(Elimination { eqs, ineqs, steps }))
    }
}

/// Removes constant rows (failing on a false one) and keeps the tightest
/// row per coefficient vector.
fn dedupe(rows: Vec<LinearTerm>) -> Option<Vec<LinearTerm>> {
    let mut best: BTreeMap<BTreeMap<String, BigInt>, BigInt> = BTreeMap::new();
    for r in rows {
        if r.is_constant() {
            if r.constant_part().is_positive() {
                return None;
            }
            continue;
        }
        let c = r.constant_part().clone();
        best.entry(r.coeffs().clone())
            .and_modify(|old| {
                if c > *old {
                    *old = c.clone();
                }
            })
            .or_insert(c);
    }
    Some(
        best.into_iter()
            .map(|(coeffs, c)| {
                let mut t = LinearTerm::constant(c);
                for (v, k) in coeffs {
                    t = t.add(&LinearTerm::var(v).scale(&k));
                }
                t
            })
            .collect(),
    )
}

fn eval_defaulting(t: &LinearTerm, model: &mut Model) -> BigRational {
    for v in t.vars() {
        model.entry(v.clone()).or_insert_with(BigRational::zero);
    }
    t.eval(model)
}

/// Picks a value for `v` within the bounds implied by `rows`, preferring 0,
/// then the integer closest to 0.
fn choose_value(v: &str, rows: &[LinearTerm], model: &mut Model) -> BigRational {
    let mut lo: Option<BigRational> = None;
    let mut hi: Option<BigRational> = None;
    for r in rows {
        let a = BigRational::from_integer(r.coeff(v));
        let rest = r.substitute(v, &LinearTerm::zero());
        let bound = -eval_defaulting(&rest, model) / &a;
        if a.is_positive() {
            if hi.as_ref().is_none_or(|h| bound < *h) {
                hi = Some(bound);
            }
        } else if lo.as_ref().is_none_or(|l| bound > *l) {
            lo = Some(bound);
        }
    }
    let zero = BigRational::zero();
    match (lo.clone(), hi.clone()) {
        (Some(l), _) if l > zero => {
            let c = l.ceil();
            match hi {
                Some(h) if c > h => l,
                _ => c,
            }
        }
        (lo, Some(h)) if h < zero => {
            let f = h.floor();
            match lo {
                Some(l) if f < l => h,
                _ => f,
            }
        }
        _ => zero,
    }
}
