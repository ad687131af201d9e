use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;

use crate::config::{CounterMode, Threshold};
use crate::cpa::{Cpa, ReachedView};
use crate::frontend::{push_negations, ArithOp, CfaEdge, CmpOp, EdgeOp, Expr, LocationId, ProgramRef};
use crate::solver::LinearTerm;

/// Known variable values; an absent variable may hold anything.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExplicitState {
    Bottom,
    Values(BTreeMap<String, BigInt>),
}

impl ExplicitState {
    pub fn top() -> Self {
        ExplicitState::Values(BTreeMap::new())
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, i64)>) -> Self {
        ExplicitState::Values(pairs.into_iter().map(|(k, v)| (k.into(), BigInt::from(v))).collect())
    }

    pub fn get(&self, var: &str) -> Option<&BigInt> {
        match self {
            ExplicitState::Values(m) => m.get(var),
            ExplicitState::Bottom => None,
        }
    }

    pub fn values(&self) -> Option<&BTreeMap<String, BigInt>> {
        match self {
            ExplicitState::Values(m) => Some(m),
            ExplicitState::Bottom => None,
        }
    }
}

impl fmt::Display for ExplicitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExplicitState::Bottom => write!(f, "⊥"),
            ExplicitState::Values(m) => {
                write!(f, "{{")?;
                for (i, (k, v)) in m.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{k}={v}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

type CounterKey = (Option<LocationId>, String);

/// Threshold plus the distinct values seen so far along the current path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplicitPrecision {
    pub threshold: Threshold,
    pub mode: CounterMode,
    observed: BTreeMap<CounterKey, BTreeSet<BigInt>>,
    saturated: BTreeSet<CounterKey>,
}

impl ExplicitPrecision {
    pub fn new(threshold: Threshold, mode: CounterMode) -> Self {
        ExplicitPrecision {
            threshold,
            mode,
            observed: BTreeMap::new(),
            saturated: BTreeSet::new(),
        }
    }

    fn key(&self, loc: LocationId, var: &str) -> CounterKey {
        match self.mode {
            CounterMode::PerLocation => (Some(loc), var.to_string()),
            CounterMode::Global => (None, var.to_string()),
        }
    }

    /// Values recorded for `var` at `loc` (or globally, per the mode).
    pub fn observed(&self, loc: LocationId, var: &str) -> Option<&BTreeSet<BigInt>> {
        self.observed.get(&self.key(loc, var))
    }

    pub fn is_saturated(&self, loc: LocationId, var: &str) -> bool {
        self.saturated.contains(&self.key(loc, var))
    }

    /// Records an observation directly.
    pub fn with_observed(mut self, loc: LocationId, var: &str, values: impl IntoIterator<Item = i64>) -> Self {
        let key = self.key(loc, var);
        self.observed.entry(key).or_default().extend(values.into_iter().map(BigInt::from));
        self
    }

    pub fn largest_observed_set(&self) -> usize {
        self.observed.values().map(BTreeSet::len).max().unwrap_or(0)
    }
}

/// Constant propagation with a per-variable value-count threshold.
#[derive(Debug, Clone)]
pub struct ExplicitCpa {
    program: ProgramRef,
    threshold: Threshold,
    mode: CounterMode,
}

fn eval_arith(e: &Expr, env: &BTreeMap<String, BigInt>) -> Option<BigInt> {
    match e {
        Expr::Int(v) => Some(v.clone()),
        Expr::Var(x) => env.get(x).cloned(),
        Expr::Nondet => None,
        Expr::Arith(op, l, r) => {
            // 0 * ⊤ is still 0
            let (l, r) = (eval_arith(l, env), eval_arith(r, env));
            match (op, l, r) {
                (ArithOp::Mul, Some(z), _) | (ArithOp::Mul, _, Some(z)) if z.is_zero() => Some(BigInt::zero()),
                (ArithOp::Add, Some(a), Some(b)) => Some(a + b),
                (ArithOp::Sub, Some(a), Some(b)) => Some(a - b),
                (ArithOp::Mul, Some(a), Some(b)) => Some(a * b),
                _ => None,
            }
        }
        _ => None,
    }
}

/// Kleene evaluation: `None` when the value depends on unknown variables.
fn eval_cond(e: &Expr, env: &BTreeMap<String, BigInt>) -> Option<bool> {
    match e {
        Expr::Cmp(op, l, r) => {
            let (l, r) = (eval_arith(l, env)?, eval_arith(r, env)?);
            Some(op.holds(l.cmp(&r)))
        }
        Expr::Not(x) => eval_cond(x, env).map(|b| !b),
        Expr::And(l, r) => match (eval_cond(l, env), eval_cond(r, env)) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        },
        Expr::Or(l, r) => match (eval_cond(l, env), eval_cond(r, env)) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        },
        other => eval_arith(other, env).map(|v| !v.is_zero()),
    }
}

/// Narrows `env` under the assumption `cond`; `None` if it cannot hold.
fn assume(cond: &Expr, env: &mut BTreeMap<String, BigInt>) -> Option<()> {
    match eval_cond(cond, env) {
        Some(false) => return None,
        Some(true) => return Some(()),
        None => {}
    }
    match cond {
        Expr::And(l, r) => {
            // bindings from one conjunct may decide or narrow the other
            loop {
                let known = env.len();
                assume(l, env)?;
                assume(r, env)?;
                if env.len() == known {
                    break;
                }
            }
        }
        Expr::Cmp(CmpOp::Eq, l, r) => {
            let (Ok(l), Ok(r)) = (LinearTerm::from_expr(l), LinearTerm::from_expr(r)) else {
                return Some(());
            };
            let mut t = l.sub(&r);
            for (x, v) in env.iter() {
                if t.mentions(x) {
                    t = t.substitute(x, &LinearTerm::constant(v.clone()));
                }
            }
            if t.coeffs().len() == 1 {
                let (x, a) = t.coeffs().iter().next().unwrap();
                let (q, rem) = (-t.constant_part()).div_rem(a);
                if !rem.is_zero() {
                    return None;
                }
                env.insert(x.clone(), q);
            }
        }
        _ => {}
    }
    Some(())
}

impl ExplicitCpa {
    pub fn new(program: ProgramRef, threshold: Threshold, mode: CounterMode) -> Self {
        ExplicitCpa {
            program,
            threshold,
            mode,
        }
    }

    fn post(&self, env: &BTreeMap<String, BigInt>, edge: &CfaEdge) -> Option<BTreeMap<String, BigInt>> {
        let mut env = env.clone();
        match &edge.op {
            EdgeOp::Skip => {}
            EdgeOp::Assign { lhs, rhs } => match eval_arith(rhs, &env) {
                Some(v) => {
                    env.insert(lhs.clone(), v);
                }
                None => {
                    env.remove(lhs);
                }
            },
            EdgeOp::Assume { .. } => {
                let cond = push_negations(&edge.op.assumed_condition().unwrap());
                assume(&cond, &mut env)?;
            }
            EdgeOp::Call { callee, args, .. } => {
                let params = &self.program.cfa(callee).expect("callee exists").params;
                let values: Vec<Option<BigInt>> = args.iter().map(|a| eval_arith(a, &env)).collect();
                for (p, v) in params.iter().zip(values) {
                    match v {
                        Some(v) => env.insert(p.clone(), v),
                        None => env.remove(p),
                    };
                }
            }
            EdgeOp::Return { .. } => {
                let f = self.program.function_of(edge.source).expect("return edge inside a function");
                let locals = &self.program.cfa(f).unwrap().locals;
                env.retain(|k, _| !locals.contains(k));
            }
        }
        Some(env)
    }
}

impl Cpa for ExplicitCpa {
    type State = ExplicitState;
    type Precision = ExplicitPrecision;

    fn name(&self) -> &str {
        "explicit"
    }

    fn initial_state(&self, _entry: LocationId) -> ExplicitState {
        ExplicitState::top()
    }

    fn initial_precision(&self) -> ExplicitPrecision {
        ExplicitPrecision::new(self.threshold, self.mode)
    }

    fn is_bottom(&self, s: &ExplicitState) -> bool {
        matches!(s, ExplicitState::Bottom)
    }

    fn less_or_equal(&self, a: &ExplicitState, b: &ExplicitState) -> bool {
        match (a, b) {
            (ExplicitState::Bottom, _) => true,
            (_, ExplicitState::Bottom) => false,
            (ExplicitState::Values(a), ExplicitState::Values(b)) => b.iter().all(|(k, v)| a.get(k) == Some(v)),
        }
    }

    fn join(&self, a: &ExplicitState, b: &ExplicitState) -> ExplicitState {
        match (a, b) {
            (ExplicitState::Bottom, x) | (x, ExplicitState::Bottom) => x.clone(),
            (ExplicitState::Values(a), ExplicitState::Values(b)) => ExplicitState::Values(
                a.iter()
                    .filter(|(k, v)| b.get(*k) == Some(v))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect(),
            ),
        }
    }

    fn transfer(&self, s: &ExplicitState, edge: &CfaEdge, prec: &ExplicitPrecision) -> Vec<ExplicitState> {
        let ExplicitState::Values(env) = s else {
            return Vec::new();
        };
        match self.post(env, edge) {
            None => Vec::new(),
            Some(_) if prec.threshold == Threshold::Finite(0) => vec![ExplicitState::top()],
            Some(env) => vec![ExplicitState::Values(env)],
        }
    }

    fn prec(&self, s: &ExplicitState, prec: &ExplicitPrecision, view: &ReachedView) -> (ExplicitState, ExplicitPrecision) {
        let ExplicitState::Values(env) = s else {
            return (s.clone(), prec.clone());
        };
        if prec.threshold == Threshold::Infinite || env.is_empty() {
            return (s.clone(), prec.clone());
        }
        let mut p = prec.clone();
        let mut kept = BTreeMap::new();
        for (x, v) in env {
            let key = p.key(view.location, x);
            if p.saturated.contains(&key) {
                continue;
            }
            let seen = p.observed.entry(key.clone()).or_default();
            seen.insert(v.clone());
            if p.threshold.exceeded_by(seen.len()) {
                p.saturated.insert(key);
            } else {
                kept.insert(x.clone(), v.clone());
            }
        }
        (ExplicitState::Values(kept), p)
    }
}
