use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{Signed, ToPrimitive};

use crate::cpa::Cpa;
use crate::frontend::{CfaEdge, EdgeOp, Expr, LocationId, ProgramRef};
use crate::solver::{normalize_condition, LinearConstraint, LinearTerm, Relation};

/// Unbounded entry.
pub const INF: i64 = i64::MAX;

fn add(a: i64, b: i64) -> i64 {
    if a == INF || b == INF {
        INF
    } else {
        // overflowing bounds are weakened to +∞
        a.checked_add(b).unwrap_or(INF)
    }
}

fn bar(i: usize) -> usize {
    i ^ 1
}

/// Difference-bound matrix over `2n` signed variables: index `2k` stands for
/// `+x_k` and `2k+1` for `-x_k`; entry `(i, j)` bounds `v_i - v_j` from above.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dbm {
    n: usize,
    m: Vec<i64>,
}

impl Dbm {
    /// The unconstrained matrix over `n` variables.
    pub fn top(n: usize) -> Self {
        let size = 2 * n;
        let mut m = vec![INF; size * size];
        for i in 0..size {
            m[i * size + i] = 0;
        }
        Dbm { n, m }
    }

    pub fn from_entries(n: usize, entries: Vec<i64>) -> Self {
        assert_eq!(entries.len(), 4 * n * n);
        Dbm { n, m: entries }
    }

    pub fn vars(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.m[i * self.dim() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: i64) {
        let d = self.dim();
        self.m[i * d + j] = v;
    }

    pub fn entries(&self) -> &[i64] {
        &self.m
    }

    /// Tightens `(i, j)` and its coherent twin `(j̄, ī)`.
    pub fn constrain(&mut self, i: usize, j: usize, c: i64) {
        if c < self.get(i, j) {
            self.set(i, j, c);
        }
        if c < self.get(bar(j), bar(i)) {
            self.set(bar(j), bar(i), c);
        }
    }

    /// Integer strong closure: shortest paths, then unary tightening to even
    /// bounds, then strengthening through the unary bounds. `None` when the
    /// constraints have no integer solution.
    pub fn close(mut self) -> Option<Dbm> {
        let d = self.dim();
        for k in 0..d {
            for i in 0..d {
                let ik = self.get(i, k);
                if ik == INF {
                    continue;
                }
                for j in 0..d {
                    let via = add(ik, self.get(k, j));
                    if via < self.get(i, j) {
                        self.set(i, j, via);
                    }
                }
            }
        }
        for i in 0..d {
            if self.get(i, i) < 0 {
                return None;
            }
        }
        for i in 0..d {
            let u = self.get(i, bar(i));
            if u != INF {
                self.set(i, bar(i), 2 * u.div_euclid(2));
            }
        }
        for i in 0..d {
            for j in 0..d {
                let (a, b) = (self.get(i, bar(i)), self.get(bar(j), j));
                if a != INF && b != INF {
                    let s = add(a, b);
                    if s != INF {
                        let t = s.div_euclid(2);
                        if t < self.get(i, j) {
                            self.set(i, j, t);
                        }
                    }
                }
            }
        }
        for i in 0..d {
            if self.get(i, i) < 0 {
                return None;
            }
            self.set(i, i, 0);
        }
        Some(self)
    }

    /// Whether the integer point `xs` satisfies every bound.
    pub fn contains(&self, xs: &[i64]) -> bool {
        let v = |i: usize| if i.is_multiple_of(2) { xs[i / 2] } else { -xs[i / 2] };
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| self.get(i, j) == INF || v(i) - v(j) <= self.get(i, j)))
    }

    pub fn le(&self, other: &Dbm) -> bool {
        self.m.iter().zip(&other.m).all(|(a, b)| a <= b)
    }

    /// Entrywise maximum.
    pub fn max(&self, other: &Dbm) -> Dbm {
        Dbm {
            n: self.n,
            m: self.m.iter().zip(&other.m).map(|(a, b)| *a.max(b)).collect(),
        }
    }

    /// Removes every constraint on variable `k`.
    pub fn forget(&mut self, k: usize) {
        let d = self.dim();
        for idx in [2 * k, 2 * k + 1] {
            for j in 0..d {
                if j != idx {
                    self.set(idx, j, INF);
                    self.set(j, idx, INF);
                }
            }
        }
    }

    /// `x_k := x_k + c`.
    pub fn shift(&mut self, k: usize, c: i64) {
        let d = self.dim();
        let delta = |i: usize| {
            if i == 2 * k {
                c
            } else if i == 2 * k + 1 {
                -c
            } else {
                0
            }
        };
        for i in 0..d {
            for j in 0..d {
                let m = self.get(i, j);
                let dd = delta(i) - delta(j);
                if m != INF && dd != 0 {
                    let v = m.checked_add(dd).unwrap_or(INF);
                    self.set(i, j, v);
                }
            }
        }
    }

    /// `x_k := -x_k`.
    pub fn negate(&mut self, k: usize) {
        let d = self.dim();
        let p = |i: usize| {
            if i == 2 * k {
                2 * k + 1
            } else if i == 2 * k + 1 {
                2 * k
            } else {
                i
            }
        };
        let old = self.clone();
        for i in 0..d {
            for j in 0..d {
                self.set(p(i), p(j), old.get(i, j));
            }
        }
    }

    /// Upper bound on `x_k`, if any.
    pub fn upper(&self, k: usize) -> Option<i64> {
        let u = self.get(2 * k, 2 * k + 1);
        (u != INF).then(|| u.div_euclid(2))
    }

    /// Lower bound on `x_k`, if any.
    pub fn lower(&self, k: usize) -> Option<i64> {
        let l = self.get(2 * k + 1, 2 * k);
        (l != INF).then(|| -(l.div_euclid(2)))
    }
}

/// Octagon over all program variables; `Bottom` is the empty set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum OctagonState {
    Bottom,
    Dbm(Arc<Dbm>),
}

/// Octagon analysis. Variables are indexed by sorted qualified name.
#[derive(Debug, Clone)]
pub struct OctagonCpa {
    program: Option<ProgramRef>,
    index: BTreeMap<String, usize>,
}

impl fmt::Display for OctagonState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OctagonState::Bottom => write!(f, "⊥"),
            OctagonState::Dbm(d) => {
                let mut first = true;
                write!(f, "{{")?;
                for i in 0..d.dim() {
                    for j in 0..d.dim() {
                        let v = d.get(i, j);
                        // print each coherent pair once
                        if i == j || v == INF || (bar(j), bar(i)) < (i, j) {
                            continue;
                        }
                        if !first {
                            write!(f, ", ")?;
                        }
                        first = false;
                        let sv = |k: usize| format!("{}v{}", if k.is_multiple_of(2) { "+" } else { "-" }, k / 2);
                        write!(f, "{}{} <= {v}", sv(i), sv(bar(j)))?;
                    }
                }
                write!(f, "}}")
            }
        }
    }
}

impl OctagonCpa {
    pub fn new(program: ProgramRef) -> Self {
        let index = program.variables().into_iter().enumerate().map(|(i, v)| (v, i)).collect();
        OctagonCpa {
            program: Some(program),
            index,
        }
    }

    /// An octagon analysis over the given variable names, without a program.
    pub fn over<S: Into<String>>(vars: impl IntoIterator<Item = S>) -> Self {
        let index = vars.into_iter().enumerate().map(|(i, v)| (v.into(), i)).collect();
        OctagonCpa { program: None, index }
    }

    pub fn index_of(&self, var: &str) -> Option<usize> {
        self.index.get(var).copied()
    }

    pub fn top(&self) -> OctagonState {
        OctagonState::Dbm(Arc::new(Dbm::top(self.index.len())))
    }

    fn wrap(d: Option<Dbm>) -> OctagonState {
        match d {
            Some(d) => OctagonState::Dbm(Arc::new(d)),
            None => OctagonState::Bottom,
        }
    }

    /// Adds one linear constraint if it is octagonal; others are ignored.
    fn add_constraint(&self, d: &mut Dbm, c: &LinearConstraint) {
        let t = c.term();
        let Some(rhs) = (-t.constant_part()).to_i64() else {
            return;
        };
        let coeffs: Vec<(usize, i64)> = t
            .coeffs()
            .iter()
            .filter_map(|(v, a)| Some((self.index_of(v)?, a.to_i64()?)))
            .collect();
        if coeffs.len() != t.coeffs().len() {
            return;
        }
        let idx = |k: usize, a: i64| if a > 0 { 2 * k } else { 2 * k + 1 };
        let mut put = |coeffs: &[(usize, i64)], rhs: i64| match coeffs {
            // a·x ≤ rhs with |a| = 1, stored as 2x ≤ 2·rhs
            [(k, a)] if a.abs() == 1 => {
                let i = idx(*k, *a);
                if let Some(r2) = rhs.checked_mul(2) {
                    d.constrain(i, bar(i), r2);
                }
            }
            [(k1, a1), (k2, a2)] if a1.abs() == 1 && a2.abs() == 1 => {
                d.constrain(idx(*k1, *a1), bar(idx(*k2, *a2)), rhs);
            }
            _ => {}
        };
        match c.relation() {
            Relation::Le => put(&coeffs, rhs),
            Relation::Eq => {
                put(&coeffs, rhs);
                let neg: Vec<(usize, i64)> = coeffs.iter().map(|(k, a)| (*k, -a)).collect();
                put(&neg, -rhs);
            }
            Relation::Ne => {}
        }
    }

    fn assign(&self, d: &Dbm, lhs: &str, rhs: &Expr) -> Option<Dbm> {
        let Some(k) = self.index_of(lhs) else {
            return Some(d.clone());
        };
        let mut d = d.clone();
        let term = LinearTerm::from_expr(rhs).ok();
        let Some(term) = term else {
            d.forget(k);
            return Some(d);
        };
        let c = term.constant_part().to_i64();
        match (term.coeffs().len(), c) {
            (0, Some(c)) => {
                d.forget(k);
                d.constrain(2 * k, 2 * k + 1, c.checked_mul(2)?);
                d.constrain(2 * k + 1, 2 * k, (-c).checked_mul(2)?);
            }
            (1, Some(c)) => {
                let (y, a) = term.coeffs().iter().next().unwrap();
                let a = a.to_i64().filter(|a| a.abs() == 1);
                match (self.index_of(y), a) {
                    (Some(j), Some(a)) if j == k => {
                        if a < 0 {
                            d.negate(k);
                        }
                        d.shift(k, c);
                    }
                    (Some(j), Some(a)) => {
                        d.forget(k);
                        // x - a·y ≤ c and a·y - x ≤ -c
                        let jy = if a > 0 { 2 * j } else { 2 * j + 1 };
                        d.constrain(2 * k, jy, c);
                        d.constrain(jy, 2 * k, -c);
                    }
                    _ => d.forget(k),
                }
            }
            _ => d.forget(k),
        }
        d.close()
    }

    fn post(&self, d: &Dbm, edge: &CfaEdge) -> Vec<OctagonState> {
        match &edge.op {
            EdgeOp::Skip | EdgeOp::Return { .. } => vec![OctagonState::Dbm(Arc::new(d.clone()))],
            EdgeOp::Assign { lhs, rhs } => vec![Self::wrap(self.assign(d, lhs, rhs))],
            EdgeOp::Assume { .. } => {
                let cond = edge.op.assumed_condition().unwrap();
                let Ok(branches) = normalize_condition(&cond) else {
                    return vec![OctagonState::Dbm(Arc::new(d.clone()))];
                };
                let mut out: Vec<OctagonState> = Vec::new();
                for b in branches {
                    let mut nd = d.clone();
                    for c in b.iter() {
                        self.add_constraint(&mut nd, c);
                    }
                    let s = Self::wrap(nd.close());
                    if s != OctagonState::Bottom && !out.contains(&s) {
                        out.push(s);
                    }
                }
                out
            }
            EdgeOp::Call { callee, args, .. } => {
                let program = self.program.as_ref().expect("calls need a program");
                let params = &program.cfa(callee).expect("callee exists").params;
                let mut cur = d.clone();
                for (p, a) in params.iter().zip(args) {
                    match self.assign(&cur, p, a) {
                        Some(n) => cur = n,
                        None => return vec![],
                    }
                }
                vec![OctagonState::Dbm(Arc::new(cur))]
            }
        }
    }
}

impl Cpa for OctagonCpa {
    type State = OctagonState;
    type Precision = ();

    fn name(&self) -> &str {
        "octagon"
    }

    fn initial_state(&self, _entry: LocationId) -> OctagonState {
        self.top()
    }

    fn initial_precision(&self) {}

    fn is_bottom(&self, s: &OctagonState) -> bool {
        matches!(s, OctagonState::Bottom)
    }

    fn less_or_equal(&self, a: &OctagonState, b: &OctagonState) -> bool {
        match (a, b) {
            (OctagonState::Bottom, _) => true,
            (_, OctagonState::Bottom) => false,
            (OctagonState::Dbm(a), OctagonState::Dbm(b)) => a.le(b),
        }
    }

    fn join(&self, a: &OctagonState, b: &OctagonState) -> OctagonState {
        match (a, b) {
            (OctagonState::Bottom, x) | (x, OctagonState::Bottom) => x.clone(),
            (OctagonState::Dbm(a), OctagonState::Dbm(b)) => Self::wrap(a.max(b).close()),
        }
    }

    fn transfer(&self, s: &OctagonState, edge: &CfaEdge, _prec: &()) -> Vec<OctagonState> {
        match s {
            OctagonState::Bottom => Vec::new(),
            OctagonState::Dbm(d) => self.post(d, edge),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{CmpOp, LocationId};

    fn edge(op: EdgeOp) -> CfaEdge {
        CfaEdge {
            source: LocationId(0),
            target: LocationId(1),
            op,
        }
    }

    fn assume(cond: Expr) -> CfaEdge {
        edge(EdgeOp::Assume { cond, truth: true })
    }

    fn le(l: Expr, r: Expr) -> Expr {
        Expr::cmp(CmpOp::Le, l, r)
    }

    fn sub(a: &str, b: &str) -> Expr {
        Expr::arith(crate::frontend::ArithOp::Sub, Expr::var(a), Expr::var(b))
    }

    fn dbm(s: &OctagonState) -> &Dbm {
        match s {
            OctagonState::Dbm(d) => d,
            OctagonState::Bottom => panic!("unexpected bottom"),
        }
    }

    #[test]
    fn closure_derives_transitive_bound() {
        let cpa = OctagonCpa::over(["x", "y", "z"]);
        let s = cpa.top();
        let s = cpa.transfer(&s, &assume(le(sub("x", "y"), Expr::int(1))), &()).pop().unwrap();
        let s = cpa.transfer(&s, &assume(le(sub("y", "z"), Expr::int(2))), &()).pop().unwrap();
        // x - z ≤ 3  is entry (+x, +z)
        assert_eq!(dbm(&s).get(0, 4), 3);
    }

    #[test]
    fn increment_shifts_bound() {
        let cpa = OctagonCpa::over(["x"]);
        let s = cpa.transfer(&cpa.top(), &assume(le(Expr::var("x"), Expr::int(4))), &()).pop().unwrap();
        let inc = edge(EdgeOp::Assign {
            lhs: "x".into(),
            rhs: Expr::arith(crate::frontend::ArithOp::Add, Expr::var("x"), Expr::int(1)),
        });
        let s = cpa.transfer(&s, &inc, &()).pop().unwrap();
        assert_eq!(dbm(&s).upper(0), Some(5));
        assert_eq!(dbm(&s).lower(0), None);
    }

    #[test]
    fn negative_diagonal_is_bottom() {
        let cpa = OctagonCpa::over(["x"]);
        let c = le(sub("x", "x"), Expr::int(-1));
        assert!(cpa.transfer(&cpa.top(), &assume(c), &()).is_empty());
        let mut d = Dbm::top(1);
        d.set(0, 0, -1);
        assert_eq!(d.close(), None);
    }

    #[test]
    fn integer_strengthening_halves_with_floor() {
        // 2x ≤ 3  ⇒  x ≤ 1
        let mut d = Dbm::top(1);
        d.set(0, 1, 3);
        let d = d.close().unwrap();
        assert_eq!(d.upper(0), Some(1));
        assert!(d.contains(&[1]) && !d.contains(&[2]));
    }

    #[test]
    fn closure_is_idempotent() {
        let mut d = Dbm::top(2);
        d.constrain(0, 2, 1);
        d.constrain(1, 0, 6);
        let c1 = d.close().unwrap();
        assert_eq!(c1.clone().close().unwrap(), c1);
    }

    #[test]
    fn join_of_points_is_interval() {
        let cpa = OctagonCpa::over(["x"]);
        let eq = |v| {
            let c = Expr::cmp(CmpOp::Eq, Expr::var("x"), Expr::int(v));
            cpa.transfer(&cpa.top(), &assume(c), &()).pop().unwrap()
        };
        let (a, b) = (eq(1), eq(3));
        let j = cpa.join(&a, &b);
        assert_eq!((dbm(&j).lower(0), dbm(&j).upper(0)), (Some(1), Some(3)));
        assert!(cpa.less_or_equal(&a, &j) && cpa.less_or_equal(&b, &j));
        assert_eq!(cpa.join(&OctagonState::Bottom, &b), b);
    }

    #[test]
    fn assignment_from_other_variable() {
        let cpa = OctagonCpa::over(["x", "y"]);
        let s = cpa.transfer(&cpa.top(), &assume(le(Expr::var("y"), Expr::int(2))), &()).pop().unwrap();
        let a = edge(EdgeOp::Assign {
            lhs: "x".into(),
            rhs: Expr::arith(crate::frontend::ArithOp::Sub, Expr::int(3), Expr::var("y")),
        });
        let s = cpa.transfer(&s, &a, &()).pop().unwrap();
        // x = 3 - y ≥ 1
        assert_eq!(dbm(&s).lower(0), Some(1));
    }

    #[test]
    fn disjunctive_assume_splits() {
        let cpa = OctagonCpa::over(["x"]);
        let c = Expr::cmp(CmpOp::Ne, Expr::var("x"), Expr::int(0));
        assert_eq!(cpa.transfer(&cpa.top(), &assume(c), &()).len(), 2);
    }
}
