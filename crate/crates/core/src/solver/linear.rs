use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::SolverError;
use crate::frontend::{push_negations, ArithOp, CmpOp, Expr};

/// `Σ coeffᵢ·xᵢ + constant` with integer coefficients; zero coefficients
/// are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearTerm {
    coeffs: BTreeMap<String, BigInt>,
    constant: BigInt,
}

impl LinearTerm {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: impl Into<BigInt>) -> Self {
        LinearTerm {
            coeffs: BTreeMap::new(),
            constant: c.into(),
        }
    }

    pub fn var(name: impl Into<String>) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(name.into(), BigInt::one());
        LinearTerm {
            coeffs,
            constant: BigInt::zero(),
        }
    }

    /// Builds a term from `(variable, coefficient)` pairs and a constant.
    pub fn from_parts<S: Into<String>>(parts: impl IntoIterator<Item = (S, i64)>, constant: i64) -> Self {
        let mut t = LinearTerm::constant(constant);
        for (v, c) in parts {
            t.add_coeff(v.into(), BigInt::from(c));
        }
        t
    }

    pub fn coeffs(&self) -> &BTreeMap<String, BigInt> {
        &self.coeffs
    }

    pub fn constant_part(&self) -> &BigInt {
        &self.constant
    }

    pub fn coeff(&self, v: &str) -> BigInt {
        self.coeffs.get(v).cloned().unwrap_or_default()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = &String> {
        self.coeffs.keys()
    }

    pub fn mentions(&self, v: &str) -> bool {
        self.coeffs.contains_key(v)
    }

    fn add_coeff(&mut self, v: String, c: BigInt) {
        let entry = self.coeffs.entry(v).or_default();
        *entry += c;
        if entry.is_zero() {
            self.coeffs.retain(|_, c| !c.is_zero());
        }
    }

    pub fn add(&self, other: &LinearTerm) -> LinearTerm {
        let mut out = self.clone();
        for (v, c) in &other.coeffs {
            out.add_coeff(v.clone(), c.clone());
        }
        out.constant += &other.constant;
        out
    }

    pub fn scale(&self, k: &BigInt) -> LinearTerm {
        if k.is_zero() {
            return LinearTerm::zero();
        }
        LinearTerm {
            coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), c * k)).collect(),
            constant: &self.constant * k,
        }
    }

    pub fn neg(&self) -> LinearTerm {
        self.scale(&BigInt::from(-1))
    }

    pub fn sub(&self, other: &LinearTerm) -> LinearTerm {
        self.add(&other.neg())
    }

    pub fn plus_constant(&self, k: impl Into<BigInt>) -> LinearTerm {
        let mut out = self.clone();
        out.constant += k.into();
        out
    }

    pub fn rename(&self, f: &dyn Fn(&str) -> String) -> LinearTerm {
        let mut out = LinearTerm::constant(self.constant.clone());
        for (v, c) in &self.coeffs {
            out.add_coeff(f(v), c.clone());
        }
        out
    }

    /// Replaces `v` by `replacement`.
    pub fn substitute(&self, v: &str, replacement: &LinearTerm) -> LinearTerm {
        match self.coeffs.get(v) {
            None => self.clone(),
            Some(c) => {
                let mut rest = self.clone();
                rest.coeffs.remove(v);
                rest.add(&replacement.scale(c))
            }
        }
    }

    /// gcd of the variable coefficients (0 for a constant term).
    pub fn coeff_gcd(&self) -> BigInt {
        self.coeffs.values().fold(BigInt::zero(), |g, c| g.gcd(c))
    }

    /// Divides coefficients and constant by their common gcd.
    pub(crate) fn primitive(&self) -> LinearTerm {
        let g = self.coeff_gcd().gcd(&self.constant);
        if g.is_zero() || g.is_one() {
            return self.clone();
        }
        LinearTerm {
            coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), c / &g)).collect(),
            constant: &self.constant / &g,
        }
    }

    /// Evaluates under a rational model; missing variables read as 0.
    pub fn eval(&self, model: &Model) -> BigRational {
        let mut acc = BigRational::from_integer(self.constant.clone());
        for (v, c) in &self.coeffs {
            if let Some(val) = model.get(v) {
                acc += val * BigRational::from_integer(c.clone());
            }
        }
        acc
    }

    /// Converts a linear arithmetic expression.
    pub fn from_expr(e: &Expr) -> Result<LinearTerm, SolverError> {
        match e {
            Expr::Int(v) => Ok(LinearTerm::constant(v.clone())),
            Expr::Var(v) => Ok(LinearTerm::var(v.clone())),
            Expr::Arith(op, l, r) => {
                let l = LinearTerm::from_expr(l)?;
                let r = LinearTerm::from_expr(r)?;
                match op {
                    ArithOp::Add => Ok(l.add(&r)),
                    ArithOp::Sub => Ok(l.sub(&r)),
                    ArithOp::Mul => {
                        if l.is_constant() {
                            Ok(r.scale(&l.constant))
                        } else if r.is_constant() {
                            Ok(l.scale(&r.constant))
                        } else {
                            Err(SolverError::Nonlinear(e.to_string()))
                        }
                    }
                }
            }
            other => Err(SolverError::NotArithmetic(other.to_string())),
        }
    }
}

impl fmt::Display for LinearTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_sum(f, self.coeffs.iter().map(|(v, c)| (v.as_str(), c.clone())), &self.constant)
    }
}

fn write_sum<'a>(
    f: &mut fmt::Formatter<'_>,
    terms: impl Iterator<Item = (&'a str, BigInt)>,
    constant: &BigInt,
) -> fmt::Result {
    let mut first = true;
    for (v, c) in terms {
        let mag = c.abs();
        if first {
            if c.is_negative() {
                write!(f, "-")?;
            }
        } else if c.is_negative() {
            write!(f, " - ")?;
        } else {
            write!(f, " + ")?;
        }
        if mag.is_one() {
            write!(f, "{v}")?;
        } else {
            write!(f, "{mag}*{v}")?;
        }
        first = false;
    }
    if first {
        write!(f, "{constant}")
    } else if constant.is_negative() {
        write!(f, " - {}", constant.abs())
    } else if !constant.is_zero() {
        write!(f, " + {constant}")
    } else {
        Ok(())
    }
}

/// Relation of a term against zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    Le,
    Eq,
    Ne,
}

/// `term (≤ | = | ≠) 0` in canonical form.
///
/// Inequalities are tightened for integers: coefficients are divided by
/// their gcd and the constant rounded up. (Dis)equalities are divided by the
/// gcd of all coefficients and constant, and the first coefficient made
/// positive, so syntactically different spellings of one atom compare equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearConstraint {
    term: LinearTerm,
    relation: Relation,
}

impl LinearConstraint {
    pub fn new(term: LinearTerm, relation: Relation) -> Self {
        match relation {
            Relation::Le => Self::le(term),
            Relation::Eq => Self::eq(term),
            Relation::Ne => Self::ne(term),
        }
    }

    pub fn le(term: LinearTerm) -> Self {
        let g = term.coeff_gcd();
        let term = if g.is_zero() {
            // constant-only: normalize to 0 ≤ 0 or 1 ≤ 0
            let c = if term.constant.is_positive() { 1 } else { 0 };
            LinearTerm::constant(c)
        } else if g.is_one() {
            term
        } else {
            LinearTerm {
                coeffs: term.coeffs.iter().map(|(v, c)| (v.clone(), c / &g)).collect(),
                constant: term.constant.div_ceil(&g),
            }
        };
        LinearConstraint {
            term,
            relation: Relation::Le,
        }
    }

    fn sign_normalized(term: LinearTerm, relation: Relation) -> Self {
        let mut term = term.primitive();
        if term.is_constant() {
            // 0 = 0 / 1 = 0 for equalities, 1 != 0 / 0 != 0 for disequalities
            let nonzero = !term.constant.is_zero();
            term = LinearTerm::constant(if nonzero { 1 } else { 0 });
        } else if term.coeffs.values().next().is_some_and(|c| c.is_negative()) {
            term = term.neg();
        }
        LinearConstraint { term, relation }
    }

    pub fn eq(term: LinearTerm) -> Self {
        Self::sign_normalized(term, Relation::Eq)
    }

    pub fn ne(term: LinearTerm) -> Self {
        Self::sign_normalized(term, Relation::Ne)
    }

    pub fn term(&self) -> &LinearTerm {
        &self.term
    }

    pub fn relation(&self) -> Relation {
        self.relation
    }

    pub fn vars(&self) -> impl Iterator<Item = &String> {
        self.term.vars()
    }

    pub fn is_trivially_true(&self) -> bool {
        self.term.is_constant() && self.holds_constant()
    }

    pub fn is_trivially_false(&self) -> bool {
        self.term.is_constant() && !self.holds_constant()
    }

    fn holds_constant(&self) -> bool {
        let c = &self.term.constant;
        match self.relation {
            Relation::Le => !c.is_positive(),
            Relation::Eq => c.is_zero(),
            Relation::Ne => !c.is_zero(),
        }
    }

    /// Integer negation as a disjunction of constraints.
    pub fn negate(&self) -> Vec<LinearConstraint> {
        let t = &self.term;
        match self.relation {
            // ¬(t ≤ 0) ⇔ t ≥ 1
            Relation::Le => vec![Self::le(t.neg().plus_constant(1))],
            Relation::Eq => vec![Self::le(t.plus_constant(1)), Self::le(t.neg().plus_constant(1))],
            Relation::Ne => vec![Self::eq(t.clone())],
        }
    }

    pub fn rename(&self, f: &dyn Fn(&str) -> String) -> LinearConstraint {
        Self::new(self.term.rename(f), self.relation)
    }

    pub fn substitute(&self, v: &str, replacement: &LinearTerm) -> LinearConstraint {
        Self::new(self.term.substitute(v, replacement), self.relation)
    }

    pub fn holds(&self, model: &Model) -> bool {
        let v = self.term.eval(model);
        match self.relation {
            Relation::Le => !v.is_positive(),
            Relation::Eq => v.is_zero(),
            Relation::Ne => !v.is_zero(),
        }
    }

    /// Source-like rendering with the constant moved to the right.
    pub fn display_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for LinearConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.term.is_constant() {
            return write!(f, "{}", if self.holds_constant() { "true" } else { "false" });
        }
        let mut coeffs: Vec<(&str, BigInt)> = self.term.coeffs.iter().map(|(v, c)| (v.as_str(), c.clone())).collect();
        let mut rhs = -self.term.constant.clone();
        let mut op = match self.relation {
            Relation::Le => "<=",
            Relation::Eq => "==",
            Relation::Ne => "!=",
        };
        if self.relation == Relation::Le && coeffs.iter().all(|(_, c)| c.is_negative()) {
            for (_, c) in &mut coeffs {
                *c = -c.clone();
            }
            rhs = -rhs;
            op = ">=";
        }
        write_sum(f, coeffs.into_iter(), &BigInt::zero())?;
        write!(f, " {op} {rhs}")
    }
}

/// A set of constraints read conjunctively.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Conjunction {
    constraints: BTreeSet<LinearConstraint>,
}

impl Conjunction {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_constraints(cs: impl IntoIterator<Item = LinearConstraint>) -> Self {
        let mut c = Conjunction::new();
        for x in cs {
            c.insert(x);
        }
        c
    }

    /// Adds a constraint; trivially true ones are dropped.
    pub fn insert(&mut self, c: LinearConstraint) {
        if !c.is_trivially_true() {
            self.constraints.insert(c);
        }
    }

    pub fn extend(&mut self, other: &Conjunction) {
        for c in &other.constraints {
            self.insert(c.clone());
        }
    }

    pub fn union(&self, other: &Conjunction) -> Conjunction {
        let mut out = self.clone();
        out.extend(other);
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = &LinearConstraint> {
        self.constraints.iter()
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn contains(&self, c: &LinearConstraint) -> bool {
        self.constraints.contains(c)
    }

    pub fn has_trivially_false(&self) -> bool {
        self.constraints.iter().any(LinearConstraint::is_trivially_false)
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.constraints.iter().flat_map(|c| c.vars().cloned()).collect()
    }

    pub fn rename(&self, f: &dyn Fn(&str) -> String) -> Conjunction {
        Conjunction::from_constraints(self.constraints.iter().map(|c| c.rename(f)))
    }

    /// Exact check of every constraint under `model`.
    pub fn satisfied_by(&self, model: &Model) -> bool {
        self.constraints.iter().all(|c| c.holds(model))
    }
}

impl fmt::Display for Conjunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.constraints.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<LinearConstraint> for Conjunction {
    fn from_iter<I: IntoIterator<Item = LinearConstraint>>(iter: I) -> Self {
        Conjunction::from_constraints(iter)
    }
}

/// Rational assignment to variables.
pub type Model = BTreeMap<String, BigRational>;

fn cmp_constraints(op: CmpOp, l: &Expr, r: &Expr, split_ne: bool) -> Result<Vec<Conjunction>, SolverError> {
    let t = LinearTerm::from_expr(l)?.sub(&LinearTerm::from_expr(r)?);
    let single = |c: LinearConstraint| vec![Conjunction::from_constraints([c])];
    Ok(match op {
        CmpOp::Le => single(LinearConstraint::le(t)),
        CmpOp::Lt => single(LinearConstraint::le(t.plus_constant(1))),
        CmpOp::Ge => single(LinearConstraint::le(t.neg())),
        CmpOp::Gt => single(LinearConstraint::le(t.neg().plus_constant(1))),
        CmpOp::Eq => single(LinearConstraint::eq(t)),
        CmpOp::Ne if !split_ne => single(LinearConstraint::ne(t)),
        CmpOp::Ne => vec![
            Conjunction::from_constraints([LinearConstraint::le(t.plus_constant(1))]),
            Conjunction::from_constraints([LinearConstraint::le(t.neg().plus_constant(1))]),
        ],
    })
}

fn dnf(e: &Expr, split_ne: bool) -> Result<Vec<Conjunction>, SolverError> {
    match e {
        Expr::Cmp(op, l, r) => cmp_constraints(*op, l, r, split_ne),
        Expr::And(l, r) => {
            let (l, r) = (dnf(l, split_ne)?, dnf(r, split_ne)?);
            let mut out = Vec::new();
            for a in &l {
                for b in &r {
                    let c = a.union(b);
                    if !c.has_trivially_false() && !out.contains(&c) {
                        out.push(c);
                    }
                }
            }
            Ok(out)
        }
        Expr::Or(l, r) => {
            let mut out = dnf(l, split_ne)?;
            for c in dnf(r, split_ne)? {
                if !out.contains(&c) {
                    out.push(c);
                }
            }
            Ok(out)
        }
        Expr::Not(_) => unreachable!("negations pushed to atoms"),
        other => Err(SolverError::NotArithmetic(other.to_string())),
    }
}

/// Disjunctive normal form of a linear condition.
///
/// Strict comparisons are tightened to `≤` over the integers, `!=` splits
/// into two branches, and branches containing a trivially false atom are
/// dropped (an empty result means the condition is unsatisfiable).
pub fn normalize_condition(cond: &Expr) -> Result<Vec<Conjunction>, SolverError> {
    condition_dnf(cond, true)
}

/// Like [`normalize_condition`], but `!=` may stay a single disequality
/// atom when `split_ne` is false.
pub fn condition_dnf(cond: &Expr, split_ne: bool) -> Result<Vec<Conjunction>, SolverError> {
    let pushed = push_negations(cond);
    let mut out = dnf(&pushed, split_ne)?;
    out.retain(|c| !c.has_trivially_false());
    Ok(out)
}
