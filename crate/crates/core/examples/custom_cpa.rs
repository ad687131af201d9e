//! A user-defined analysis plugged in by name. The sign analysis below
//! tracks whether variables are negative, zero or positive and prunes
//! assume edges whose comparison against zero it can decide.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use minicpa::analysis::verify_with;
use minicpa::config::Config;
use minicpa::cpa::{Cpa, CpaRegistry};
use minicpa::frontend::{parse, ArithOp, CfaEdge, CmpOp, EdgeOp, Expr, LocationId};
use num_traits::{Signed, Zero};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Sign {
    Neg,
    Zero,
    Pos,
}

/// Known signs; a missing variable may have any sign. `None` is bottom.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Signs(Option<BTreeMap<String, Sign>>);

impl fmt::Display for Signs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            None => write!(f, "⊥"),
            Some(m) => write!(f, "{m:?}"),
        }
    }
}

struct SignCpa;

fn sign_of(e: &Expr, m: &BTreeMap<String, Sign>) -> Option<Sign> {
    match e {
        Expr::Int(v) if v.is_negative() => Some(Sign::Neg),
        Expr::Int(v) if v.is_positive() => Some(Sign::Pos),
        Expr::Int(_) => Some(Sign::Zero),
        Expr::Var(v) => m.get(v).copied(),
        Expr::Arith(ArithOp::Add, l, r) => add(sign_of(l, m)?, sign_of(r, m)?),
        Expr::Arith(ArithOp::Sub, l, r) => add(sign_of(l, m)?, flip(sign_of(r, m)?)),
        _ => None,
    }
}

fn flip(s: Sign) -> Sign {
    match s {
        Sign::Neg => Sign::Pos,
        Sign::Zero => Sign::Zero,
        Sign::Pos => Sign::Neg,
    }
}

fn add(a: Sign, b: Sign) -> Option<Sign> {
    match (a, b) {
        (Sign::Zero, s) | (s, Sign::Zero) => Some(s),
        (a, b) if a == b => Some(a),
        _ => None,
    }
}

/// `Some(false)` when `var op 0` cannot hold.
fn decide(op: CmpOp, s: Sign) -> Option<bool> {
    let ord = match s {
        Sign::Neg => std::cmp::Ordering::Less,
        Sign::Zero => std::cmp::Ordering::Equal,
        Sign::Pos => std::cmp::Ordering::Greater,
    };
    match (op, s) {
        (CmpOp::Eq | CmpOp::Ne, Sign::Zero) | (CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge, _) => Some(op.holds(ord)),
        (CmpOp::Eq, _) => Some(false),
        (CmpOp::Ne, _) => Some(true),
    }
}

impl Cpa for SignCpa {
    type State = Signs;
    type Precision = ();

    fn name(&self) -> &str {
        "sign"
    }
    fn initial_state(&self, _entry: LocationId) -> Signs {
        Signs(Some(BTreeMap::new()))
    }
    fn initial_precision(&self) {}
    fn is_bottom(&self, s: &Signs) -> bool {
        s.0.is_none()
    }
    fn less_or_equal(&self, a: &Signs, b: &Signs) -> bool {
        match (&a.0, &b.0) {
            (None, _) => true,
            (_, None) => false,
            (Some(a), Some(b)) => b.iter().all(|(k, v)| a.get(k) == Some(v)),
        }
    }
    fn join(&self, a: &Signs, b: &Signs) -> Signs {
        match (&a.0, &b.0) {
            (None, _) => b.clone(),
            (_, None) => a.clone(),
            (Some(a), Some(b)) => Signs(Some(a.iter().filter(|(k, v)| b.get(*k) == Some(v)).map(|(k, v)| (k.clone(), *v)).collect())),
        }
    }
    fn transfer(&self, s: &Signs, edge: &CfaEdge, _prec: &()) -> Vec<Signs> {
        let Some(m) = &s.0 else { return Vec::new() };
        match &edge.op {
            EdgeOp::Assign { lhs, rhs } => {
                let mut m = m.clone();
                match sign_of(rhs, &m) {
                    Some(v) => m.insert(lhs.clone(), v),
                    None => m.remove(lhs),
                };
                vec![Signs(Some(m))]
            }
            EdgeOp::Assume { cond: Expr::Cmp(op, l, r), truth } if matches!(&**r, Expr::Int(z) if z.is_zero()) => {
                let op = if *truth { *op } else { op.negated() };
                match sign_of(l, m).and_then(|v| decide(op, v)) {
                    Some(false) => Vec::new(),
                    _ => vec![s.clone()],
                }
            }
            EdgeOp::Call { .. } | EdgeOp::Return { .. } => vec![Signs(Some(BTreeMap::new()))],
            _ => vec![s.clone()],
        }
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut registry = CpaRegistry::with_defaults();
    registry.register("sign", |_| Ok(Box::new(SignCpa)))?;
    let program = Arc::new(parse(
        "void main(){ int a; int b; a = 5; b = 0 - 3; if (a < 0) { ERROR: ; } if (b >= 0) { ERROR: ; } }",
    )?);
    for cpas in ["location, callstack", "location, callstack, sign"] {
        let mut cfg = Config::parse_with(&format!("cpas = {cpas}"), &registry)?;
        cfg.limits.max_pops = 10_000;
        let report = verify_with(&registry, &program, &cfg)?;
        println!("[{cpas}] -> {} ({} states)", report.verdict, report.stats.reached);
    }
    Ok(())
}
