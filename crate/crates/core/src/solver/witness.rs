//! Bounded integer model search.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use super::linear::{Conjunction, LinearConstraint, Model};
use super::SolverError;

/// Largest box volume `integer_witness` will enumerate.
pub const MAX_BOX_VOLUME: u64 = 10_000_000;

/// Inclusive integer bounds per variable.
pub type IntBox = BTreeMap<String, (BigInt, BigInt)>;

/// Searches `box_` for an integer point satisfying `c`.
///
/// Every variable of `c` must be bounded by the box. Constraints are
/// checked as soon as all their variables are assigned, which prunes the
/// depth-first enumeration early.
pub fn integer_witness(c: &Conjunction, box_: &IntBox) -> Result<Option<Model>, SolverError> {
    let vars: Vec<String> = c.vars().into_iter().collect();
    let mut volume: u64 = 1;
    for v in &vars {
        let (lo, hi) = box_.get(v).ok_or_else(|| SolverError::Unbounded(v.clone()))?;
        let width = if hi < lo {
            0
        } else {
            (hi - lo + BigInt::one()).to_u64().unwrap_or(u64::MAX)
        };
        volume = volume.saturating_mul(width);
    }
    if volume > MAX_BOX_VOLUME {
        return Err(SolverError::BoxTooLarge { volume });
    }
    if volume == 0 {
        return Ok(None);
    }
    // bucket each constraint by the position of its last variable
    let index: BTreeMap<&String, usize> = vars.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut ready: Vec<Vec<&LinearConstraint>> = vec![Vec::new(); vars.len().max(1)];
    for k in c.iter() {
        if k.is_trivially_false() {
            return Ok(None);
        }
        let last = k.vars().map(|v| index[v]).max().unwrap_or(0);
        ready[last].push(k);
    }
    let mut model = Model::new();
    if vars.is_empty() {
        return Ok(Some(model));
    }
    if search(0, &vars, box_, &ready, &mut model) {
        Ok(Some(model))
    } else {
        Ok(None)
    }
}

fn search(depth: usize, vars: &[String], box_: &IntBox, ready: &[Vec<&LinearConstraint>], model: &mut Model) -> bool {
    if depth == vars.len() {
        return true;
    }
    let v = &vars[depth];
    let (lo, hi) = &box_[v];
    let mut x = lo.clone();
    while &x <= hi {
        model.insert(v.clone(), BigRational::from_integer(x.clone()));
        if ready[depth].iter().all(|k| k.holds(model)) && search(depth + 1, vars, box_, ready, model) {
            return true;
        }
        x += 1;
    }
    model.remove(v);
    false
}
