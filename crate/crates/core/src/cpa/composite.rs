use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::{AnyPrecision, AnyState, Cpa, DynCpa, ReachedView};
use crate::frontend::{CfaEdge, LocationId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompositionError {
    #[error("no analyses to compose")]
    Empty,
    #[error("the location analysis is missing")]
    MissingLocation,
    #[error("the location analysis must come first")]
    LocationNotFirst,
    #[error("more than one analysis tracks the location")]
    DuplicateLocation,
}

/// Tuple of component states, aligned with the composite's analyses.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct CompositeState(Arc<[AnyState]>);

impl CompositeState {
    pub fn new(components: Vec<AnyState>) -> Self {
        CompositeState(components.into())
    }

    pub fn components(&self) -> &[AnyState] {
        &self.0
    }

    pub fn component(&self, i: usize) -> &AnyState {
        &self.0[i]
    }
}

impl fmt::Display for CompositeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Tuple of component precisions.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CompositePrecision(Arc<[AnyPrecision]>);

impl CompositePrecision {
    pub fn new(components: Vec<AnyPrecision>) -> Self {
        CompositePrecision(components.into())
    }

    pub fn components(&self) -> &[AnyPrecision] {
        &self.0
    }

    pub fn component(&self, i: usize) -> &AnyPrecision {
        &self.0[i]
    }

    /// Copy with component `i` replaced.
    pub fn with_component(&self, i: usize, p: AnyPrecision) -> Self {
        let mut v = self.0.to_vec();
        v[i] = p;
        CompositePrecision::new(v)
    }
}

/// Product of several analyses. The first component tracks the location.
pub struct CompositeCpa {
    components: Vec<Box<dyn DynCpa>>,
    name: String,
}

/// Combines analyses into one; the location analysis must be first and
/// appear exactly once.
pub fn compose(components: Vec<Box<dyn DynCpa>>) -> Result<CompositeCpa, CompositionError> {
    if components.is_empty() {
        return Err(CompositionError::Empty);
    }
    let trackers: Vec<usize> = (0..components.len()).filter(|&i| components[i].tracks_location()).collect();
    match trackers.as_slice() {
        [] => return Err(CompositionError::MissingLocation),
        [0] => {}
        [_] => return Err(CompositionError::LocationNotFirst),
        _ => return Err(CompositionError::DuplicateLocation),
    }
    let name = components.iter().map(|c| c.name().to_string()).collect::<Vec<_>>().join(",");
    Ok(CompositeCpa { components, name })
}

impl CompositeCpa {
    pub fn components(&self) -> &[Box<dyn DynCpa>] {
        &self.components
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.components.iter().position(|c| c.name() == name)
    }

    pub fn location(&self, s: &CompositeState) -> LocationId {
        self.components[0]
            .location_of(s.component(0))
            .expect("first component tracks the location")
    }
}

impl Cpa for CompositeCpa {
    type State = CompositeState;
    type Precision = CompositePrecision;

    fn name(&self) -> &str {
        &self.name
    }

    fn initial_state(&self, entry: LocationId) -> CompositeState {
        CompositeState::new(self.components.iter().map(|c| c.initial_state(entry)).collect())
    }

    fn initial_precision(&self) -> CompositePrecision {
        CompositePrecision::new(self.components.iter().map(|c| c.initial_precision()).collect())
    }

    fn is_bottom(&self, s: &CompositeState) -> bool {
        self.components.iter().zip(s.components()).any(|(c, x)| c.is_bottom(x))
    }

    fn less_or_equal(&self, a: &CompositeState, b: &CompositeState) -> bool {
        Cpa::is_bottom(self, a)
            || self
                .components
                .iter()
                .zip(a.components().iter().zip(b.components()))
                .all(|(c, (x, y))| c.less_or_equal(x, y))
    }

    fn join(&self, a: &CompositeState, b: &CompositeState) -> CompositeState {
        // a state with any bottom component is bottom as a whole
        if Cpa::is_bottom(self, a) {
            return b.clone();
        }
        if Cpa::is_bottom(self, b) {
            return a.clone();
        }
        CompositeState::new(
            self.components
                .iter()
                .zip(a.components().iter().zip(b.components()))
                .map(|(c, (x, y))| c.join(x, y))
                .collect(),
        )
    }

    fn transfer(&self, s: &CompositeState, edge: &CfaEdge, prec: &CompositePrecision) -> Vec<CompositeState> {
        let mut partial: Vec<Vec<AnyState>> = vec![Vec::with_capacity(self.components.len())];
        for (i, c) in self.components.iter().enumerate() {
            let succ: Vec<AnyState> = c
                .transfer(s.component(i), edge, prec.component(i))
                .into_iter()
                .filter(|x| !c.is_bottom(x))
                .collect();
            if succ.is_empty() {
                return Vec::new();
            }
            let mut next = Vec::with_capacity(partial.len() * succ.len());
            for p in &partial {
                for x in &succ {
                    let mut q = p.clone();
                    q.push(x.clone());
                    next.push(q);
                }
            }
            partial = next;
        }
        partial.into_iter().map(CompositeState::new).collect()
    }

    fn merge(&self, s1: &CompositeState, s2: &CompositeState, prec: &CompositePrecision) -> CompositeState {
        if self.location(s1) != self.location(s2) {
            return s2.clone();
        }
        let merged: Vec<AnyState> = self
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| c.merge(s1.component(i), s2.component(i), prec.component(i)))
            .collect();
        if merged.as_slice() == s2.components() {
            s2.clone()
        } else {
            CompositeState::new(merged)
        }
    }

    fn stop(&self, s: &CompositeState, reached: &[&CompositeState], prec: &CompositePrecision) -> bool {
        let loc = self.location(s);
        reached.iter().filter(|r| self.location(r) == loc).any(|r| {
            self.components
                .iter()
                .enumerate()
                .all(|(i, c)| c.stop(s.component(i), &[r.component(i)], prec.component(i)))
        })
    }

    fn prec(&self, s: &CompositeState, prec: &CompositePrecision, view: &ReachedView) -> (CompositeState, CompositePrecision) {
        let mut states = Vec::with_capacity(self.components.len());
        let mut precs = Vec::with_capacity(self.components.len());
        for (i, c) in self.components.iter().enumerate() {
            let (x, p) = c.prec(s.component(i), prec.component(i), view);
            states.push(x);
            precs.push(p);
        }
        let s2 = if states.as_slice() == s.components() { s.clone() } else { CompositeState::new(states) };
        let p2 = if precs.as_slice() == prec.components() { prec.clone() } else { CompositePrecision::new(precs) };
        (s2, p2)
    }

    fn location_of(&self, s: &CompositeState) -> Option<LocationId> {
        Some(self.location(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{LocationCpa, PredicateCpa, PredicateState};
    use crate::solver::Solver;

    fn product() -> CompositeCpa {
        compose(vec![Box::new(LocationCpa), Box::new(PredicateCpa::standalone(Solver::default()))]).unwrap()
    }

    fn state(p: PredicateState) -> CompositeState {
        let loc = Cpa::initial_state(&LocationCpa, LocationId(0));
        CompositeState::new(vec![AnyState::new(loc), AnyState::new(p)])
    }

    #[test]
    fn location_must_lead() {
        let pred = || Box::new(PredicateCpa::standalone(Solver::default())) as Box<dyn DynCpa>;
        assert_eq!(compose(vec![]).err(), Some(CompositionError::Empty));
        assert_eq!(compose(vec![pred()]).err(), Some(CompositionError::MissingLocation));
        assert_eq!(compose(vec![pred(), Box::new(LocationCpa)]).err(), Some(CompositionError::LocationNotFirst));
        let twice = compose(vec![Box::new(LocationCpa), Box::new(LocationCpa)]);
        assert_eq!(twice.err(), Some(CompositionError::DuplicateLocation));
    }

    #[test]
    fn bottom_is_neutral_for_join() {
        let cpa = product();
        let (bot, top) = (state(PredicateState::Bottom), state(PredicateState::top()));
        assert!(Cpa::is_bottom(&cpa, &bot));
        assert_eq!(Cpa::join(&cpa, &bot, &top), top);
        assert_eq!(Cpa::join(&cpa, &top, &bot), top);
        assert!(Cpa::less_or_equal(&cpa, &bot, &top) && !Cpa::less_or_equal(&cpa, &top, &bot));
    }
}
