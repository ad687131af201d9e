use std::any::Any;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use super::{Cpa, PrecisionValue, ReachedView, StateValue};
use crate::frontend::{CfaEdge, LocationId};

trait ErasedState: Send + Sync {
    fn as_any(&self) -> &dyn Any;
    fn eq_dyn(&self, other: &dyn ErasedState) -> bool;
    fn hash_dyn(&self, h: &mut dyn Hasher);
    fn debug(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result;
    fn display(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result;
}

impl<T: StateValue> ErasedState for T {
    fn as_any(&self) -> &dyn Any {
        self
    }
    fn eq_dyn(&self, other: &dyn ErasedState) -> bool {
        other.as_any().downcast_ref::<T>() == Some(self)
    }
    fn hash_dyn(&self, mut h: &mut dyn Hasher) {
        self.hash(&mut h)
    }
    fn debug(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
    fn display(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// An abstract state of some analysis, with its concrete type erased.
#[derive(Clone)]
pub struct AnyState(Arc<dyn ErasedState>);

impl AnyState {
    pub fn new<T: StateValue>(s: T) -> Self {
        AnyState(Arc::new(s))
    }

    pub fn downcast<T: StateValue>(&self) -> Option<&T> {
        self.0.as_any().downcast_ref()
    }
}

impl PartialEq for AnyState {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.eq_dyn(&*other.0)
    }
}
impl Eq for AnyState {}

impl Hash for AnyState {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.hash_dyn(state)
    }
}

impl fmt::Debug for AnyState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.debug(f)
    }
}

impl fmt::Display for AnyState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.display(f)
    }
}

trait ErasedPrecision: Send + Sync {
    fn as_any(&self) -> &dyn Any;
    fn eq_dyn(&self, other: &dyn ErasedPrecision) -> bool;
    fn debug(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result;
}

impl<T: PrecisionValue> ErasedPrecision for T {
    fn as_any(&self) -> &dyn Any {
        self
    }
    fn eq_dyn(&self, other: &dyn ErasedPrecision) -> bool {
        other.as_any().downcast_ref::<T>() == Some(self)
    }
    fn debug(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A precision of some analysis, with its concrete type erased.
#[derive(Clone)]
pub struct AnyPrecision(Arc<dyn ErasedPrecision>);

impl AnyPrecision {
    pub fn new<T: PrecisionValue>(p: T) -> Self {
        AnyPrecision(Arc::new(p))
    }

    pub fn downcast<T: PrecisionValue>(&self) -> Option<&T> {
        self.0.as_any().downcast_ref()
    }
}

impl PartialEq for AnyPrecision {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.eq_dyn(&*other.0)
    }
}
impl Eq for AnyPrecision {}

impl fmt::Debug for AnyPrecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.debug(f)
    }
}

/// Object-safe form of [`Cpa`], used for runtime composition.
///
/// Every `Cpa` implements it; passing a state or precision that belongs to
/// a different analysis is a programming error and panics.
pub trait DynCpa: Send + Sync {
    fn name(&self) -> &str;
    fn initial_state(&self, entry: LocationId) -> AnyState;
    fn initial_precision(&self) -> AnyPrecision;
    fn is_bottom(&self, s: &AnyState) -> bool;
    fn less_or_equal(&self, a: &AnyState, b: &AnyState) -> bool;
    fn join(&self, a: &AnyState, b: &AnyState) -> AnyState;
    fn transfer(&self, s: &AnyState, edge: &CfaEdge, prec: &AnyPrecision) -> Vec<AnyState>;
    fn merge(&self, s1: &AnyState, s2: &AnyState, prec: &AnyPrecision) -> AnyState;
    fn stop(&self, s: &AnyState, reached: &[&AnyState], prec: &AnyPrecision) -> bool;
    fn prec(&self, s: &AnyState, prec: &AnyPrecision, view: &ReachedView) -> (AnyState, AnyPrecision);
    fn location_of(&self, s: &AnyState) -> Option<LocationId>;
    /// Whether this analysis tracks the program location.
    fn tracks_location(&self) -> bool;
}

fn st<'a, C: Cpa>(cpa: &C, s: &'a AnyState) -> &'a C::State {
    s.downcast::<C::State>()
        .unwrap_or_else(|| panic!("state {s:?} does not belong to analysis `{}`", cpa.name()))
}

fn pr<'a, C: Cpa>(cpa: &C, p: &'a AnyPrecision) -> &'a C::Precision {
    p.downcast::<C::Precision>()
        .unwrap_or_else(|| panic!("precision {p:?} does not belong to analysis `{}`", cpa.name()))
}

impl<C: Cpa> DynCpa for C {
    fn name(&self) -> &str {
        Cpa::name(self)
    }
    fn initial_state(&self, entry: LocationId) -> AnyState {
        AnyState::new(Cpa::initial_state(self, entry))
    }
    fn initial_precision(&self) -> AnyPrecision {
        AnyPrecision::new(Cpa::initial_precision(self))
    }
    fn is_bottom(&self, s: &AnyState) -> bool {
        Cpa::is_bottom(self, st(self, s))
    }
    fn less_or_equal(&self, a: &AnyState, b: &AnyState) -> bool {
        Cpa::less_or_equal(self, st(self, a), st(self, b))
    }
    fn join(&self, a: &AnyState, b: &AnyState) -> AnyState {
        AnyState::new(Cpa::join(self, st(self, a), st(self, b)))
    }
    fn transfer(&self, s: &AnyState, edge: &CfaEdge, prec: &AnyPrecision) -> Vec<AnyState> {
        Cpa::transfer(self, st(self, s), edge, pr(self, prec))
            .into_iter()
            .map(AnyState::new)
            .collect()
    }
    fn merge(&self, s1: &AnyState, s2: &AnyState, prec: &AnyPrecision) -> AnyState {
        let merged = Cpa::merge(self, st(self, s1), st(self, s2), pr(self, prec));
        // keep sharing when nothing changed
        if &merged == st(self, s2) {
            s2.clone()
        } else {
            AnyState::new(merged)
        }
    }
    fn stop(&self, s: &AnyState, reached: &[&AnyState], prec: &AnyPrecision) -> bool {
        let reached: Vec<&C::State> = reached.iter().map(|r| st(self, r)).collect();
        Cpa::stop(self, st(self, s), &reached, pr(self, prec))
    }
    fn prec(&self, s: &AnyState, prec: &AnyPrecision, view: &ReachedView) -> (AnyState, AnyPrecision) {
        let (s2, p2) = Cpa::prec(self, st(self, s), pr(self, prec), view);
        let s2 = if &s2 == st(self, s) { s.clone() } else { AnyState::new(s2) };
        let p2 = if &p2 == pr(self, prec) { prec.clone() } else { AnyPrecision::new(p2) };
        (s2, p2)
    }
    fn location_of(&self, s: &AnyState) -> Option<LocationId> {
        Cpa::location_of(self, st(self, s))
    }
    fn tracks_location(&self) -> bool {
        Cpa::location_of(self, &Cpa::initial_state(self, LocationId(0))).is_some()
    }
}
