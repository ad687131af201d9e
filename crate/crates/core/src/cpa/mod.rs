//! The analysis interface: abstract domain, transfer, merge, stop and
//! precision adjustment, plus type-erased composition.

mod composite;
mod erased;
mod registry;

use std::fmt::{Debug, Display};
use std::hash::Hash;

use crate::frontend::{CfaEdge, LocationId};

pub use composite::{compose, CompositeCpa, CompositePrecision, CompositeState, CompositionError};
pub use erased::{AnyPrecision, AnyState, DynCpa};
pub use registry::{CpaContext, CpaFactory, CpaRegistry, RegistryError};

/// Bounds required of abstract states.
pub trait StateValue: Clone + Eq + Hash + Debug + Display + Send + Sync + 'static {}
impl<T: Clone + Eq + Hash + Debug + Display + Send + Sync + 'static> StateValue for T {}

/// Bounds required of precisions.
pub trait PrecisionValue: Clone + Eq + Debug + Send + Sync + 'static {}
impl<T: Clone + Eq + Debug + Send + Sync + 'static> PrecisionValue for T {}

/// What precision adjustment may look at besides the state itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReachedView {
    /// Program location of the state being adjusted.
    pub location: LocationId,
    /// Number of reached states already recorded at that location.
    pub reached_at_location: usize,
}

/// A configurable program analysis.
///
/// Implementations must be pure: every operation depends only on its
/// arguments and the analysis' immutable configuration.
pub trait Cpa: Send + Sync {
    type State: StateValue;
    type Precision: PrecisionValue;

    fn name(&self) -> &str;

    fn initial_state(&self, entry: LocationId) -> Self::State;

    fn initial_precision(&self) -> Self::Precision;

    fn is_bottom(&self, _s: &Self::State) -> bool {
        false
    }

    /// Partial order; `a ⊑ b` means `b` is at least as abstract.
    fn less_or_equal(&self, a: &Self::State, b: &Self::State) -> bool;

    fn join(&self, a: &Self::State, b: &Self::State) -> Self::State;

    /// Abstract successors along `edge`. An empty result means the edge is
    /// infeasible from `s`.
    fn transfer(&self, s: &Self::State, edge: &CfaEdge, prec: &Self::Precision) -> Vec<Self::State>;

    /// Must return something at least as abstract as `s2`.
    fn merge(&self, s1: &Self::State, s2: &Self::State, _prec: &Self::Precision) -> Self::State {
        merge_sep(s1, s2)
    }

    fn stop(&self, s: &Self::State, reached: &[&Self::State], _prec: &Self::Precision) -> bool {
        stop_sep(s, reached, |a, b| self.less_or_equal(a, b))
    }

    fn prec(&self, s: &Self::State, prec: &Self::Precision, _view: &ReachedView) -> (Self::State, Self::Precision) {
        (s.clone(), prec.clone())
    }

    /// Program location, for the one analysis that tracks it.
    fn location_of(&self, _s: &Self::State) -> Option<LocationId> {
        None
    }
}

/// Never combines: returns the reached state unchanged.
pub fn merge_sep<S: Clone>(_s1: &S, s2: &S) -> S {
    s2.clone()
}

/// Joins the new state into the reached one.
pub fn merge_join<C: Cpa + ?Sized>(cpa: &C, s1: &C::State, s2: &C::State) -> C::State {
    cpa.join(s1, s2)
}

/// Covered iff some reached state is at least as abstract.
pub fn stop_sep<S>(s: &S, reached: &[&S], le: impl Fn(&S, &S) -> bool) -> bool {
    reached.iter().any(|r| le(s, r))
}
