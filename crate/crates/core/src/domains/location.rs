use std::fmt;

use crate::cpa::Cpa;
use crate::frontend::{CfaEdge, LocationId};

/// Current program location.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocationState(pub LocationId);

impl fmt::Display for LocationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Follows CFA edges. Its states form a flat order (only equal locations
/// are comparable), so `join` is only meaningful for equal arguments.
#[derive(Debug, Default, Clone, Copy)]
pub struct LocationCpa;

impl Cpa for LocationCpa {
    type State = LocationState;
    type Precision = ();

    fn name(&self) -> &str {
        "location"
    }

    fn initial_state(&self, entry: LocationId) -> LocationState {
        LocationState(entry)
    }

    fn initial_precision(&self) {}

    fn less_or_equal(&self, a: &LocationState, b: &LocationState) -> bool {
        a == b
    }

    fn join(&self, a: &LocationState, b: &LocationState) -> LocationState {
        assert_eq!(a, b, "join of different locations");
        *a
    }

    fn transfer(&self, s: &LocationState, edge: &CfaEdge, _prec: &()) -> Vec<LocationState> {
        if edge.source == s.0 {
            vec![LocationState(edge.target)]
        } else {
            Vec::new()
        }
    }

    fn location_of(&self, s: &LocationState) -> Option<LocationId> {
        Some(s.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::EdgeOp;

    #[test]
    fn follows_edges_from_its_location() {
        let e = CfaEdge {
            source: LocationId(1),
            target: LocationId(2),
            op: EdgeOp::Skip,
        };
        assert_eq!(LocationCpa.transfer(&LocationState(LocationId(1)), &e, &()), vec![LocationState(LocationId(2))]);
        assert!(LocationCpa.transfer(&LocationState(LocationId(3)), &e, &()).is_empty());
    }
}
