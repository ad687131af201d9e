use std::fmt;
use std::sync::Arc;

use crate::cpa::Cpa;
use crate::frontend::{CfaEdge, EdgeOp, LocationId, ProgramRef};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Frame {
    pub function: String,
    /// Where control resumes in the caller; `None` for the bottom frame.
    pub return_target: Option<LocationId>,
}

/// Stack of active calls, bottom frame first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CallstackState(Arc<[Frame]>);

impl CallstackState {
    pub fn frames(&self) -> &[Frame] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for CallstackState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|fr| fr.function.as_str()).collect();
        write!(f, "[{}]", names.join(" > "))
    }
}

/// Matches returns with their call sites.
#[derive(Debug, Clone)]
pub struct CallstackCpa {
    main: String,
    max_depth: usize,
}

impl CallstackCpa {
    /// Fails if the program can nest calls deeper than `max_depth` frames.
    pub fn new(program: &ProgramRef, max_depth: usize) -> Result<Self, String> {
        let needed = program.max_call_depth();
        if needed > max_depth {
            return Err(format!("call nesting depth {needed} exceeds the configured bound {max_depth}"));
        }
        Ok(CallstackCpa {
            main: program.main_function().to_string(),
            max_depth,
        })
    }
}

impl Cpa for CallstackCpa {
    type State = CallstackState;
    type Precision = ();

    fn name(&self) -> &str {
        "callstack"
    }

    fn initial_state(&self, _entry: LocationId) -> CallstackState {
        CallstackState(Arc::new([Frame {
            function: self.main.clone(),
            return_target: None,
        }]))
    }

    fn initial_precision(&self) {}

    fn less_or_equal(&self, a: &CallstackState, b: &CallstackState) -> bool {
        a == b
    }

    fn join(&self, a: &CallstackState, b: &CallstackState) -> CallstackState {
        assert_eq!(a, b, "join of different call stacks");
        a.clone()
    }

    fn transfer(&self, s: &CallstackState, edge: &CfaEdge, _prec: &()) -> Vec<CallstackState> {
        match &edge.op {
            EdgeOp::Call { callee, return_target, .. } => {
                assert!(s.depth() < self.max_depth, "call depth bound checked at construction");
                let mut frames = s.0.to_vec();
                frames.push(Frame {
                    function: callee.clone(),
                    return_target: Some(*return_target),
                });
                vec![CallstackState(frames.into())]
            }
            EdgeOp::Return { .. } => match s.0.last() {
                Some(top) if top.return_target == Some(edge.target) => {
                    vec![CallstackState(s.0[..s.0.len() - 1].into())]
                }
                _ => Vec::new(),
            },
            _ => vec![s.clone()],
        }
    }
}
