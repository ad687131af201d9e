use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write;
use std::time::Instant;

use crate::config::WaitlistOrder;
use crate::cpa::{Cpa, ReachedView};
use crate::frontend::{CfaEdge, LocationId, Program};

/// Why a reachability run stopped early.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Limit {
    Pops(usize),
    Time,
}

impl std::fmt::Display for Limit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Limit::Pops(n) => write!(f, "waitlist pop limit ({n}) exceeded"),
            Limit::Time => write!(f, "time limit exceeded"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReachOptions {
    pub order: WaitlistOrder,
    pub max_pops: usize,
    pub deadline: Option<Instant>,
    /// Re-check graph well-formedness after every pop (slow).
    pub check_invariants: bool,
}

impl Default for ReachOptions {
    fn default() -> Self {
        ReachOptions {
            order: WaitlistOrder::Bfs,
            max_pops: 1_000_000,
            deadline: None,
            check_invariants: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArgNode<S, P> {
    pub state: S,
    pub precision: P,
    pub location: LocationId,
    pub parent: Option<(usize, CfaEdge)>,
    /// Reached node that made this one redundant.
    pub covered_by: Option<usize>,
}

/// Abstract reachability graph. Node 0 is the root; parents always have
/// smaller ids than their children.
#[derive(Debug, Clone)]
pub struct Arg<S, P> {
    nodes: Vec<ArgNode<S, P>>,
}

impl<S, P> Arg<S, P> {
    pub fn nodes(&self) -> &[ArgNode<S, P>] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &ArgNode<S, P> {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes that are part of the reached set.
    pub fn reached(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].covered_by.is_none())
    }

    /// Edges from the root to `node`, with the node ids along the way.
    pub fn path_to(&self, node: usize) -> (Vec<CfaEdge>, Vec<usize>) {
        let mut edges = Vec::new();
        let mut ids = vec![node];
        let mut cur = node;
        while let Some((p, e)) = &self.nodes[cur].parent {
            edges.push(e.clone());
            ids.push(*p);
            cur = *p;
        }
        edges.reverse();
        ids.reverse();
        (edges, ids)
    }

    /// Structural invariants: parents precede children, covering nodes are
    /// reached, and only the root lacks a parent.
    pub fn check_well_formed(&self) -> Result<(), String> {
        for (i, n) in self.nodes.iter().enumerate() {
            match &n.parent {
                None if i != 0 => return Err(format!("node {i} has no parent")),
                Some((p, _)) if *p >= i => return Err(format!("node {i} has parent {p} out of order")),
                Some((p, e)) if self.nodes[*p].location != e.source || n.location != e.target => {
                    return Err(format!("node {i}: edge {e} does not connect its endpoints"))
                }
                _ => {}
            }
            if let Some(c) = n.covered_by {
                if self.nodes[c].covered_by.is_some() {
                    return Err(format!("node {i} covered by non-reached node {c}"));
                }
            }
        }
        Ok(())
    }
}

impl<S: std::fmt::Display, P> Arg<S, P> {
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph arg {\n  node [shape=box];\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let label = format!("{i} @ {}\\n{}", n.location, n.state).replace('"', "\\\"");
            let style = if n.covered_by.is_some() { ", style=dashed" } else { "" };
            writeln!(out, "  a{i} [label=\"{label}\"{style}];").unwrap();
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some((p, e)) = &n.parent {
                let label = e.op.to_string().replace('"', "\\\"");
                writeln!(out, "  a{p} -> a{i} [label=\"{label}\"];").unwrap();
            }
            if let Some(c) = n.covered_by {
                writeln!(out, "  a{i} -> a{c} [style=dotted];").unwrap();
            }
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReachOutcome {
    /// Waitlist exhausted without reaching an error location.
    Completed,
    /// The given ARG node sits at an error location.
    ErrorReached(usize),
    LimitExceeded(Limit),
}

#[derive(Debug, Clone)]
pub struct ReachResult<S, P> {
    pub arg: Arg<S, P>,
    pub outcome: ReachOutcome,
    pub pops: usize,
}

impl<S, P> ReachResult<S, P> {
    pub fn reached_count(&self) -> usize {
        self.arg.reached().count()
    }
}

struct Waitlist {
    order: WaitlistOrder,
    items: VecDeque<usize>,
}

impl Waitlist {
    fn push(&mut self, id: usize) {
        self.items.push_back(id);
    }

    fn pop(&mut self) -> Option<usize> {
        match self.order {
            WaitlistOrder::Bfs => self.items.pop_front(),
            WaitlistOrder::Dfs => self.items.pop_back(),
        }
    }
}

/// Worklist reachability with transfer, precision adjustment, merge and
/// stop. Returns as soon as a state at an error location is produced.
pub fn run_cpa_plus<C: Cpa>(
    cpa: &C,
    program: &Program,
    initial_state: C::State,
    initial_precision: C::Precision,
    opts: &ReachOptions,
) -> ReachResult<C::State, C::Precision> {
    let loc_of = |s: &C::State| cpa.location_of(s).expect("composite tracks the location");
    let root_loc = loc_of(&initial_state);
    let mut arg = Arg {
        nodes: vec![ArgNode {
            state: initial_state,
            precision: initial_precision,
            location: root_loc,
            parent: None,
            covered_by: None,
        }],
    };
    let done = |arg: Arg<C::State, C::Precision>, outcome, pops| ReachResult { arg, outcome, pops };
    if program.is_error(root_loc) {
        return done(arg, ReachOutcome::ErrorReached(0), 0);
    }
    let mut by_location: BTreeMap<LocationId, Vec<usize>> = BTreeMap::from([(root_loc, vec![0])]);
    let mut waitlist = Waitlist {
        order: opts.order,
        items: VecDeque::from([0]),
    };
    let mut pops = 0usize;
    while let Some(id) = waitlist.pop() {
        if pops >= opts.max_pops {
            return done(arg, ReachOutcome::LimitExceeded(Limit::Pops(opts.max_pops)), pops);
        }
        if opts.deadline.is_some_and(|d| Instant::now() >= d) {
            return done(arg, ReachOutcome::LimitExceeded(Limit::Time), pops);
        }
        pops += 1;
        let (state, prec, loc) = {
            let n = &arg.nodes[id];
            (n.state.clone(), n.precision.clone(), n.location)
        };
        for edge in program.outgoing(loc) {
            for succ in cpa.transfer(&state, edge, &prec) {
                if cpa.is_bottom(&succ) {
                    continue;
                }
                let succ_loc = loc_of(&succ);
                let peers = by_location.entry(succ_loc).or_default();
                let view = ReachedView {
                    location: succ_loc,
                    reached_at_location: peers.len(),
                };
                let (succ, succ_prec) = cpa.prec(&succ, &prec, &view);
                let new_id = arg.nodes.len();
                if program.is_error(succ_loc) {
                    arg.nodes.push(ArgNode {
                        state: succ,
                        precision: succ_prec,
                        location: succ_loc,
                        parent: Some((id, edge.clone())),
                        covered_by: None,
                    });
                    return done(arg, ReachOutcome::ErrorReached(new_id), pops);
                }
                for &other in peers.iter() {
                    let old = &arg.nodes[other].state;
                    let merged = cpa.merge(&succ, old, &succ_prec);
                    if &merged != old {
                        arg.nodes[other].state = merged;
                        waitlist.push(other);
                    }
                }
                let reached_here: Vec<&C::State> = peers.iter().map(|&o| &arg.nodes[o].state).collect();
                let covered = cpa.stop(&succ, &reached_here, &succ_prec);
                let covering = if covered {
                    peers
                        .iter()
                        .copied()
                        .find(|&o| cpa.stop(&succ, &[&arg.nodes[o].state], &succ_prec))
                        .or(peers.first().copied())
                } else {
                    None
                };
                arg.nodes.push(ArgNode {
                    state: succ,
                    precision: succ_prec,
                    location: succ_loc,
                    parent: Some((id, edge.clone())),
                    covered_by: covering,
                });
                if covering.is_none() {
                    peers.push(new_id);
                    waitlist.push(new_id);
                }
            }
        }
        if opts.check_invariants {
            if let Err(e) = arg.check_well_formed() {
                panic!("malformed reachability graph: {e}");
            }
            for &w in &waitlist.items {
                assert!(arg.nodes[w].covered_by.is_none(), "waitlist entry {w} is not reached");
            }
        }
    }
    done(arg, ReachOutcome::Completed, pops)
}
