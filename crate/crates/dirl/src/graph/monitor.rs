//! Online trajectory monitors: safe-set membership, edge achievement, and
//! full graph satisfaction.

use super::{AbstractGraph, EdgeId, GraphError, SafeSet};
use crate::spec_lang::{Predicate, Trajectory};
use crate::types::Point;

/// Constant-state membership monitor for a safe-trajectory set.
///
/// After observing states `s_0 ... s_i`, [`SafeMonitor::accepted`] answers
/// whether that prefix belongs to the set. For the two-phase set, `holds_all`
/// tracks "the first predicate has held at every state so far" and
/// `holds_split` tracks "some valid split exists and the second predicate has
/// held since"; membership of the prefix is exactly `holds_split`.
#[derive(Debug, Clone)]
pub enum SafeMonitor<'a> {
    Always {
        b: &'a Predicate,
        ok: bool,
    },
    Concat {
        first: &'a Predicate,
        second: &'a Predicate,
        holds_all: bool,
        holds_split: bool,
    },
}

impl<'a> SafeMonitor<'a> {
    /// Starts the monitor on the first state of a trajectory.
    pub fn new(safe: &'a SafeSet, s0: Point) -> Self {
        match safe {
            SafeSet::Always(b) => SafeMonitor::Always { b, ok: b.eval_bool(s0) },
            SafeSet::Concat(first, second) => SafeMonitor::Concat {
                first,
                second,
                holds_all: first.eval_bool(s0),
                // No split index exists within a single state.
                holds_split: false,
            },
        }
    }

    /// Feeds the next state.
    pub fn observe(&mut self, s: Point) {
        match self {
            SafeMonitor::Always { b, ok } => *ok = *ok && b.eval_bool(s),
            SafeMonitor::Concat { first, second, holds_all, holds_split } => {
                // The split may sit just before this state (prefix fully in
                // the first phase) or earlier (already in the second phase).
                *holds_split = second.eval_bool(s) && (*holds_all || *holds_split);
                *holds_all = *holds_all && first.eval_bool(s);
            }
        }
    }

    /// Does the observed prefix belong to the set?
    pub fn accepted(&self) -> bool {
        match self {
            SafeMonitor::Always { ok, .. } => *ok,
            SafeMonitor::Concat { holds_split, .. } => *holds_split,
        }
    }
}

/// Membership of a whole trajectory in a safe set (linear time).
pub fn safe_membership(safe: &SafeSet, traj: &Trajectory) -> bool {
    let states = traj.states();
    let mut mon = SafeMonitor::new(safe, states[0]);
    for &s in &states[1..] {
        mon.observe(s);
    }
    mon.accepted()
}

/// Online detector for edge achievement.
///
/// An edge `u -> u'` is achieved at the smallest index `i` such that the
/// state at `i` lies in the target region and the prefix up to `i` belongs to
/// the edge's safe set; `i = 0` qualifies only when `u` is the graph's
/// initial vertex.
#[derive(Debug, Clone)]
pub struct EdgeTracker<'a> {
    target: &'a Predicate,
    monitor: SafeMonitor<'a>,
    index: usize,
    achieved: Option<usize>,
}

impl<'a> EdgeTracker<'a> {
    /// Starts tracking from the first state of a rollout.
    ///
    /// Fails if the start state is not in the source vertex's region.
    pub fn start(g: &'a AbstractGraph, e: EdgeId, s0: Point) -> Result<Self, GraphError> {
        let edge = g.edge(e);
        if !g.beta(edge.from).eval_bool(s0) {
            return Err(GraphError::EdgePrecondition { edge: e, vertex: edge.from });
        }
        Ok(Self::start_unchecked(g, e, s0))
    }

    /// Starts tracking without the source-region check. Used where the start
    /// state is in the region by construction (e.g. it was produced by a
    /// previous edge achievement).
    pub(crate) fn start_unchecked(g: &'a AbstractGraph, e: EdgeId, s0: Point) -> Self {
        let edge = g.edge(e);
        let target = g.beta(edge.to);
        let monitor = SafeMonitor::new(&edge.safe, s0);
        let mut tracker = EdgeTracker { target, monitor, index: 0, achieved: None };
        if edge.from == g.initial() && target.eval_bool(s0) && tracker.monitor.accepted() {
            tracker.achieved = Some(0);
        }
        tracker
    }

    /// Feeds the next state; returns `Some(i)` the first time the edge
    /// becomes achieved.
    pub fn observe(&mut self, s: Point) -> Option<usize> {
        self.index += 1;
        self.monitor.observe(s);
        if self.achieved.is_none() && self.target.eval_bool(s) && self.monitor.accepted() {
            self.achieved = Some(self.index);
            return self.achieved;
        }
        None
    }

    pub fn achieved(&self) -> Option<usize> {
        self.achieved
    }
}

/// Smallest index at which the trajectory achieves the edge, or `None`.
///
/// Errors if the trajectory does not start in the edge's source region.
pub fn achieves_edge(
    traj: &Trajectory,
    e: EdgeId,
    g: &AbstractGraph,
) -> Result<Option<usize>, GraphError> {
    let states = traj.states();
    let mut tracker = EdgeTracker::start(g, e, states[0])?;
    if tracker.achieved().is_some() {
        return Ok(tracker.achieved());
    }
    for &s in &states[1..] {
        if tracker.observe(s).is_some() {
            break;
        }
    }
    Ok(tracker.achieved())
}

/// Decides finite-trajectory satisfaction of the graph (with its terminal
/// sets).
///
/// Searches for indices `0 = i_0 <= i_1 < ... < i_k <= t` and a path
/// `u_0 -> ... -> u_k` into a final vertex such that each state `s_{i_j}`
/// lies in the region of `u_j`, each subtrajectory between consecutive
/// indices belongs to the edge's safe set, and the suffix from `i_k` stays in
/// the final vertex's terminal set. Implemented as dynamic programming over
/// (vertex, index) pairs in topological order.
pub fn satisfies_graph(traj: &Trajectory, g: &AbstractGraph) -> bool {
    let states = traj.states();
    let t = states.len() - 1;
    let u0 = g.initial();
    if !g.beta(u0).eval_bool(states[0]) {
        return false;
    }

    // Suffix check per final vertex: all of s_i..s_t satisfy the terminal
    // predicate.
    let mut term_ok: std::collections::BTreeMap<usize, Vec<bool>> = std::collections::BTreeMap::new();
    for &f in g.finals() {
        let p = g.terminal_predicate(f).expect("final vertex has a terminal set");
        let mut ok = vec![false; t + 1];
        let mut all = true;
        for i in (0..=t).rev() {
            all = all && p.eval_bool(states[i]);
            ok[i] = all;
        }
        term_ok.insert(f, ok);
    }

    let n = g.vertex_count();
    let mut reach = vec![vec![false; t + 1]; n];
    reach[u0][0] = true;

    for &u in g.topo_order() {
        for i in 0..=t {
            if !reach[u][i] {
                continue;
            }
            if g.is_final(u) && term_ok[&u][i] {
                return true;
            }
            for &eid in g.outgoing(u) {
                let edge = g.edge(eid);
                let mut mon = SafeMonitor::new(&edge.safe, states[i]);
                // The arrival index must be strictly greater than the hop
                // index except for the very first hop out of the initial
                // vertex, where it may coincide with index 0.
                if u == u0 && i == 0 && g.beta(edge.to).eval_bool(states[0]) && mon.accepted() {
                    reach[edge.to][0] = true;
                }
                for j in i + 1..=t {
                    mon.observe(states[j]);
                    if g.beta(edge.to).eval_bool(states[j]) && mon.accepted() {
                        reach[edge.to][j] = true;
                    }
                }
            }
        }
    }
    false
}
