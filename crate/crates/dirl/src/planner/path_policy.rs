//! Stateful execution of a sequence of edge policies along a path.

use super::PlannerError;
use crate::ars::EdgePolicy;
use crate::graph::{AbstractGraph, EdgeId, EdgeTracker, GraphError, VertexId};
use crate::rooms::RoomsEnv;
use crate::spec_lang::Trajectory;
use crate::types::{Action, Point};

/// A trained policy for a path `u_0 -> ... -> u_k`: the edge ids along the
/// path and one policy per edge.
#[derive(Debug, Clone)]
pub struct PathPolicy {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<EdgeId>,
    pub policies: Vec<EdgePolicy>,
}

impl PathPolicy {
    /// Collects the trained policies along a vertex path.
    pub fn assemble(
        g: &AbstractGraph,
        vertices: &[VertexId],
        policies: &std::collections::BTreeMap<EdgeId, EdgePolicy>,
    ) -> Result<Self, PlannerError> {
        let edges = path_edges(g, vertices)?;
        let mut own = Vec::with_capacity(edges.len());
        for &e in &edges {
            own.push(policies.get(&e).ok_or(PlannerError::UntrainedEdge(e))?.clone());
        }
        Ok(PathPolicy { vertices: vertices.to_vec(), edges, policies: own })
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Edge ids along a vertex path.
pub fn path_edges(g: &AbstractGraph, vertices: &[VertexId]) -> Result<Vec<EdgeId>, PlannerError> {
    vertices
        .windows(2)
        .map(|w| g.edge_between(w[0], w[1]).ok_or(PlannerError::NoSuchEdge(w[0], w[1])))
        .collect()
}

/// One rollout's worth of execution state: the active edge index and its
/// achievement tracker. The index only ever advances, exactly when the
/// active edge first becomes achieved.
pub struct PathPolicyRun<'a> {
    g: &'a AbstractGraph,
    policy: &'a PathPolicy,
    max_speed: f64,
    current: usize,
    tracker: Option<EdgeTracker<'a>>,
    completion: Option<Point>,
}

impl<'a> PathPolicyRun<'a> {
    pub fn new(g: &'a AbstractGraph, policy: &'a PathPolicy, max_speed: f64) -> Self {
        assert!(!policy.is_empty(), "path policy needs at least one edge");
        PathPolicyRun { g, policy, max_speed, current: 0, tracker: None, completion: None }
    }

    /// Observes the initial state. The first edge may be achieved
    /// immediately when the start state already lies in its target region.
    pub fn start(&mut self, s0: Point) -> Result<(), GraphError> {
        let tracker = EdgeTracker::start(self.g, self.policy.edges[0], s0)?;
        let achieved = tracker.achieved().is_some();
        self.tracker = Some(tracker);
        if achieved {
            self.advance(s0);
        }
        Ok(())
    }

    /// Action of the active edge's policy (the last edge's policy once the
    /// path is complete).
    pub fn act(&self, s: Point) -> Action {
        let idx = self.current.min(self.policy.len() - 1);
        self.policy.policies[idx].act(s, self.max_speed)
    }

    /// Observes the next state, advancing past any edge achieved at it.
    pub fn observe(&mut self, s: Point) {
        if self.completion.is_some() {
            return;
        }
        let tracker = self.tracker.as_mut().expect("start() must be called first");
        if tracker.observe(s).is_some() {
            self.advance(s);
        }
    }

    fn advance(&mut self, s: Point) {
        self.current += 1;
        if self.current < self.policy.len() {
            // The achieving state lies in the next edge's source region by
            // definition of achievement; off-initial edges cannot fire at
            // their own start index, so no cascade is possible here.
            self.tracker =
                Some(EdgeTracker::start_unchecked(self.g, self.policy.edges[self.current], s));
        } else {
            self.completion = Some(s);
            self.tracker = None;
        }
    }

    /// All edges achieved in order?
    pub fn completed(&self) -> bool {
        self.completion.is_some()
    }

    /// State at which the last edge was achieved.
    pub fn completion_state(&self) -> Option<Point> {
        self.completion
    }

    /// Index of the active edge.
    pub fn active_edge(&self) -> usize {
        self.current
    }
}

#[derive(Debug, Clone)]
pub struct PathRollout {
    pub traj: Trajectory,
    pub completed: bool,
    pub completion_state: Option<Point>,
}

/// Closed-loop execution of a path policy for at most `horizon` steps,
/// ending early once every edge has been achieved.
pub fn run_path_policy(
    env: &RoomsEnv,
    g: &AbstractGraph,
    policy: &PathPolicy,
    s0: Point,
    horizon: usize,
) -> Result<PathRollout, GraphError> {
    let mut run = PathPolicyRun::new(g, policy, env.max_speed());
    run.start(s0)?;
    let mut states = vec![s0];
    let mut actions = Vec::new();
    let mut s = s0;
    for _ in 0..horizon {
        if run.completed() {
            break;
        }
        let a = run.act(s);
        s = env.step(s, a);
        actions.push(a);
        states.push(s);
        run.observe(s);
    }
    Ok(PathRollout {
        traj: Trajectory::new(states, actions),
        completed: run.completed(),
        completion_state: run.completion_state(),
    })
}

/// Horizon used for full path-policy rollouts: one episode length per edge
/// plus a two-episode buffer.
pub fn path_horizon(episode_len: usize, path_edges: usize) -> usize {
    episode_len * path_edges + 2 * episode_len
}
