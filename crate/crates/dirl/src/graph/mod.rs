//! Abstract reachability graphs.
//!
//! A specification compiles into a DAG whose vertices carry subgoal regions
//! (predicates) and whose edges carry safe-trajectory sets. Reaching a final
//! vertex through safe subtrajectories is equivalent to satisfying the
//! specification; [`monitor`] hosts the trajectory-side checks and
//! [`compile`](compile()) the construction.

mod build;
mod monitor;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::spec_lang::{Predicate, Trajectory};

pub use build::compile;
pub use monitor::{achieves_edge, safe_membership, satisfies_graph, EdgeTracker, SafeMonitor};

pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("graph contains a cycle")]
    Cyclic,
    #[error("vertex {0} is out of range")]
    InvalidVertex(VertexId),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(VertexId, VertexId),
    #[error("graph has no final vertex")]
    NoFinals,
    #[error("initial vertex must be set")]
    NoInitial,
    #[error("edge {edge} starts at vertex {vertex}, but the trajectory does not start in its subgoal region")]
    EdgePrecondition { edge: EdgeId, vertex: VertexId },
}

/// Set of finite trajectories permitted while traversing an edge.
///
/// Compiled graphs only ever need two shapes: "every state satisfies `b`",
/// or a two-phase concatenation where `b1` holds up to some split and `b2`
/// afterwards. Restricting to these shapes keeps membership checkable by a
/// constant-state online monitor and makes intersection with a state
/// predicate exact.
#[derive(Debug, Clone, PartialEq)]
pub enum SafeSet {
    /// All states satisfy the predicate.
    Always(Predicate),
    /// Some split: the first predicate holds through index `j`, the second
    /// from `j + 1` to the end (`0 <= j < t`).
    Concat(Predicate, Predicate),
}

impl SafeSet {
    /// All trajectories are safe.
    pub fn unrestricted() -> Self {
        SafeSet::Always(Predicate::always_true())
    }

    /// Intersection with the trajectory set "every state satisfies `b`".
    pub fn intersect(&self, b: &Predicate) -> SafeSet {
        match self {
            SafeSet::Always(a) => SafeSet::Always(a.and_with(b)),
            SafeSet::Concat(p, q) => SafeSet::Concat(p.and_with(b), q.and_with(b)),
        }
    }

    /// Membership of the full trajectory; linear-time online monitor.
    pub fn contains(&self, traj: &Trajectory) -> bool {
        safe_membership(self, traj)
    }
}

impl fmt::Display for SafeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SafeSet::Always(b) => write!(f, "always[{b}]"),
            SafeSet::Concat(a, b) => write!(f, "concat[{a} ; {b}]"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub from: VertexId,
    pub to: VertexId,
    pub safe: SafeSet,
}

/// Directed acyclic graph over subgoal regions.
#[derive(Debug, Clone)]
pub struct AbstractGraph {
    beta: Vec<Predicate>,
    edges: Vec<Edge>,
    outgoing: Vec<Vec<EdgeId>>,
    initial: VertexId,
    finals: Vec<VertexId>,
    term: BTreeMap<VertexId, Predicate>,
    topo: Vec<VertexId>,
}

impl AbstractGraph {
    pub fn vertex_count(&self) -> usize {
        self.beta.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn initial(&self) -> VertexId {
        self.initial
    }

    pub fn finals(&self) -> &[VertexId] {
        &self.finals
    }

    pub fn is_final(&self, u: VertexId) -> bool {
        self.finals.binary_search(&u).is_ok()
    }

    /// Subgoal region of a vertex.
    pub fn beta(&self, u: VertexId) -> &Predicate {
        &self.beta[u]
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge ids leaving `u`, in ascending target order.
    pub fn outgoing(&self, u: VertexId) -> &[EdgeId] {
        &self.outgoing[u]
    }

    pub fn edge_between(&self, u: VertexId, v: VertexId) -> Option<EdgeId> {
        self.outgoing.get(u)?.iter().copied().find(|&e| self.edges[e].to == v)
    }

    /// Predicate `b` of the terminal trajectory set `always[b]` of a final
    /// vertex.
    pub fn terminal_predicate(&self, u: VertexId) -> Option<&Predicate> {
        self.term.get(&u)
    }

    pub fn terminal_set(&self, u: VertexId) -> Option<SafeSet> {
        self.term.get(&u).map(|p| SafeSet::Always(p.clone()))
    }

    /// Vertices in topological order (initial first).
    pub fn topo_order(&self) -> &[VertexId] {
        &self.topo
    }

    /// Plain-text adjacency dump.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        writeln!(
            s,
            "vertices: {} (initial {}, finals {:?})",
            self.vertex_count(),
            self.initial,
            self.finals
        )
        .unwrap();
        for (u, b) in self.beta.iter().enumerate() {
            writeln!(s, "  {u}: {b}").unwrap();
        }
        writeln!(s, "edges: {}", self.edge_count()).unwrap();
        for (i, e) in self.edges.iter().enumerate() {
            writeln!(s, "  [{i}] {} -> {}  {}", e.from, e.to, e.safe).unwrap();
        }
        writeln!(s, "terminal:").unwrap();
        for (u, p) in &self.term {
            writeln!(s, "  {u}: always[{p}]").unwrap();
        }
        s
    }

    /// Graphviz dump.
    pub fn to_dot(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        writeln!(s, "digraph abstract_graph {{").unwrap();
        writeln!(s, "  rankdir=LR;").unwrap();
        for (u, b) in self.beta.iter().enumerate() {
            let shape = if self.is_final(u) { "doublecircle" } else { "circle" };
            let mark = if u == self.initial { "u0: " } else { "" };
            writeln!(s, "  v{u} [shape={shape}, label=\"{mark}{u}\\n{}\"];", escape(&b.to_string()))
                .unwrap();
        }
        for e in &self.edges {
            writeln!(s, "  v{} -> v{} [label=\"{}\"];", e.from, e.to, escape(&e.safe.to_string()))
                .unwrap();
        }
        writeln!(s, "}}").unwrap();
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Direct construction of abstract graphs (compiled specifications go through
/// [`compile`] instead).
#[derive(Debug, Default)]
pub struct GraphBuilder {
    beta: Vec<Predicate>,
    edges: Vec<(VertexId, VertexId, SafeSet)>,
    initial: Option<VertexId>,
    finals: BTreeMap<VertexId, Predicate>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        GraphBuilder::default()
    }

    pub fn add_vertex(&mut self, beta: Predicate) -> VertexId {
        self.beta.push(beta);
        self.beta.len() - 1
    }

    pub fn add_edge(&mut self, from: VertexId, to: VertexId, safe: SafeSet) {
        self.edges.push((from, to, safe));
    }

    pub fn set_initial(&mut self, u: VertexId) {
        self.initial = Some(u);
    }

    pub fn add_final(&mut self, u: VertexId, term: Predicate) {
        self.finals.insert(u, term);
    }

    pub fn build(self) -> Result<AbstractGraph, GraphError> {
        let n = self.beta.len();
        let initial = self.initial.ok_or(GraphError::NoInitial)?;
        if initial >= n {
            return Err(GraphError::InvalidVertex(initial));
        }
        if self.finals.is_empty() {
            return Err(GraphError::NoFinals);
        }
        for (&u, _) in &self.finals {
            if u >= n {
                return Err(GraphError::InvalidVertex(u));
            }
        }
        let mut edges: Vec<Edge> = Vec::with_capacity(self.edges.len());
        for (from, to, safe) in self.edges {
            if from >= n {
                return Err(GraphError::InvalidVertex(from));
            }
            if to >= n {
                return Err(GraphError::InvalidVertex(to));
            }
            edges.push(Edge { from, to, safe });
        }
        edges.sort_by_key(|e| (e.from, e.to));
        if let Some(w) = edges.windows(2).find(|w| (w[0].from, w[0].to) == (w[1].from, w[1].to)) {
            return Err(GraphError::DuplicateEdge(w[0].from, w[0].to));
        }

        let topo = toposort(n, &edges)?;
        let mut outgoing = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            outgoing[e.from].push(i);
        }
        Ok(AbstractGraph {
            beta: self.beta,
            edges,
            outgoing,
            initial,
            finals: self.finals.keys().copied().collect(),
            term: self.finals,
            topo,
        })
    }
}

/// Kahn's algorithm; ties broken by smallest vertex id so the order is
/// deterministic.
fn toposort(n: usize, edges: &[Edge]) -> Result<Vec<VertexId>, GraphError> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let mut indegree = vec![0usize; n];
    for e in edges {
        indegree[e.to] += 1;
    }
    let mut ready: BinaryHeap<Reverse<VertexId>> = (0..n)
        .filter(|&u| indegree[u] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(u)) = ready.pop() {
        order.push(u);
        for e in edges.iter().filter(|e| e.from == u) {
            indegree[e.to] -= 1;
            if indegree[e.to] == 0 {
                ready.push(Reverse(e.to));
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err(GraphError::Cyclic)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> Predicate {
        Predicate::always_true()
    }

    #[test]
    fn builder_rejects_cycles() {
        let mut b = GraphBuilder::new();
        let u = b.add_vertex(p());
        let v = b.add_vertex(p());
        b.add_edge(u, v, SafeSet::unrestricted());
        b.add_edge(v, u, SafeSet::unrestricted());
        b.set_initial(u);
        b.add_final(v, p());
        assert_eq!(b.build().unwrap_err(), GraphError::Cyclic);
    }

    #[test]
    fn builder_rejects_duplicate_edges() {
        let mut b = GraphBuilder::new();
        let u = b.add_vertex(p());
        let v = b.add_vertex(p());
        b.add_edge(u, v, SafeSet::unrestricted());
        b.add_edge(u, v, SafeSet::unrestricted());
        b.set_initial(u);
        b.add_final(v, p());
        assert_eq!(b.build().unwrap_err(), GraphError::DuplicateEdge(0, 1));
    }

    #[test]
    fn topological_order_is_deterministic() {
        let mut b = GraphBuilder::new();
        for _ in 0..4 {
            b.add_vertex(p());
        }
        b.add_edge(0, 2, SafeSet::unrestricted());
        b.add_edge(0, 1, SafeSet::unrestricted());
        b.add_edge(2, 3, SafeSet::unrestricted());
        b.add_edge(1, 3, SafeSet::unrestricted());
        b.set_initial(0);
        b.add_final(3, p());
        let g = b.build().unwrap();
        assert_eq!(g.topo_order(), &[0, 1, 2, 3]);
        // Edges sorted by (from, to).
        assert_eq!(g.outgoing(0), &[0, 1]);
        assert_eq!(g.edge(0).to, 1);
    }
}
