//! Lazy Dijkstra planning interleaved with edge-policy learning.
//!
//! The planner processes graph vertices in order of the cheapest known path
//! from the initial vertex, where an edge's cost is the negative log of its
//! policy's estimated success probability. Edge policies are trained only
//! when the search first needs their cost, each edge at most once, with the
//! initial-state distribution induced by the path policy that reaches the
//! edge's source vertex. Processing the first final vertex yields the path
//! policy together with `exp(-cost)`, a lower bound on the probability that
//! the policy's trajectories satisfy the graph.

mod path_policy;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ars::{learn_edge_policy, ArsConfig, ArsError, EdgePolicy, InitSampler};
use crate::graph::{satisfies_graph, AbstractGraph, EdgeId, GraphError, VertexId};
use crate::rng::{derive_seed, stream};
use crate::rooms::RoomsEnv;
use crate::types::Point;

pub use path_policy::{path_edges, path_horizon, run_path_policy, PathPolicy, PathPolicyRun, PathRollout};

const TRAIN_TAG: u64 = 0x7121;
const EST_TAG: u64 = 0xE571;
const REACH_TAG: u64 = 0x6EAC;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("final regions unreachable with trained policies")]
    FinalUnreachable,
    #[error("no stored path reaches vertex {0}")]
    EmptyPathSet(VertexId),
    #[error("edge {edge} ({from} -> {to}) starved the reach buffer: {successes} successes in {attempts} rollouts (need {needed})")]
    EdgeStarvation {
        edge: EdgeId,
        from: VertexId,
        to: VertexId,
        successes: usize,
        attempts: usize,
        needed: usize,
    },
    #[error("estimated edge probability {0} lies outside (0, 1]")]
    InvalidProbability(f64),
    #[error("edge {0} has no trained policy")]
    UntrainedEdge(EdgeId),
    #[error("no edge between vertices {0} and {1}")]
    NoSuchEdge(VertexId, VertexId),
    #[error(transparent)]
    Ars(#[from] ArsError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Cost of a path from its per-edge success probabilities: the sum of
/// negative logs. The zero-length path has cost 0.
///
/// Probabilities must lie in `(0, 1]`; anything else is a caller bug
/// (estimates are clamped into that interval at the source).
pub fn path_cost(probs: &[f64]) -> f64 {
    probs
        .iter()
        .map(|&p| {
            assert!(p > 0.0 && p <= 1.0, "edge probability {p} outside (0, 1]");
            -p.ln()
        })
        .sum()
}

/// A discovered path from the initial vertex, with its accumulated cost.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEntry {
    pub vertices: Vec<VertexId>,
    pub cost: f64,
}

impl PathEntry {
    fn edge_count(&self) -> usize {
        self.vertices.len() - 1
    }
}

/// Dijkstra bookkeeping: per-vertex sets of discovered paths and the
/// processed marker.
#[derive(Debug)]
pub struct Frontier {
    paths: Vec<Vec<PathEntry>>,
    processed: Vec<bool>,
}

impl Frontier {
    pub fn new(g: &AbstractGraph) -> Self {
        let mut paths = vec![Vec::new(); g.vertex_count()];
        paths[g.initial()] = vec![PathEntry { vertices: vec![g.initial()], cost: 0.0 }];
        Frontier { paths, processed: vec![false; g.vertex_count()] }
    }

    /// The unprocessed vertex with the cheapest known path; ties go to the
    /// smallest vertex id.
    pub fn nearest_vertex(&self) -> Result<VertexId, PlannerError> {
        let mut best: Option<(f64, VertexId)> = None;
        for (u, entries) in self.paths.iter().enumerate() {
            if self.processed[u] || entries.is_empty() {
                continue;
            }
            let cost = entries.iter().map(|e| e.cost).fold(f64::INFINITY, f64::min);
            let better = match best {
                None => true,
                Some((c, _)) => cost < c,
            };
            if better {
                best = Some((cost, u));
            }
        }
        best.map(|(_, u)| u).ok_or(PlannerError::FinalUnreachable)
    }

    /// Cheapest stored path to `u`; ties broken by fewer edges, then by
    /// lexicographically smallest vertex sequence.
    pub fn shortest_path(&self, u: VertexId) -> Result<&PathEntry, PlannerError> {
        self.paths[u]
            .iter()
            .min_by(|a, b| {
                a.cost
                    .total_cmp(&b.cost)
                    .then(a.edge_count().cmp(&b.edge_count()))
                    .then_with(|| a.vertices.cmp(&b.vertices))
            })
            .ok_or(PlannerError::EmptyPathSet(u))
    }

    pub fn add_path(&mut self, u: VertexId, entry: PathEntry) {
        self.paths[u].push(entry);
    }

    pub fn mark_processed(&mut self, u: VertexId) {
        self.processed[u] = true;
    }

    pub fn processed_count(&self) -> usize {
        self.processed.iter().filter(|&&p| p).count()
    }
}

/// Result of the search loop alone (edge handling abstracted away).
#[derive(Debug, Clone)]
pub struct PlanResult {
    pub path: PathEntry,
    pub edge_probs: BTreeMap<EdgeId, f64>,
    pub processed: Vec<VertexId>,
}

/// The planning loop, generic over how an edge's success probability is
/// produced.
///
/// `edge_prob(path_to_source, edge)` is invoked exactly once per edge, in
/// ascending edge order per processed vertex; the full machinery passes a
/// train-then-estimate closure, while tests may stub fixed probabilities.
/// The loop stops at the first final vertex selected for processing and
/// returns the cheapest discovered path to it.
pub fn plan<F>(g: &AbstractGraph, mut edge_prob: F) -> Result<PlanResult, PlannerError>
where
    F: FnMut(&PathEntry, EdgeId) -> Result<f64, PlannerError>,
{
    let mut frontier = Frontier::new(g);
    let mut probs = BTreeMap::new();
    let mut processed = Vec::new();
    loop {
        let u = frontier.nearest_vertex()?;
        let rho = frontier.shortest_path(u)?.clone();
        if g.is_final(u) {
            return Ok(PlanResult { path: rho, edge_probs: probs, processed });
        }
        for &e in g.outgoing(u) {
            debug_assert!(!probs.contains_key(&e), "edge trained more than once");
            let p = edge_prob(&rho, e)?;
            if !(p > 0.0 && p <= 1.0) {
                return Err(PlannerError::InvalidProbability(p));
            }
            let mut vertices = rho.vertices.clone();
            vertices.push(g.edge(e).to);
            frontier.add_path(g.edge(e).to, PathEntry { vertices, cost: rho.cost - p.ln() });
            probs.insert(e, p);
        }
        frontier.mark_processed(u);
        processed.push(u);
    }
}

/// Budgets for the full planner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirlConfig {
    pub ars: ArsConfig,
    /// Monte Carlo rollouts per edge-probability estimate.
    pub est_rollouts: usize,
    /// Target reach-buffer size per vertex.
    pub reach_buffer: usize,
    /// Minimum successful rollouts before a reach buffer is usable.
    pub reach_min_successes: usize,
    /// Rollout cap for filling a reach buffer, as a multiple of the buffer
    /// size.
    pub reach_cap_factor: usize,
    pub seed: u64,
}

impl Default for DirlConfig {
    fn default() -> Self {
        DirlConfig {
            ars: ArsConfig::default(),
            est_rollouts: 200,
            reach_buffer: 500,
            reach_min_successes: 50,
            reach_cap_factor: 20,
            seed: 0,
        }
    }
}

/// Environment-step accounting, by purpose.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepMeter {
    pub training: u64,
    pub estimation: u64,
    pub reach: u64,
}

impl StepMeter {
    pub fn total(&self) -> u64 {
        self.training + self.estimation + self.reach
    }
}

/// Initial-state distribution for training a vertex's outgoing edges:
/// either the environment's reset distribution (for the initial vertex) or
/// uniform resampling from a buffer of reached states.
pub enum ReachDist<'a> {
    Reset(&'a RoomsEnv),
    Buffer(Vec<Point>),
}

impl ReachDist<'_> {
    pub fn buffer(&self) -> Option<&[Point]> {
        match self {
            ReachDist::Reset(_) => None,
            ReachDist::Buffer(states) => Some(states),
        }
    }
}

impl InitSampler for ReachDist<'_> {
    fn sample(&self, rng: &mut rand_chacha::ChaCha8Rng) -> Point {
        match self {
            ReachDist::Reset(env) => env.reset(rng),
            ReachDist::Buffer(states) => states[rng.gen_range(0..states.len())],
        }
    }
}

/// Empirical realization of the induced initial-state distribution for the
/// endpoint of `rho`.
///
/// For the zero-length path this is the environment's reset distribution.
/// Otherwise the path policy is executed from reset states, and the state at
/// which its final edge is achieved is collected from successful rollouts
/// until the buffer is full or the rollout cap is hit; fewer than the
/// configured minimum of successes is an edge-starvation error naming the
/// path's last edge.
pub fn reach_distribution<'a>(
    env: &'a RoomsEnv,
    g: &AbstractGraph,
    rho: &PathEntry,
    policies: &BTreeMap<EdgeId, EdgePolicy>,
    cfg: &DirlConfig,
    seed: u64,
    meter: &mut StepMeter,
) -> Result<ReachDist<'a>, PlannerError> {
    if rho.vertices.len() == 1 {
        return Ok(ReachDist::Reset(env));
    }
    let policy = PathPolicy::assemble(g, &rho.vertices, policies)?;
    let horizon = path_horizon(cfg.ars.horizon, policy.len());
    let cap = cfg.reach_cap_factor * cfg.reach_buffer;
    let mut rng = stream(seed);
    let mut buffer = Vec::new();
    let mut attempts = 0usize;
    while buffer.len() < cfg.reach_buffer && attempts < cap {
        attempts += 1;
        let s0 = env.reset(&mut rng);
        let rollout = run_path_policy(env, g, &policy, s0, horizon)?;
        meter.reach += rollout.traj.actions().len() as u64;
        if let Some(state) = rollout.completion_state {
            debug_assert!(
                g.beta(*rho.vertices.last().unwrap()).eval_bool(state),
                "reached state must lie in the target region"
            );
            buffer.push(state);
        }
    }
    if buffer.len() < cfg.reach_min_successes {
        let e = *policy.edges.last().unwrap();
        let edge = g.edge(e);
        return Err(PlannerError::EdgeStarvation {
            edge: e,
            from: edge.from,
            to: edge.to,
            successes: buffer.len(),
            attempts,
            needed: cfg.reach_min_successes,
        });
    }
    Ok(ReachDist::Buffer(buffer))
}

/// Monte Carlo estimate of an edge policy's success probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeEstimate {
    pub prob: f64,
    pub successes: usize,
    pub samples: usize,
}

/// Runs `samples` episodes of the policy from the sampler and counts
/// achievements within the episode horizon. The estimate is clamped to
/// `[1 / (2 * samples), 1]` so downstream costs stay finite.
pub fn estimate_edge_prob(
    env: &RoomsEnv,
    g: &AbstractGraph,
    e: EdgeId,
    policy: &EdgePolicy,
    init: &dyn InitSampler,
    samples: usize,
    horizon: usize,
    seed: u64,
    meter: &mut StepMeter,
) -> Result<EdgeEstimate, PlannerError> {
    assert!(samples >= 1);
    let mut rng = stream(seed);
    let mut successes = 0usize;
    for _ in 0..samples {
        let s0 = init.sample(&mut rng);
        let mut tracker = crate::graph::EdgeTracker::start(g, e, s0)?;
        let mut s = s0;
        if tracker.achieved().is_none() {
            for _ in 0..horizon {
                let a = policy.act(s, env.max_speed());
                s = env.step(s, a);
                meter.estimation += 1;
                if tracker.observe(s).is_some() {
                    break;
                }
            }
        }
        if tracker.achieved().is_some() {
            successes += 1;
        }
    }
    let floor = 1.0 / (2.0 * samples as f64);
    let prob = (successes as f64 / samples as f64).clamp(floor, 1.0);
    Ok(EdgeEstimate { prob, successes, samples })
}

/// Per-edge training record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeReport {
    pub edge: EdgeId,
    pub from: VertexId,
    pub to: VertexId,
    pub estimate: EdgeEstimate,
    pub train_episodes: u64,
    pub train_steps: u64,
}

/// Full planner output.
#[derive(Debug)]
pub struct DirlOutcome {
    pub path: Vec<VertexId>,
    pub edges: Vec<EdgeId>,
    pub cost: f64,
    /// `exp(-cost)`: lower bound on the path policy's probability of
    /// satisfying the graph (up to estimation noise).
    pub certificate: f64,
    pub policy: PathPolicy,
    /// Every trained edge policy (a superset of the path's).
    pub policies: BTreeMap<EdgeId, EdgePolicy>,
    pub edge_reports: Vec<EdgeReport>,
    pub steps: StepMeter,
    pub processed: Vec<VertexId>,
}

/// Runs the interleaved planner-learner on a compiled graph.
///
/// Loop: pick the nearest unprocessed vertex, take its cheapest stored path,
/// return the path policy if the vertex is final, otherwise realize the
/// reach distribution at that vertex and train + estimate every outgoing
/// edge, recording the extended paths. The reach distribution is realized
/// lazily (when the first outgoing edge needs it), so no rollouts are spent
/// at a final vertex.
pub fn run_dirl(
    env: &RoomsEnv,
    g: &AbstractGraph,
    cfg: &DirlConfig,
) -> Result<DirlOutcome, PlannerError> {
    let mut policies: BTreeMap<EdgeId, EdgePolicy> = BTreeMap::new();
    let mut reports: Vec<EdgeReport> = Vec::new();
    let mut meter = StepMeter::default();
    let mut reach_cache: Option<(VertexId, ReachDist)> = None;

    let result = {
        let policies = &mut policies;
        let reports = &mut reports;
        let meter = &mut meter;
        let reach_cache = &mut reach_cache;
        plan(g, move |rho, e| {
            let u = *rho.vertices.last().unwrap();
            if reach_cache.as_ref().map(|(v, _)| *v) != Some(u) {
                let seed = derive_seed(cfg.seed, &[REACH_TAG, u as u64]);
                let dist = reach_distribution(env, g, rho, policies, cfg, seed, meter)?;
                *reach_cache = Some((u, dist));
            }
            let init = &reach_cache.as_ref().unwrap().1;

            let ars_cfg =
                ArsConfig { seed: derive_seed(cfg.seed, &[TRAIN_TAG, e as u64]), ..cfg.ars.clone() };
            let (policy, stats) = learn_edge_policy(env, g, e, init, &ars_cfg)?;
            meter.training += stats.env_steps;

            let estimate = estimate_edge_prob(
                env,
                g,
                e,
                &policy,
                init,
                cfg.est_rollouts,
                cfg.ars.horizon,
                derive_seed(cfg.seed, &[EST_TAG, e as u64]),
                meter,
            )?;
            let edge = g.edge(e);
            reports.push(EdgeReport {
                edge: e,
                from: edge.from,
                to: edge.to,
                estimate,
                train_episodes: stats.episodes,
                train_steps: stats.env_steps,
            });
            policies.insert(e, policy);
            Ok(estimate.prob)
        })?
    };

    let policy = PathPolicy::assemble(g, &result.path.vertices, &policies)?;
    Ok(DirlOutcome {
        path: result.path.vertices.clone(),
        edges: policy.edges.clone(),
        cost: result.path.cost,
        certificate: (-result.path.cost).exp(),
        policy,
        policies,
        edge_reports: reports,
        steps: meter,
        processed: result.processed,
    })
}

/// Monte Carlo evaluation of a path policy against the graph semantics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvalReport {
    pub rollouts: usize,
    pub successes: usize,
    pub success_prob: f64,
    /// Binomial standard error of `success_prob`.
    pub std_error: f64,
    /// Rollouts that achieved every edge in order.
    pub completed: usize,
    /// Completed rollouts whose trajectory nevertheless failed the graph
    /// check; always 0 (completion implies satisfaction).
    pub greedy_violations: usize,
}

/// Estimates the probability that trajectories of the path policy satisfy
/// the graph. Rollouts start from the reset distribution, run for the
/// path-policy horizon, and end early on completion.
pub fn evaluate_policy(
    env: &RoomsEnv,
    g: &AbstractGraph,
    policy: &PathPolicy,
    rollouts: usize,
    seed: u64,
    episode_len: usize,
) -> Result<EvalReport, PlannerError> {
    assert!(rollouts >= 1);
    let horizon = path_horizon(episode_len, policy.len());
    let mut rng = stream(seed);
    let mut successes = 0usize;
    let mut completed = 0usize;
    let mut greedy_violations = 0usize;
    for _ in 0..rollouts {
        let s0 = env.reset(&mut rng);
        let rollout = run_path_policy(env, g, policy, s0, horizon)?;
        let ok = satisfies_graph(&rollout.traj, g);
        if ok {
            successes += 1;
        }
        if rollout.completed {
            completed += 1;
            if !ok {
                greedy_violations += 1;
            }
        }
    }
    let p = successes as f64 / rollouts as f64;
    Ok(EvalReport {
        rollouts,
        successes,
        success_prob: p,
        std_error: (p * (1.0 - p) / rollouts as f64).sqrt(),
        completed,
        greedy_violations,
    })
}

/// Empirical check of the certificate: the evaluated satisfaction
/// probability must not fall more than three combined standard errors below
/// `exp(-cost)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub certificate: f64,
    pub cost: f64,
    pub eval_prob: f64,
    pub binomial_se: f64,
    /// Delta-method propagation of the per-edge estimation noise into the
    /// certificate, with add-one smoothing so exact-1 estimates still carry
    /// uncertainty.
    pub certificate_se: f64,
    pub combined_se: f64,
    pub lower_bound: f64,
    pub satisfied: bool,
}

pub fn certificate_check(
    cost: f64,
    path_estimates: &[EdgeEstimate],
    eval: &EvalReport,
) -> CertificateCheck {
    let mut var_log = 0.0;
    for est in path_estimates {
        let m = est.samples as f64;
        let smoothed = (est.successes as f64 + 1.0) / (m + 2.0);
        var_log += (1.0 - smoothed) / (smoothed * m);
    }
    let certificate = (-cost).exp();
    let certificate_se = certificate * var_log.sqrt();
    let combined_se = eval.std_error + certificate_se;
    let lower_bound = certificate - 3.0 * combined_se;
    CertificateCheck {
        certificate,
        cost,
        eval_prob: eval.success_prob,
        binomial_se: eval.std_error,
        certificate_se,
        combined_se,
        lower_bound,
        satisfied: eval.success_prob >= lower_bound,
    }
}

impl DirlOutcome {
    /// Estimates along the chosen path, in path order.
    pub fn path_estimates(&self) -> Vec<EdgeEstimate> {
        self.edges
            .iter()
            .map(|e| {
                self.edge_reports
                    .iter()
                    .find(|r| r.edge == *e)
                    .expect("path edges all have reports")
                    .estimate
            })
            .collect()
    }
}
