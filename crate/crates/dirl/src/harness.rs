//! Experiment harness: budget sweeps, run manifests, CSV curves, SVG plots.
//!
//! A run executes the planner once for a (budget, repetition) pair and
//! appends one CSV row `k,total_steps,success_prob,success_se,cost,certificate,seed`
//! to the experiment's curve file. Each run also writes a self-contained
//! directory with the manifest (layout text, specification text, per-edge
//! estimates and checkpoint paths, step accounting, evaluation, certificate
//! check) so it can be re-evaluated later without the original config.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ars::{ArsConfig, CheckpointError, EdgePolicy};
use crate::graph::{compile, AbstractGraph};
use crate::planner::{
    certificate_check, evaluate_policy, path_edges, run_dirl, CertificateCheck, DirlConfig,
    EdgeEstimate, EvalReport, PathPolicy, PlannerError, StepMeter,
};
use crate::presets;
use crate::rng::derive_seed;
use crate::rooms::{LayoutError, RoomsEnv, RoomsLayout};
use crate::spec_lang::{parse_spec, ParseError, Spec};

const EVAL_TAG: u64 = 0xEA01;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Preset(#[from] presets::PresetError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error("csv {path}: {message}")]
    Csv { path: PathBuf, message: String },
}

/// Search hyperparameters exposed to experiment configs (the per-edge budget
/// and seed come from the sweep).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ArsSettings {
    pub step_size: f64,
    pub noise: f64,
    pub directions: usize,
    pub top_directions: usize,
    pub horizon: usize,
    pub hidden: usize,
}

impl Default for ArsSettings {
    fn default() -> Self {
        let d = ArsConfig::default();
        ArsSettings {
            step_size: d.step_size,
            noise: d.noise,
            directions: d.directions,
            top_directions: d.top_directions,
            horizon: d.horizon,
            hidden: d.hidden,
        }
    }
}

impl ArsSettings {
    pub fn to_config(&self, episodes: usize, seed: u64) -> ArsConfig {
        ArsConfig {
            step_size: self.step_size,
            noise: self.noise,
            directions: self.directions,
            top_directions: self.top_directions,
            episodes,
            horizon: self.horizon,
            hidden: self.hidden,
            seed,
        }
    }
}

fn default_reps() -> usize {
    1
}
fn default_est() -> usize {
    200
}
fn default_eval() -> usize {
    1000
}
fn default_reach_buffer() -> usize {
    500
}
fn default_reach_min() -> usize {
    50
}
fn default_reach_cap() -> usize {
    20
}

/// One experiment: an environment, a specification, and a budget sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Directory name for outputs; derived from env and spec when absent.
    pub name: Option<String>,
    /// Layout preset name or path to a layout file.
    pub env: String,
    /// Specification preset name, path to a DSL file, or inline DSL text.
    pub spec: String,
    /// Per-edge episode budgets, ascending.
    pub k_sweep: Vec<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_est")]
    pub est_rollouts: usize,
    #[serde(default = "default_eval")]
    pub eval_rollouts: usize,
    #[serde(default = "default_reach_buffer")]
    pub reach_buffer: usize,
    #[serde(default = "default_reach_min")]
    pub reach_min_successes: usize,
    #[serde(default = "default_reach_cap")]
    pub reach_cap_factor: usize,
    #[serde(default)]
    pub ars: ArsSettings,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.k_sweep.is_empty() {
            return Err(HarnessError::Config("k_sweep must not be empty".into()));
        }
        if self.k_sweep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::Config("k_sweep must be strictly ascending".into()));
        }
        for (what, v) in [
            ("reps", self.reps),
            ("est_rollouts", self.est_rollouts),
            ("eval_rollouts", self.eval_rollouts),
            ("reach_buffer", self.reach_buffer),
            ("reach_min_successes", self.reach_min_successes),
            ("reach_cap_factor", self.reach_cap_factor),
            ("k_sweep[0]", self.k_sweep[0]),
        ] {
            if v == 0 {
                return Err(HarnessError::Config(format!("{what} must be positive")));
            }
        }
        Ok(())
    }

    pub fn experiment_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            let slug = |s: &str| -> String {
                s.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
            };
            format!("{}__{}", slug(&self.env), slug(&self.spec))
        })
    }
}

/// Resolves an environment argument: preset name first, then layout file.
pub fn resolve_env(arg: &str) -> Result<(String, String), HarnessError> {
    if let Some((_, text)) = presets::LAYOUTS.iter().find(|(n, _)| *n == arg) {
        return Ok((arg.to_string(), text.to_string()));
    }
    let path = Path::new(arg);
    if path.exists() {
        return Ok((arg.to_string(), std::fs::read_to_string(path)?));
    }
    Err(presets::PresetError::Unknown(
        arg.to_string(),
        presets::LAYOUTS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", "),
    )
    .into())
}

/// Resolves a specification argument: preset name, then file, then inline
/// DSL text (recognized by a parenthesis).
pub fn resolve_spec(arg: &str) -> Result<(String, String), HarnessError> {
    if let Ok(text) = presets::spec_text(arg) {
        return Ok((arg.to_string(), text.to_string()));
    }
    let path = Path::new(arg);
    if path.exists() {
        return Ok((arg.to_string(), std::fs::read_to_string(path)?));
    }
    if arg.contains('(') {
        return Ok(("inline".to_string(), arg.to_string()));
    }
    Err(presets::PresetError::Unknown(
        arg.to_string(),
        presets::SPECS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", "),
    )
    .into())
}

/// Fully resolved experiment inputs.
pub struct ResolvedTask {
    pub env_label: String,
    pub layout_text: String,
    pub layout: RoomsLayout,
    pub env: RoomsEnv,
    pub spec_label: String,
    pub spec_text: String,
    pub spec: Spec,
    pub graph: AbstractGraph,
}

pub fn resolve_task(env_arg: &str, spec_arg: &str) -> Result<ResolvedTask, HarnessError> {
    let (env_label, layout_text) = resolve_env(env_arg)?;
    let layout = RoomsLayout::parse(&layout_text)?;
    let env = RoomsEnv::new(layout.clone())?;
    let (spec_label, spec_text) = resolve_spec(spec_arg)?;
    let spec = parse_spec(&spec_text, &layout)?;
    let graph = compile(&spec);
    Ok(ResolvedTask { env_label, layout_text, layout, env, spec_label, spec_text, spec, graph })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEdge {
    pub edge: usize,
    pub from: usize,
    pub to: usize,
    pub prob: f64,
    pub successes: usize,
    pub samples: usize,
    pub train_episodes: u64,
    pub train_steps: u64,
    /// Checkpoint path relative to the run directory.
    pub checkpoint: String,
}

/// Self-contained record of one planner run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub env_label: String,
    pub layout_text: String,
    pub spec_label: String,
    pub spec_text: String,
    pub k: usize,
    pub rep: usize,
    pub seed: u64,
    pub status: String,
    pub failure: Option<String>,
    pub graph_vertices: usize,
    pub graph_edges: usize,
    pub path: Vec<usize>,
    pub path_edges: Vec<usize>,
    pub cost: Option<f64>,
    pub certificate: Option<f64>,
    pub edges: Vec<ManifestEdge>,
    pub steps: StepMeter,
    pub total_steps: u64,
    pub eval: Option<EvalReport>,
    pub certificate_check: Option<CertificateCheck>,
    pub wall_time_s: f64,
}

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CSV_HEADER: &str = "k,total_steps,success_prob,success_se,cost,certificate,seed";

/// One curve row; failed runs carry NaNs in the statistics columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRow {
    pub k: usize,
    pub total_steps: u64,
    pub success_prob: f64,
    pub success_se: f64,
    pub cost: f64,
    pub certificate: f64,
    pub seed: u64,
}

impl RunRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.k,
            self.total_steps,
            self.success_prob,
            self.success_se,
            self.cost,
            self.certificate,
            self.seed
        )
    }

    pub fn is_ok(&self) -> bool {
        self.success_prob.is_finite()
    }
}

/// Parses a curve CSV (header required).
pub fn read_curve_csv(path: &Path) -> Result<Vec<RunRow>, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    let bad = |message: String| HarnessError::Csv { path: path.to_path_buf(), message };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => return Err(bad(format!("expected header `{CSV_HEADER}`, found {other:?}"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 7 {
            return Err(bad(format!("line {}: expected 7 fields", i + 2)));
        }
        let f = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("line {}: {e}", i + 2)));
        let u = |s: &str| s.trim().parse::<u64>().map_err(|e| bad(format!("line {}: {e}", i + 2)));
        rows.push(RunRow {
            k: u(parts[0])? as usize,
            total_steps: u(parts[1])?,
            success_prob: f(parts[2])?,
            success_se: f(parts[3])?,
            cost: f(parts[4])?,
            certificate: f(parts[5])?,
            seed: u(parts[6])?,
        });
    }
    Ok(rows)
}

/// Appends rows not already present; creates the file (with header) when
/// missing. Reruns with identical config and seed therefore leave the file
/// unchanged.
pub fn append_rows_idempotent(path: &Path, rows: &[RunRow]) -> Result<usize, HarnessError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let existing: BTreeSet<String> = if path.exists() {
        std::fs::read_to_string(path)?.lines().skip(1).map(|l| l.trim().to_string()).collect()
    } else {
        std::fs::write(path, format!("{CSV_HEADER}\n"))?;
        BTreeSet::new()
    };
    let mut out = String::new();
    let mut added = 0;
    for row in rows {
        let line = row.to_csv();
        if !existing.contains(line.trim()) {
            out.push_str(&line);
            out.push('\n');
            added += 1;
        }
    }
    if !out.is_empty() {
        use std::io::Write;
        let mut file = std::fs::OpenOptions::new().append(true).open(path)?;
        file.write_all(out.as_bytes())?;
    }
    Ok(added)
}

pub struct SweepSummary {
    pub exp_dir: PathBuf,
    pub csv_path: PathBuf,
    pub rows: Vec<RunRow>,
    pub failures: usize,
}

/// Executes the full sweep: one planner run per (budget, repetition) pair.
/// Planner failures (unreachable finals, starved edges) are recorded per row
/// and do not abort the sweep.
pub fn run_experiment(cfg: &ExperimentConfig, out_root: &Path) -> Result<SweepSummary, HarnessError> {
    cfg.validate()?;
    let task = resolve_task(&cfg.env, &cfg.spec)?;
    let exp_dir = out_root.join(cfg.experiment_name());
    std::fs::create_dir_all(&exp_dir)?;
    let csv_path = exp_dir.join("curve.csv");

    let mut rows = Vec::new();
    let mut failures = 0usize;
    for &k in &cfg.k_sweep {
        for rep in 0..cfg.reps {
            let (row, manifest, checkpoints) = run_once(cfg, &task, k, rep)?;
            if manifest.status != "ok" {
                failures += 1;
            }
            let run_dir = exp_dir.join(format!("k{k}_rep{rep}"));
            write_run_dir(&run_dir, &task, &manifest, &checkpoints)?;
            append_rows_idempotent(&csv_path, std::slice::from_ref(&row))?;
            rows.push(row);
        }
    }
    Ok(SweepSummary { exp_dir, csv_path, rows, failures })
}

/// Runs the planner once and evaluates the result. Returns the curve row,
/// the manifest, and the trained checkpoints keyed by their relative paths.
pub fn run_once(
    cfg: &ExperimentConfig,
    task: &ResolvedTask,
    k: usize,
    rep: usize,
) -> Result<(RunRow, RunManifest, BTreeMap<String, EdgePolicy>), HarnessError> {
    let run_seed = derive_seed(cfg.seed, &[k as u64, rep as u64]);
    let dirl_cfg = DirlConfig {
        ars: cfg.ars.to_config(k, run_seed),
        est_rollouts: cfg.est_rollouts,
        reach_buffer: cfg.reach_buffer,
        reach_min_successes: cfg.reach_min_successes,
        reach_cap_factor: cfg.reach_cap_factor,
        seed: run_seed,
    };
    let started = Instant::now();
    let mut manifest = RunManifest {
        version: MANIFEST_VERSION,
        env_label: task.env_label.clone(),
        layout_text: task.layout_text.clone(),
        spec_label: task.spec_label.clone(),
        spec_text: task.spec_text.clone(),
        k,
        rep,
        seed: run_seed,
        status: "ok".into(),
        failure: None,
        graph_vertices: task.graph.vertex_count(),
        graph_edges: task.graph.edge_count(),
        path: Vec::new(),
        path_edges: Vec::new(),
        cost: None,
        certificate: None,
        edges: Vec::new(),
        steps: StepMeter::default(),
        total_steps: 0,
        eval: None,
        certificate_check: None,
        wall_time_s: 0.0,
    };

    match run_dirl(&task.env, &task.graph, &dirl_cfg) {
        Ok(outcome) => {
            let eval = evaluate_policy(
                &task.env,
                &task.graph,
                &outcome.policy,
                cfg.eval_rollouts,
                derive_seed(run_seed, &[EVAL_TAG]),
                dirl_cfg.ars.horizon,
            )?;
            let check = certificate_check(outcome.cost, &outcome.path_estimates(), &eval);
            manifest.path = outcome.path.clone();
            manifest.path_edges = outcome.edges.clone();
            manifest.cost = Some(outcome.cost);
            manifest.certificate = Some(outcome.certificate);
            manifest.steps = outcome.steps;
            manifest.total_steps = outcome.steps.total();
            manifest.eval = Some(eval);
            manifest.certificate_check = Some(check);
            manifest.edges = outcome
                .edge_reports
                .iter()
                .map(|r| ManifestEdge {
                    edge: r.edge,
                    from: r.from,
                    to: r.to,
                    prob: r.estimate.prob,
                    successes: r.estimate.successes,
                    samples: r.estimate.samples,
                    train_episodes: r.train_episodes,
                    train_steps: r.train_steps,
                    checkpoint: format!("edges/edge_{}_{}_{}.json", r.edge, r.from, r.to),
                })
                .collect();
            manifest.wall_time_s = started.elapsed().as_secs_f64();
            let row = RunRow {
                k,
                total_steps: manifest.total_steps,
                success_prob: eval.success_prob,
                success_se: eval.std_error,
                cost: outcome.cost,
                certificate: outcome.certificate,
                seed: run_seed,
            };
            let checkpoints = manifest
                .edges
                .iter()
                .map(|m| (m.checkpoint.clone(), outcome.policies[&m.edge].clone()))
                .collect();
            Ok((row, manifest, checkpoints))
        }
        Err(e @ (PlannerError::FinalUnreachable | PlannerError::EdgeStarvation { .. })) => {
            manifest.status = "planner_failure".into();
            manifest.failure = Some(e.to_string());
            manifest.wall_time_s = started.elapsed().as_secs_f64();
            let row = RunRow {
                k,
                total_steps: 0,
                success_prob: f64::NAN,
                success_se: f64::NAN,
                cost: f64::NAN,
                certificate: f64::NAN,
                seed: run_seed,
            };
            Ok((row, manifest, BTreeMap::new()))
        }
        Err(e) => Err(e.into()),
    }
}

/// Writes manifest, graph dumps, and edge checkpoints into a run directory.
pub fn write_run_dir(
    run_dir: &Path,
    task: &ResolvedTask,
    manifest: &RunManifest,
    checkpoints: &BTreeMap<String, EdgePolicy>,
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(run_dir)?;
    std::fs::write(run_dir.join(MANIFEST_FILE), serde_json::to_string_pretty(manifest)?)?;
    std::fs::write(run_dir.join("graph.txt"), task.graph.to_text())?;
    std::fs::write(run_dir.join("graph.dot"), task.graph.to_dot())?;
    for (rel, policy) in checkpoints {
        let path = run_dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        policy.save(&path)?;
    }
    Ok(())
}

/// Reloads a run directory and re-evaluates its path policy.
pub fn reload_and_evaluate(
    run_dir: &Path,
    rollouts: usize,
    seed: u64,
) -> Result<(RunManifest, EvalReport, CertificateCheck), HarnessError> {
    let manifest: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join(MANIFEST_FILE))?)?;
    if manifest.status != "ok" {
        return Err(HarnessError::Config(format!(
            "run recorded a planner failure: {}",
            manifest.failure.clone().unwrap_or_default()
        )));
    }
    let layout = RoomsLayout::parse(&manifest.layout_text)?;
    let env = RoomsEnv::new(layout.clone())?;
    let spec = parse_spec(&manifest.spec_text, &layout)?;
    let graph = compile(&spec);

    let mut policies = BTreeMap::new();
    for edge in &manifest.edges {
        if manifest.path_edges.contains(&edge.edge) {
            let policy = EdgePolicy::load(&run_dir.join(&edge.checkpoint))?;
            policies.insert(edge.edge, policy);
        }
    }
    let policy = PathPolicy::assemble(&graph, &manifest.path, &policies)?;
    debug_assert_eq!(policy.edges, path_edges(&graph, &manifest.path)?);

    let eval =
        evaluate_policy(&env, &graph, &policy, rollouts, seed, ArsSettings::default().horizon)?;
    let estimates: Vec<EdgeEstimate> = manifest
        .path_edges
        .iter()
        .map(|e| {
            let m = manifest.edges.iter().find(|edge| edge.edge == *e).expect("edge in manifest");
            EdgeEstimate { prob: m.prob, successes: m.successes, samples: m.samples }
        })
        .collect();
    let check = certificate_check(manifest.cost.unwrap_or(f64::INFINITY), &estimates, &eval);
    Ok((manifest, eval, check))
}

/// Aggregated point of a learning curve: one budget value.
#[derive(Debug, Clone, Copy)]
pub struct CurvePoint {
    pub k: usize,
    pub mean_steps: f64,
    pub mean_prob: f64,
    pub std_prob: f64,
    pub runs: usize,
}

/// Groups successful rows by budget and aggregates mean/std.
pub fn aggregate_curve(rows: &[RunRow]) -> Vec<CurvePoint> {
    let mut by_k: BTreeMap<usize, Vec<&RunRow>> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.is_ok()) {
        by_k.entry(row.k).or_default().push(row);
    }
    by_k
        .into_iter()
        .map(|(k, group)| {
            let n = group.len() as f64;
            let mean_steps = group.iter().map(|r| r.total_steps as f64).sum::<f64>() / n;
            let mean_prob = group.iter().map(|r| r.success_prob).sum::<f64>() / n;
            let var =
                group.iter().map(|r| (r.success_prob - mean_prob).powi(2)).sum::<f64>() / n;
            CurvePoint { k, mean_steps, mean_prob, std_prob: var.sqrt(), runs: group.len() }
        })
        .collect()
}

const SERIES_COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Renders learning curves (one series per CSV) as a static SVG: mean curve
/// with a +/- one standard deviation band, steps on x, success probability
/// on y.
pub fn plot_curves_svg(series: &[(String, Vec<RunRow>)]) -> String {
    let (w, h) = (720.0, 480.0);
    let (ml, mr, mt, mb) = (64.0, 16.0, 20.0, 48.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);

    let aggregated: Vec<(String, Vec<CurvePoint>)> =
        series.iter().map(|(n, rows)| (n.clone(), aggregate_curve(rows))).collect();
    let max_x = aggregated
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.mean_steps))
        .fold(0.0f64, f64::max)
        .max(1.0)
        * 1.05;
    let sx = move |x: f64| ml + x / max_x * pw;
    let sy = move |y: f64| mt + (1.05 - y) / 1.05 * ph;

    let mut svg = String::new();
    use std::fmt::Write;
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">"
    )
    .unwrap();
    writeln!(svg, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>").unwrap();

    // Axes and gridlines.
    for i in 0..=5 {
        let yv = i as f64 * 0.2;
        let y = sy(yv);
        writeln!(
            svg,
            "<line x1=\"{ml}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>",
            ml + pw
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{yv:.1}</text>",
            ml - 6.0,
            y + 4.0
        )
        .unwrap();
    }
    for i in 0..=5 {
        let xv = max_x / 1.05 * i as f64 / 5.0;
        let x = sx(xv);
        writeln!(
            svg,
            "<line x1=\"{x:.1}\" y1=\"{mt}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#eee\"/>",
            mt + ph
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            mt + ph + 16.0,
            format_steps(xv)
        )
        .unwrap();
    }
    writeln!(
        svg,
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{:.1}\" stroke=\"black\"/>",
        mt + ph
    )
    .unwrap();
    writeln!(
        svg,
        "<line x1=\"{ml}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        mt + ph,
        ml + pw,
        mt + ph
    )
    .unwrap();
    writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">environment steps</text>",
        ml + pw / 2.0,
        h - 10.0
    )
    .unwrap();
    writeln!(
        svg,
        "<text x=\"14\" y=\"{:.1}\" transform=\"rotate(-90 14 {:.1})\" text-anchor=\"middle\">success probability</text>",
        mt + ph / 2.0,
        mt + ph / 2.0
    )
    .unwrap();

    for (si, (name, points)) in aggregated.iter().enumerate() {
        let color = SERIES_COLORS[si % SERIES_COLORS.len()];
        if points.len() > 1 {
            // +/- one standard deviation band.
            let mut band = String::new();
            for p in points {
                band.push_str(&format!(
                    "{:.1},{:.1} ",
                    sx(p.mean_steps),
                    sy((p.mean_prob + p.std_prob).min(1.05))
                ));
            }
            for p in points.iter().rev() {
                band.push_str(&format!(
                    "{:.1},{:.1} ",
                    sx(p.mean_steps),
                    sy((p.mean_prob - p.std_prob).max(0.0))
                ));
            }
            writeln!(svg, "<polygon points=\"{}\" fill=\"{color}\" opacity=\"0.15\"/>", band.trim())
                .unwrap();
            let line: Vec<String> = points
                .iter()
                .map(|p| format!("{:.1},{:.1}", sx(p.mean_steps), sy(p.mean_prob)))
                .collect();
            writeln!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
                line.join(" ")
            )
            .unwrap();
        }
        for p in points {
            writeln!(
                svg,
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3.5\" fill=\"{color}\"/>",
                sx(p.mean_steps),
                sy(p.mean_prob)
            )
            .unwrap();
        }
        writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{}</text>",
            ml + 10.0,
            mt + 16.0 + 16.0 * si as f64,
            xml_escape(name)
        )
        .unwrap();
    }
    writeln!(svg, "</svg>").unwrap();
    svg
}

fn format_steps(x: f64) -> String {
    if x >= 1e6 {
        format!("{:.1}M", x / 1e6)
    } else if x >= 1e3 {
        format!("{:.0}k", x / 1e3)
    } else {
        format!("{x:.0}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Reads CSVs and writes the combined plot.
pub fn write_plot(csv_paths: &[PathBuf], out: &Path) -> Result<(), HarnessError> {
    let mut series = Vec::new();
    for path in csv_paths {
        let name = path
            .parent()
            .and_then(|p| p.file_name())
            .or_else(|| path.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        series.push((name, read_curve_csv(path)?));
    }
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(out, plot_curves_svg(&series))?;
    Ok(())
}
