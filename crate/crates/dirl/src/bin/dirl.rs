//! Command-line front end: compile specifications, run planner sweeps,
//! re-evaluate recorded runs, and plot learning curves.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dirl::harness::{
    self, run_experiment, write_plot, ExperimentConfig, ResolvedTask,
};

#[derive(Parser)]
#[command(
    name = "dirl",
    version,
    about = "Compositional reinforcement learning from task specifications"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a specification and print its abstract graph.
    Compile {
        /// Specification preset (e.g. rooms9/phi3), file, or inline DSL.
        #[arg(long)]
        spec: String,
        /// Layout preset (e.g. rooms9) or layout file.
        #[arg(long, default_value = "rooms9")]
        env: String,
        /// Also write a Graphviz dump here.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Run planner sweeps and append learning-curve rows.
    Run(RunArgs),
    /// Re-evaluate a recorded run directory with fresh rollouts.
    Eval {
        /// Run directory containing manifest.json.
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 1000)]
        rollouts: usize,
        #[arg(long, default_value_t = 12345)]
        seed: u64,
    },
    /// Render learning-curve CSVs as a static SVG.
    Plot {
        /// Curve CSV files (one series each).
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long, default_value = "curve.svg")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    spec: Option<String>,
    /// Per-edge episode budgets, ascending (comma-separated).
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    est_rollouts: Option<usize>,
    #[arg(long)]
    eval_rollouts: Option<usize>,
    /// Output root; defaults to $DIRL_OUT or ./runs.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Compile { spec, env, dot } => compile_cmd(&spec, &env, dot),
        Command::Run(args) => run_cmd(args),
        Command::Eval { run, rollouts, seed } => eval_cmd(&run, rollouts, seed),
        Command::Plot { csv, out } => {
            write_plot(&csv, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn compile_cmd(spec: &str, env: &str, dot: Option<PathBuf>) -> Result<()> {
    let task: ResolvedTask = harness::resolve_task(env, spec)?;
    println!("environment: {}", task.env_label);
    println!("specification {} ({} operators): {}", task.spec_label, task.spec.size(), task.spec);
    println!();
    print!("{}", task.graph.to_text());
    println!(
        "summary: {} vertices, {} edges, {} final",
        task.graph.vertex_count(),
        task.graph.edge_count(),
        task.graph.finals().len()
    );
    if let Some(path) = dot {
        std::fs::write(&path, task.graph.to_dot())
            .with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn out_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("DIRL_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn run_cmd(args: RunArgs) -> Result<()> {
    let mut cfg: ExperimentConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_toml(&text)?
        }
        None => {
            let (Some(env), Some(spec), Some(k)) = (&args.env, &args.spec, &args.k) else {
                bail!("without --config, all of --env, --spec and --k are required");
            };
            ExperimentConfig {
                name: None,
                env: env.clone(),
                spec: spec.clone(),
                k_sweep: k.clone(),
                reps: 1,
                seed: 0,
                est_rollouts: 200,
                eval_rollouts: 1000,
                reach_buffer: 500,
                reach_min_successes: 50,
                reach_cap_factor: 20,
                ars: Default::default(),
            }
        }
    };
    if let Some(env) = args.env {
        cfg.env = env;
    }
    if let Some(spec) = args.spec {
        cfg.spec = spec;
    }
    if let Some(k) = args.k {
        cfg.k_sweep = k;
    }
    if let Some(reps) = args.reps {
        cfg.reps = reps;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.est_rollouts {
        cfg.est_rollouts = n;
    }
    if let Some(n) = args.eval_rollouts {
        cfg.eval_rollouts = n;
    }

    let root = out_root(args.out);
    let summary = run_experiment(&cfg, &root)?;
    for row in &summary.rows {
        if row.is_ok() {
            println!(
                "k={:<7} steps={:<9} success={:.3} +/- {:.3}  cost={:.4} certificate={:.4} seed={}",
                row.k, row.total_steps, row.success_prob, row.success_se, row.cost,
                row.certificate, row.seed
            );
        } else {
            println!("k={:<7} planner failure (seed={})", row.k, row.seed);
        }
    }
    println!("curve: {}", summary.csv_path.display());
    println!("runs:  {}", summary.exp_dir.display());
    if summary.failures > 0 {
        eprintln!("{} run(s) recorded a planner failure", summary.failures);
        std::process::exit(1);
    }
    Ok(())
}

fn eval_cmd(run: &PathBuf, rollouts: usize, seed: u64) -> Result<()> {
    let (manifest, eval, check) = harness::reload_and_evaluate(run, rollouts, seed)?;
    println!(
        "run: {} {} k={} rep={} (recorded success {:.3})",
        manifest.env_label,
        manifest.spec_label,
        manifest.k,
        manifest.rep,
        manifest.eval.map(|e| e.success_prob).unwrap_or(f64::NAN)
    );
    println!(
        "re-evaluation: success={:.4} +/- {:.4} over {} rollouts",
        eval.success_prob, eval.std_error, eval.rollouts
    );
    println!(
        "certificate: exp(-cost)={:.4}, lower bound {:.4}, {}",
        check.certificate,
        check.lower_bound,
        if check.satisfied { "satisfied" } else { "VIOLATED" }
    );
    if !check.satisfied {
        std::process::exit(1);
    }
    Ok(())
}
