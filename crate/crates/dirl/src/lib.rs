//! Compositional reinforcement learning from SPECTRL task specifications.
//!
//! The pipeline: parse a specification over `reach`/`avoid` predicates
//! ([`spec_lang`]), compile it into an abstract reachability graph
//! ([`graph`]), then interleave Dijkstra-style planning over that graph with
//! per-edge policy learning ([`planner`] + [`ars`]) in a continuous
//! multi-room environment ([`rooms`]). The planner returns a path policy
//! together with a certified lower bound `exp(-c(rho))` on its satisfaction
//! probability, which the evaluation harness checks empirically.
//!
//! # Quick start
//!
//! ```
//! use dirl::presets;
//! use dirl::graph::compile;
//! use dirl::spec_lang::parse_spec;
//!
//! let layout = presets::layout("rooms9").unwrap();
//! let spec = parse_spec("(reach(2,0) or reach(0,2)); reach(2,2)", &layout).unwrap();
//! let g = compile(&spec);
//! assert_eq!(g.vertex_count(), 4);
//! assert_eq!(g.edge_count(), 4);
//! ```
//!
//! # Runnable examples
//!
//! One example per major capability (run with
//! `cargo run -p dirl --release --example <name>`):
//!
//! * `compile_spec` — parse a specification and dump its abstract graph.
//! * `check_trajectory` — evaluate quantitative semantics and satisfaction
//!   of a hand-built trajectory, both against the specification and against
//!   its compiled graph.
//! * `rooms_rollout` — drive the rooms environment with a waypoint
//!   controller.
//! * `train_edge` — learn a single-edge policy with augmented random search.
//! * `plan_rooms9` — full planner run on a 9-rooms task, with the
//!   satisfaction-probability certificate.
//! * `learning_curve` — sweep per-edge budgets, emit CSV and an SVG curve.
//!
//! The `dirl` binary wraps the same functionality as `compile`, `run`,
//! `eval`, and `plot` subcommands.

pub mod ars;
pub mod graph;
pub mod harness;
pub mod planner;
pub mod presets;
pub(crate) mod rng;
pub mod rooms;
pub mod shaping;
pub mod spec_lang;
pub mod types;

pub use types::{Action, Point};
