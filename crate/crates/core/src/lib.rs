//! Classification-based automatic curriculum learning for goal-directed
//! navigation in procedurally generated 2D scenes.
//!
//! The pieces, bottom-up:
//!
//! - [`world`]: occupancy-grid scenes, geodesic and clearance queries, task sampling.
//! - [`features`]: the eight geometric task properties.
//! - [`predictor`]: the success predictor and its adaptive difficulty statistics.
//! - [`curriculum`]: uniform, intermediate-difficulty and adaptive task selection.
//! - [`env`]: episode dynamics, observations and the shaped reward.
//! - [`ppo`]: actor-critic policy, advantage estimation and clipped updates.
//! - [`metrics`]: success rate, SPL and curriculum diagnostics.
//! - [`harness`]: configuration, training/ablation orchestration, plots and the CLI.

pub mod checkpoint;
pub mod curriculum;
pub mod env;
pub mod error;
pub mod features;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod ppo;
pub mod predictor;
pub mod seeding;
pub mod world;

pub use error::{Error, Result};

