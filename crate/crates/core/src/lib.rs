//! Deterministic 2D foraging simulator for self-organized task allocation.
//!
//! Robots leave a central nest with a learned probability, search a square
//! arena for two types of object and bring them home. The leave probability,
//! and in modified mode one pickup probability per object type, are adapted
//! with the variable delta rule in [`allocation`]. The rest of the crate is
//! the arena geometry, the per-robot state machine, a seeded batch runner,
//! the post-run analyses and the output bundle written by the `forage` CLI.
//!
//! Core types are generic over the scalar type; the aliases below fix it to
//! `f64`, which is what the config loader and the CLI use.

// Negated comparisons reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod analysis;
pub mod arena;
pub mod bundle;
pub mod config;
pub mod engine;
pub mod experiment;
pub mod num;
pub mod testing;

pub use allocation::{AllocationState as GenericAllocationState, Mode, ObjectType, TaskAssignment};
pub use analysis::{Preference, Region};
pub use config::{load_config, parse_config, preset, write_config, LoadError};
pub use experiment::{run_batch, run_experiment, run_replication, ExperimentError};
pub use num::{Probability, Scalar};

pub type Vec2 = arena::Vec2<f64>;
pub type VdrParams = allocation::VdrParams<f64>;
pub type VdrState = allocation::VdrState<f64>;
pub type AllocationState = allocation::AllocationState<f64>;
pub type ArenaConfig = arena::ArenaConfig<f64>;
pub type World = arena::World<f64>;
pub type WorldObject = arena::WorldObject<f64>;
pub type Robot = engine::Robot<f64>;
pub type ExperimentConfig = experiment::ExperimentConfig<f64>;
pub type RunResult = experiment::RunResult<f64>;
pub type ClassificationReport = analysis::ClassificationReport<f64>;
