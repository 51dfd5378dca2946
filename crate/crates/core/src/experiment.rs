//! Experiment configuration and the seeded batch runner.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::allocation::{AllocationError, AllocationState, Mode, ObjectType, ObjectUpdatePolicy, VdrParams};
use crate::arena::{ArenaConfig, ArenaError, Vec2, World};
use crate::engine::{seconds_to_ticks, Event, Robot, SimClock, SimError, SimParams, Simulation, TripTally};
use crate::num::{unit_draw, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig<S> {
    pub mode: Mode,
    pub robot_count: usize,
    pub object_totals: [usize; 2],
    /// Seconds.
    pub horizon: S,
    /// Seconds a robot may search before heading home.
    pub search_timeout: S,
    /// Seconds per tick.
    pub tick_duration: S,
    /// Seconds between leave-nest checks of a stopped robot.
    pub leave_check_interval: S,
    pub leave_params: VdrParams<S>,
    pub obj_params: [VdrParams<S>; 2],
    pub object_updates: ObjectUpdatePolicy,
    pub arena: ArenaConfig<S>,
    pub seed: u64,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{key}: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

impl<S: Scalar> ExperimentConfig<S> {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.robot_count == 0 {
            return Err(ConfigError::invalid("robot_count", "must be > 0"));
        }
        if self.object_totals[0] == 0 {
            return Err(ConfigError::invalid("objects_type1", "must be > 0"));
        }
        if self.object_totals[1] == 0 {
            return Err(ConfigError::invalid("objects_type2", "must be > 0"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(ConfigError::invalid("seed", "must be at most 2^63 - 1"));
        }
        if self.replications == 0 {
            return Err(ConfigError::invalid("replications", "must be >= 1"));
        }
        let positive = |key: &str, v: S| {
            if v.is_finite() && v > S::zero() {
                Ok(())
            } else {
                Err(ConfigError::invalid(key, "must be finite and > 0"))
            }
        };
        if !(self.horizon.is_finite() && self.horizon >= S::zero()) {
            return Err(ConfigError::invalid("horizon", "must be finite and >= 0"));
        }
        positive("search_timeout", self.search_timeout)?;
        positive("tick_duration", self.tick_duration)?;
        positive("leave_check_interval", self.leave_check_interval)?;
        if self.leave_check_interval < self.tick_duration {
            return Err(ConfigError::invalid(
                "leave_check_interval",
                "must be at least one tick_duration",
            ));
        }
        check_vdr("p1", &self.leave_params)?;
        check_vdr("pobj1", &self.obj_params[0])?;
        check_vdr("pobj2", &self.obj_params[1])?;
        if self.obj_params.iter().any(|p| !(p.p_min > S::zero())) {
            return Err(ConfigError::invalid(
                "pobj1_min/pobj2_min",
                "must be > 0 so task assignment is defined",
            ));
        }
        self.arena
            .validate()
            .map_err(|e| ConfigError::invalid("arena", e.to_string()))
    }

    pub fn sim_params(&self) -> SimParams<S> {
        SimParams {
            mode: self.mode,
            search_timeout_ticks: seconds_to_ticks(self.search_timeout, self.tick_duration),
            leave_check_ticks: seconds_to_ticks(self.leave_check_interval, self.tick_duration).max(1),
            leave_params: self.leave_params,
            obj_params: self.obj_params,
            object_updates: self.object_updates,
        }
    }
}

/// Validates one VDR parameter block, naming the offending keys.
fn check_vdr<S: Scalar>(prefix: &str, p: &VdrParams<S>) -> Result<(), ConfigError> {
    let k = |s: &str| format!("{prefix}_{s}");
    let finite = [p.p_max, p.p_min, p.p_initial, p.delta];
    if finite.iter().any(|v| !v.is_finite()) {
        return Err(ConfigError::invalid(prefix, "values must be finite"));
    }
    if p.p_min > p.p_max {
        return Err(ConfigError::invalid(
            format!("{}/{}", k("min"), k("max")),
            format!("{} > {}", k("min"), k("max")),
        ));
    }
    p.validate().map_err(|e| match e {
        AllocationError::InvalidParams(reason) => ConfigError::invalid(prefix, reason),
        other => ConfigError::invalid(prefix, other.to_string()),
    })
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Arena(#[from] ArenaError),
    #[error("replication {replication}: {source}")]
    Sim {
        replication: usize,
        #[source]
        source: SimError,
    },
}

/// Outcome of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult<S> {
    pub replication: usize,
    pub seed: u64,
    pub mode: Mode,
    pub final_p1: Vec<S>,
    /// Final pickup probabilities per robot; only learned in modified mode.
    pub final_pobj: Vec<[S; 2]>,
    pub capabilities: Vec<[S; 2]>,
    pub trips: Vec<TripTally>,
    pub retrieved: [u64; 2],
    pub ticks: u64,
    /// Ticks whose invariant check passed.
    pub invariant_checks: u64,
}

impl<S: Scalar> RunResult<S> {
    pub fn robot_count(&self) -> usize {
        self.final_p1.len()
    }

    pub fn final_pobj_of(&self, t: ObjectType) -> Vec<S> {
        self.final_pobj.iter().map(|p| p[t.index()]).collect()
    }
}

/// Random stream for one replication: ChaCha8 keyed by the seed, with the
/// replication index as the stream id.
pub fn replication_rng(seed: u64, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64);
    rng
}

/// Builds the starting world: robots parked at uniform random points inside
/// the nest with capabilities uniform on `[0, 1]`, then all type-1 objects,
/// then all type-2 objects.
pub fn build_world<S: Scalar, R: Rng + ?Sized>(
    config: &ExperimentConfig<S>,
    rng: &mut R,
) -> Result<World<S>, ArenaError> {
    let mut world = World::new(config.arena, config.object_totals)?;
    let a = &config.arena;
    let parking = a.nest_radius - a.robot_radius;
    for id in 0..config.robot_count {
        let r = parking * unit_draw::<S, R>(rng).sqrt();
        let theta = unit_draw::<S, R>(rng) * S::two_pi();
        let pos = Vec2::from_angle(theta) * r;
        let capability = [unit_draw::<S, R>(rng), unit_draw::<S, R>(rng)];
        let alloc = AllocationState::new(config.mode, &config.leave_params, &config.obj_params);
        world.robots.push(Robot::new(id, pos, capability, alloc));
    }
    for t in ObjectType::ALL {
        for _ in 0..config.object_totals[t.index()] {
            world.spawn_object(t, rng)?;
        }
    }
    Ok(world)
}

/// Constructs the simulation for one replication without running it.
pub fn prepare<S: Scalar>(
    config: &ExperimentConfig<S>,
    replication: usize,
) -> Result<Simulation<S, ChaCha8Rng>, ExperimentError> {
    config.validate()?;
    let mut rng = replication_rng(config.seed, replication);
    let world = build_world(config, &mut rng)?;
    let clock = SimClock::new(config.tick_duration, config.horizon);
    Ok(Simulation::new(world, clock, config.sim_params(), rng))
}

/// A run result and, when requested, its event log.
pub type Replication<S> = (RunResult<S>, Option<Vec<Event>>);

/// Runs one replication to the horizon. With `log_events` the full event
/// log is returned alongside the result.
pub fn run_replication<S: Scalar>(
    config: &ExperimentConfig<S>,
    replication: usize,
    log_events: bool,
) -> Result<Replication<S>, ExperimentError> {
    let mut sim = prepare(config, replication)?;
    if log_events {
        sim = sim.with_event_log();
    }
    sim.run()
        .map_err(|source| ExperimentError::Sim { replication, source })?;
    let robots = &sim.world.robots;
    let result = RunResult {
        replication,
        seed: config.seed,
        mode: config.mode,
        final_p1: robots.iter().map(|r| r.alloc.leave.p).collect(),
        final_pobj: robots.iter().map(|r| [r.alloc.obj[0].p, r.alloc.obj[1].p]).collect(),
        capabilities: robots.iter().map(|r| r.capability).collect(),
        trips: robots.iter().map(|r| r.trips).collect(),
        retrieved: sim.stats.retrieved,
        ticks: sim.clock.tick_index,
        invariant_checks: sim.stats.invariant_checks,
    };
    Ok((result, sim.take_events()))
}

/// Runs replication 0 of `config`.
pub fn run_experiment<S: Scalar>(config: &ExperimentConfig<S>) -> Result<RunResult<S>, ExperimentError> {
    run_replication(config, 0, false).map(|(r, _)| r)
}

/// Runs every replication in parallel. Results come back in replication
/// order regardless of scheduling.
pub fn run_batch<S: Scalar>(
    config: &ExperimentConfig<S>,
    log_events: bool,
) -> Result<Vec<Replication<S>>, ExperimentError> {
    config.validate()?;
    (0..config.replications)
        .into_par_iter()
        .map(|rep| run_replication(config, rep, log_events))
        .collect()
}
