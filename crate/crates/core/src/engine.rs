//! Robot behavior and the tick loop.
//!
//! Every robot is always Stopping (parked in the nest), Searching (random
//! walk with avoidance, trying to pick objects up) or Returning (homing on
//! the origin, with or without an object). One [`Simulation`] owns a
//! [`World`], a clock and a single random stream; robots are advanced in
//! ascending id order and draw from that stream in the same order, which is
//! what makes a run reproducible from its seed.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::allocation::{
    AllocationError, AllocationState, Mode, ObjectType, ObjectUpdatePolicy, TaskAssignment, UpdateTarget, VdrParams,
};
use crate::arena::{bounce_heading, edge_follow_step, ArenaError, ContactFilter, ContactKind, Vec2, World};
use crate::num::{uniform, unit_draw, wrap_angle, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RobotPhase {
    Searching,
    Returning,
    Stopping,
}

/// Display color; purple when empty, orange with a type-1 object, blue with
/// a type-2 object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Purple,
    Orange,
    Blue,
}

impl Color {
    pub fn for_cargo(carried: Option<ObjectType>) -> Self {
        match carried {
            None => Color::Purple,
            Some(ObjectType::Type1) => Color::Orange,
            Some(ObjectType::Type2) => Color::Blue,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TripTally {
    pub successes: u32,
    pub failures: u32,
}

impl TripTally {
    pub fn total(&self) -> u32 {
        self.successes + self.failures
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Robot<S> {
    pub id: usize,
    pub position: Vec2<S>,
    /// Radians in `[0, 2π)`.
    pub heading: S,
    pub phase: RobotPhase,
    /// Mechanical pickup probability per object type. Fixed for the run.
    pub capability: [S; 2],
    pub alloc: AllocationState<S>,
    pub carried: Option<ObjectType>,
    /// Tick at which the current search times out.
    pub search_deadline: Option<u64>,
    /// Tick at which the current trip started.
    pub departed_at: Option<u64>,
    pub assignment: Option<TaskAssignment>,
    pub color: Color,
    pub trips: TripTally,
}

impl<S: Scalar> Robot<S> {
    pub fn new(id: usize, position: Vec2<S>, capability: [S; 2], alloc: AllocationState<S>) -> Self {
        Robot {
            id,
            position,
            heading: S::zero(),
            phase: RobotPhase::Stopping,
            capability,
            alloc,
            carried: None,
            search_deadline: None,
            departed_at: None,
            assignment: None,
            color: Color::Purple,
            trips: TripTally::default(),
        }
    }

    /// Parked robots and robots still inside the nest are ignored by
    /// robot-robot avoidance.
    #[inline]
    pub fn is_collidable(&self, nest_radius: S) -> bool {
        self.phase != RobotPhase::Stopping && self.position.norm() >= nest_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimClock<S> {
    pub tick_index: u64,
    pub tick_duration: S,
    pub horizon_ticks: u64,
}

impl<S: Scalar> SimClock<S> {
    /// Clock with `horizon / tick_duration` ticks, rounded to the nearest
    /// whole tick.
    pub fn new(tick_duration: S, horizon: S) -> Self {
        SimClock {
            tick_index: 0,
            tick_duration,
            horizon_ticks: seconds_to_ticks(horizon, tick_duration),
        }
    }

    pub fn now(&self) -> S {
        S::lit(self.tick_index as f64) * self.tick_duration
    }

    pub fn horizon(&self) -> S {
        S::lit(self.horizon_ticks as f64) * self.tick_duration
    }

    pub fn finished(&self) -> bool {
        self.tick_index >= self.horizon_ticks
    }
}

pub fn seconds_to_ticks<S: Scalar>(seconds: S, tick_duration: S) -> u64 {
    (seconds / tick_duration).round().as_f64().max(0.0) as u64
}

/// Per-run constants the behaviors need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams<S> {
    pub mode: Mode,
    pub search_timeout_ticks: u64,
    /// Stopped robots try to leave every this many ticks.
    pub leave_check_ticks: u64,
    pub leave_params: VdrParams<S>,
    pub obj_params: [VdrParams<S>; 2],
    pub object_updates: ObjectUpdatePolicy,
}

/// One line of the optional event log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub tick: u64,
    pub robot: usize,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    Leave {
        assignment: Option<ObjectType>,
    },
    Pickup {
        object_id: u64,
        obj_type: ObjectType,
    },
    Timeout,
    Deliver {
        carried: Option<ObjectType>,
    },
    Update {
        target: &'static str,
        p: f64,
        succ_streak: u32,
        fail_streak: u32,
    },
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Arena(#[from] ArenaError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error("invariant violated at tick {tick}: {detail}")]
    Invariant { tick: u64, detail: String },
    #[error("clock already at horizon")]
    PastHorizon,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimStats {
    /// Deliveries per object type.
    pub retrieved: [u64; 2],
    /// Ticks whose end-of-tick invariant check passed.
    pub invariant_checks: u64,
}

pub struct Simulation<S, R> {
    pub world: World<S>,
    pub clock: SimClock<S>,
    pub params: SimParams<S>,
    pub rng: R,
    pub stats: SimStats,
    log: Option<Vec<Event>>,
}

impl<S: Scalar, R: Rng> Simulation<S, R> {
    pub fn new(world: World<S>, clock: SimClock<S>, params: SimParams<S>, rng: R) -> Self {
        Simulation {
            world,
            clock,
            params,
            rng,
            stats: SimStats::default(),
            log: None,
        }
    }

    pub fn with_event_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn events(&self) -> Option<&[Event]> {
        self.log.as_deref()
    }

    pub fn take_events(&mut self) -> Option<Vec<Event>> {
        self.log.take()
    }

    fn emit(&mut self, robot: usize, kind: EventKind) {
        if let Some(log) = self.log.as_mut() {
            log.push(Event {
                tick: self.clock.tick_index,
                robot,
                kind,
            });
        }
    }

    #[inline]
    fn step_length(&self) -> S {
        self.world.config.robot_speed * self.clock.tick_duration
    }

    /// Runs ticks until the horizon.
    pub fn run(&mut self) -> Result<(), SimError> {
        while !self.clock.finished() {
            self.tick()?;
        }
        Ok(())
    }

    /// Advances every robot once in id order, then the clock, then checks
    /// the world invariants.
    pub fn tick(&mut self) -> Result<(), SimError> {
        if self.clock.finished() {
            return Err(SimError::PastHorizon);
        }
        for i in 0..self.world.robots.len() {
            match self.world.robots[i].phase {
                RobotPhase::Stopping => {
                    if self.clock.tick_index.is_multiple_of(self.params.leave_check_ticks) {
                        self.try_leave_nest(i)?;
                    }
                }
                RobotPhase::Searching => self.searching_step(i)?,
                RobotPhase::Returning => self.returning_step(i)?,
            }
        }
        self.clock.tick_index += 1;
        self.check_invariants()?;
        self.stats.invariant_checks += 1;
        Ok(())
    }

    /// One leave-nest check for a stopped robot. Draw order: leave decision,
    /// then (modified mode) task assignment, then departure heading.
    pub fn try_leave_nest(&mut self, i: usize) -> Result<(), SimError> {
        debug_assert_eq!(self.world.robots[i].phase, RobotPhase::Stopping);
        let u: S = unit_draw(&mut self.rng);
        if !self.world.robots[i].alloc.leave_nest_decision(u) {
            return Ok(());
        }
        let assignment = match self.params.mode {
            Mode::Original => None,
            Mode::Modified => {
                let a: S = unit_draw(&mut self.rng);
                Some(self.world.robots[i].alloc.assign_task(a)?)
            }
        };
        let heading = unit_draw::<S, R>(&mut self.rng) * S::two_pi();
        let now = self.clock.tick_index;
        let r = &mut self.world.robots[i];
        r.phase = RobotPhase::Searching;
        r.search_deadline = Some(now + self.params.search_timeout_ticks);
        r.departed_at = Some(now);
        r.heading = heading;
        r.assignment = assignment;
        self.emit(i, EventKind::Leave { assignment });
        Ok(())
    }

    /// One tick of searching: timeout check, contact handling, motion.
    pub fn searching_step(&mut self, i: usize) -> Result<(), SimError> {
        let now = self.clock.tick_index;
        if self.world.robots[i].search_deadline.is_some_and(|d| now >= d) {
            let r = &mut self.world.robots[i];
            r.phase = RobotPhase::Returning;
            r.search_deadline = None;
            self.emit(i, EventKind::Timeout);
            return Ok(());
        }
        let pos = self.world.robots[i].position;
        let radius = self.world.config.robot_radius;
        let contact = self.world.nearest_contact(
            pos,
            radius,
            ContactFilter {
                ignore_robot: Some(i),
                ignore_nest: false,
            },
        );
        match contact.map(|c| (c.kind, c.point)) {
            None => {
                let j = self.world.config.heading_jitter;
                let turn = uniform(&mut self.rng, -j, j);
                let r = &mut self.world.robots[i];
                r.heading = wrap_angle(r.heading + turn);
            }
            Some((ContactKind::Robot(j), other)) => {
                self.bounce(i, other);
                if self.world.robots[j].phase == RobotPhase::Searching {
                    self.bounce(j, pos);
                }
            }
            Some((ContactKind::Object(k), point)) => {
                let assigned = match self.params.mode {
                    Mode::Original => true,
                    Mode::Modified => self.world.robots[i].assignment == Some(self.world.objects[k].obj_type),
                };
                if assigned {
                    if self.pickup_attempt(i, k)? {
                        return Ok(());
                    }
                } else {
                    self.bounce(i, point);
                }
            }
            Some((ContactKind::Wall | ContactKind::Nest, point)) => self.bounce(i, point),
        }
        self.advance(i);
        Ok(())
    }

    /// Capability draw against a touched object. On success the object is
    /// taken and the robot starts returning; on failure it bounces off.
    /// Returns whether the pickup succeeded. Does not move the robot.
    pub fn pickup_attempt(&mut self, i: usize, k: usize) -> Result<bool, SimError> {
        let obj = self.world.objects[k];
        let u: S = unit_draw(&mut self.rng);
        let picked = u < self.world.robots[i].capability[obj.obj_type.index()];
        if self.params.mode == Mode::Modified && self.params.object_updates == ObjectUpdatePolicy::PerAttempt {
            let alloc =
                self.world.robots[i]
                    .alloc
                    .record_pickup_attempt(obj.obj_type, picked, &self.params.obj_params)?;
            self.world.robots[i].alloc = alloc;
            self.emit_update(i, UpdateTarget::Object(obj.obj_type), &alloc);
        }
        if picked {
            self.world.take_object(k);
            let r = &mut self.world.robots[i];
            r.carried = Some(obj.obj_type);
            r.color = Color::for_cargo(r.carried);
            r.phase = RobotPhase::Returning;
            r.search_deadline = None;
            self.emit(
                i,
                EventKind::Pickup {
                    object_id: obj.id,
                    obj_type: obj.obj_type,
                },
            );
            Ok(true)
        } else {
            self.bounce(i, obj.position);
            Ok(false)
        }
    }

    /// One tick of homing. Robots reverse off other robots, bounce off walls,
    /// follow the edge of objects in the way and cross the nest boundary
    /// freely. Entering the nest ends the trip.
    pub fn returning_step(&mut self, i: usize) -> Result<(), SimError> {
        if self.world.config.in_nest(self.world.robots[i].position) {
            return self.arrive(i);
        }
        let pos = self.world.robots[i].position;
        let radius = self.world.config.robot_radius;
        let filter = ContactFilter {
            ignore_robot: Some(i),
            ignore_nest: true,
        };
        let home = Vec2::zero();
        let aim = (home - pos).angle();
        let contact = self.world.nearest_contact(pos, radius, filter);
        match contact.map(|c| (c.kind, c.point)) {
            Some((ContactKind::Robot(_), _)) => {
                self.world.robots[i].heading = wrap_angle(aim + S::PI());
            }
            Some((ContactKind::Wall, point)) => self.bounce(i, point),
            Some((ContactKind::Object(_), point)) => {
                let c = self.world.config;
                self.world.robots[i].heading = edge_follow_step(pos, home, point, c.object_radius, &c).angle();
            }
            Some((ContactKind::Nest, _)) => unreachable!("nest ignored while returning"),
            None => {
                // Look one step ahead so a straight move never ends inside an
                // object's contact band.
                let ahead = pos + Vec2::from_angle(aim) * self.step_length();
                let c = self.world.config;
                let blocking = self
                    .world
                    .nearest_contact(ahead, radius, filter)
                    .and_then(|c| match c.kind {
                        ContactKind::Object(_) => Some(c.point),
                        _ => None,
                    });
                self.world.robots[i].heading = match blocking {
                    Some(point) => edge_follow_step(pos, home, point, c.object_radius, &c).angle(),
                    None => aim,
                };
            }
        }
        self.advance(i);
        if self.world.config.in_nest(self.world.robots[i].position) {
            self.arrive(i)?;
        }
        Ok(())
    }

    /// Ends a trip: drop and replace any carried object, update the
    /// allocation state, park the robot.
    fn arrive(&mut self, i: usize) -> Result<(), SimError> {
        let carried = self.world.robots[i].carried;
        let delivered = carried.is_some();
        if let Some(t) = carried {
            self.world.robots[i].carried = None;
            self.stats.retrieved[t.index()] += 1;
            self.world.spawn_object(t, &mut self.rng)?;
        }
        self.emit(i, EventKind::Deliver { carried });

        let current = self.world.robots[i].alloc;
        let (alloc, order) = match self.params.object_updates {
            ObjectUpdatePolicy::PerAttempt if self.params.mode == Mode::Modified => (
                current.record_leave_outcome(delivered, &self.params.leave_params),
                vec![UpdateTarget::Leave],
            ),
            _ => current.record_trip_outcome(
                self.world.robots[i].assignment,
                delivered,
                &self.params.leave_params,
                &self.params.obj_params,
            )?,
        };
        for target in order {
            self.emit_update(i, target, &alloc);
        }

        let r = &mut self.world.robots[i];
        r.alloc = alloc;
        if delivered {
            r.trips.successes += 1;
        } else {
            r.trips.failures += 1;
        }
        r.color = Color::Purple;
        r.phase = RobotPhase::Stopping;
        r.assignment = None;
        r.search_deadline = None;
        r.departed_at = None;
        Ok(())
    }

    fn emit_update(&mut self, i: usize, target: UpdateTarget, alloc: &AllocationState<S>) {
        let (name, state) = match target {
            UpdateTarget::Leave => ("leave", alloc.leave),
            UpdateTarget::Object(ObjectType::Type1) => ("obj1", alloc.obj[0]),
            UpdateTarget::Object(ObjectType::Type2) => ("obj2", alloc.obj[1]),
        };
        self.emit(
            i,
            EventKind::Update {
                target: name,
                p: state.p.as_f64(),
                succ_streak: state.succ_streak,
                fail_streak: state.fail_streak,
            },
        );
    }

    /// Re-aims robot `i` with a random heading pointing away from `point`
    /// (another robot or object center, or the closest boundary point). Any
    /// such heading strictly increases the distance to `point` over one tick.
    fn bounce(&mut self, i: usize, point: Vec2<S>) {
        let pos = self.world.robots[i].position;
        let current = self.world.robots[i].heading;
        let normal = (pos - point)
            .normalized()
            .or_else(|| (-pos).normalized())
            .unwrap_or(Vec2::new(S::one(), S::zero()));
        let heading = bounce_heading(current, &mut self.rng, normal.angle(), |h| {
            Vec2::from_angle(h).dot(normal) > S::zero()
        });
        self.world.robots[i].heading = heading;
    }

    /// Moves robot `i` one tick along its heading, clamped inside the walls.
    fn advance(&mut self, i: usize) {
        let step = self.step_length();
        let c = self.world.config;
        let r = &mut self.world.robots[i];
        let next = r.position + Vec2::from_angle(r.heading) * step;
        r.position = c.contain(next, c.robot_radius);
    }

    /// Conservation, containment, nest exclusion, cargo/phase/color
    /// consistency and the search timeout bound.
    pub fn check_invariants(&self) -> Result<(), SimError> {
        let tick = self.clock.tick_index;
        let fail = |detail: String| Err(SimError::Invariant { tick, detail });
        let w = &self.world;
        let c = &w.config;
        for t in ObjectType::ALL {
            let free = w.free_count(t);
            let carried = w.carried_count(t);
            if free + carried != w.totals[t.index()] {
                return fail(format!(
                    "{t:?}: free {free} + carried {carried} != total {}",
                    w.totals[t.index()]
                ));
            }
        }
        for o in &w.objects {
            if !c.is_contained(o.position, c.object_radius) {
                return fail(format!("object {} outside the arena", o.id));
            }
            if o.position.norm() <= c.nest_radius + c.object_radius {
                return fail(format!("object {} inside the nest", o.id));
            }
        }
        for r in &w.robots {
            if !r.position.is_finite() || !c.is_contained(r.position, c.robot_radius) {
                return fail(format!("robot {} outside the arena", r.id));
            }
            if r.carried.is_some() && r.phase != RobotPhase::Returning {
                return fail(format!("robot {} carries while {:?}", r.id, r.phase));
            }
            if r.color != Color::for_cargo(r.carried) {
                return fail(format!("robot {} color {:?} with cargo {:?}", r.id, r.color, r.carried));
            }
            if r.phase == RobotPhase::Stopping && !c.in_nest(r.position) {
                return fail(format!("robot {} stopped outside the nest", r.id));
            }
            if r.phase == RobotPhase::Searching {
                let since = r.departed_at.map_or(0, |d| tick.saturating_sub(d));
                if since > self.params.search_timeout_ticks + 1 {
                    return fail(format!("robot {} searching for {since} ticks", r.id));
                }
            }
            if !(r.alloc.leave.p >= self.params.leave_params.p_min && r.alloc.leave.p <= self.params.leave_params.p_max)
            {
                return fail(format!("robot {} leave probability out of range", r.id));
            }
        }
        Ok(())
    }
}

/// Summary of a passed trace audit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AuditSummary {
    pub trips_completed: usize,
    pub departures: usize,
    pub longest_search_ticks: u64,
}

/// Replays an event log and checks that every robot only makes legal phase
/// transitions, never searches longer than `search_timeout_ticks + 1`,
/// updates its leave state exactly once per completed trip and only updates
/// pickup states while searching or at the end of a trip.
pub fn audit_trace(
    events: &[Event],
    robot_count: usize,
    search_timeout_ticks: u64,
    final_tick: u64,
) -> Result<AuditSummary, String> {
    let mut phase = vec![RobotPhase::Stopping; robot_count];
    let mut departed = vec![0u64; robot_count];
    let mut pending_leave_update = vec![false; robot_count];
    let mut summary = AuditSummary::default();
    let bound = search_timeout_ticks + 1;

    for e in events {
        let r = e.robot;
        if r >= robot_count {
            return Err(format!("event for unknown robot {r}"));
        }
        let illegal = |from: RobotPhase, what: &str| Err(format!("tick {}: robot {r} {what} while {from:?}", e.tick));
        match &e.kind {
            EventKind::Leave { .. } => {
                if phase[r] != RobotPhase::Stopping {
                    return illegal(phase[r], "left the nest");
                }
                if pending_leave_update[r] {
                    return Err(format!("robot {r} left before its trip was recorded"));
                }
                phase[r] = RobotPhase::Searching;
                departed[r] = e.tick;
                summary.departures += 1;
            }
            EventKind::Pickup { .. } | EventKind::Timeout => {
                if phase[r] != RobotPhase::Searching {
                    return illegal(phase[r], "ended a search");
                }
                let searched = e.tick - departed[r];
                if searched > bound {
                    return Err(format!("robot {r} searched {searched} ticks > {bound}"));
                }
                summary.longest_search_ticks = summary.longest_search_ticks.max(searched);
                phase[r] = RobotPhase::Returning;
            }
            EventKind::Deliver { .. } => {
                if phase[r] != RobotPhase::Returning {
                    return illegal(phase[r], "arrived");
                }
                phase[r] = RobotPhase::Stopping;
                pending_leave_update[r] = true;
                summary.trips_completed += 1;
            }
            EventKind::Update { target, .. } => {
                if *target == "leave" {
                    if !pending_leave_update[r] {
                        return Err(format!("robot {r} leave update without a trip"));
                    }
                    pending_leave_update[r] = false;
                } else if !pending_leave_update[r] && phase[r] != RobotPhase::Searching {
                    return Err(format!("robot {r} {target} update outside a trip"));
                }
            }
        }
    }
    for (r, p) in phase.iter().enumerate() {
        if pending_leave_update[r] {
            return Err(format!("robot {r} trip never recorded"));
        }
        if *p == RobotPhase::Searching && final_tick - departed[r] > bound {
            return Err(format!("robot {r} still searching past the timeout"));
        }
    }
    Ok(summary)
}
