//! Arena geometry: a square field with a circular nest at the origin,
//! circular robots and objects, contact queries and the two avoidance
//! maneuvers (random bounce and edge following).

use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use thiserror::Error;

use crate::allocation::ObjectType;
use crate::engine::{Robot, RobotPhase};
use crate::num::{uniform, unit_draw, wrap_angle, Scalar};

/// Rejection-sampling budget for placing one object.
pub const SPAWN_ATTEMPTS: usize = 10_000;

/// Random headings tried by [`bounce_heading`] before falling back.
pub const BOUNCE_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<S> {
    pub x: S,
    pub y: S,
}

impl<S: Scalar> Vec2<S> {
    #[inline]
    pub fn new(x: S, y: S) -> Self {
        Vec2 { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Vec2::new(S::zero(), S::zero())
    }

    /// Unit vector at `angle` radians from the +x axis.
    #[inline]
    pub fn from_angle(angle: S) -> Self {
        let (s, c) = angle.sin_cos();
        Vec2::new(c, s)
    }

    #[inline]
    pub fn dot(self, o: Self) -> S {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn norm_sq(self) -> S {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> S {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn distance(self, o: Self) -> S {
        (self - o).norm()
    }

    /// Angle in `[0, 2π)`.
    #[inline]
    pub fn angle(self) -> S {
        wrap_angle(self.y.atan2(self.x))
    }

    /// Unit vector in the same direction, or `None` for a zero vector.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > S::zero() && n.is_finite() {
            Some(Vec2::new(self.x / n, self.y / n))
        } else {
            None
        }
    }

    /// Counter-clockwise quarter turn.
    #[inline]
    pub fn perp_ccw(self) -> Self {
        Vec2::new(-self.y, self.x)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl<S: Scalar> Add for Vec2<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl<S: Scalar> Sub for Vec2<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl<S: Scalar> Mul<S> for Vec2<S> {
    type Output = Self;
    fn mul(self, k: S) -> Self {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl<S: Scalar> Neg for Vec2<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec2::new(-self.x, -self.y)
    }
}

/// Geometry and kinematics of the arena.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArenaConfig<S> {
    pub arena_half_width: S,
    pub nest_radius: S,
    pub robot_radius: S,
    pub object_radius: S,
    /// Length units per second.
    pub robot_speed: S,
    pub contact_margin: S,
    /// Half-width of the uniform heading perturbation applied each tick.
    pub heading_jitter: S,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArenaError {
    #[error("invalid arena geometry: {0}")]
    InvalidConfig(&'static str),
    #[error("could not place a {obj_type:?} object after {attempts} attempts")]
    SpawnInfeasible { obj_type: ObjectType, attempts: usize },
}

impl<S: Scalar> ArenaConfig<S> {
    pub fn validate(&self) -> Result<(), ArenaError> {
        let positive = [
            self.arena_half_width,
            self.nest_radius,
            self.robot_radius,
            self.object_radius,
            self.robot_speed,
            self.contact_margin,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > S::zero())) {
            return Err(ArenaError::InvalidConfig(
                "lengths, speed and contact margin must be finite and > 0",
            ));
        }
        if !(self.heading_jitter.is_finite() && self.heading_jitter >= S::zero()) {
            return Err(ArenaError::InvalidConfig("heading_jitter must be >= 0"));
        }
        let two = S::lit(2.0);
        if !(self.nest_radius + two * self.object_radius < self.arena_half_width) {
            return Err(ArenaError::InvalidConfig(
                "nest_radius + 2 * object_radius must be < arena_half_width",
            ));
        }
        Ok(())
    }

    /// Coordinate limit for the center of a disc of radius `r`.
    #[inline]
    pub fn inner_limit(&self, r: S) -> S {
        self.arena_half_width - r
    }

    /// Clamps a disc center so the disc stays inside the walls.
    pub fn contain(&self, p: Vec2<S>, r: S) -> Vec2<S> {
        let lim = self.inner_limit(r);
        Vec2::new(p.x.max(-lim).min(lim), p.y.max(-lim).min(lim))
    }

    #[inline]
    pub fn is_contained(&self, p: Vec2<S>, r: S) -> bool {
        let lim = self.inner_limit(r);
        p.x.abs() <= lim && p.y.abs() <= lim
    }

    #[inline]
    pub fn in_nest(&self, p: Vec2<S>) -> bool {
        p.norm() < self.nest_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldObject<S> {
    pub id: u64,
    pub obj_type: ObjectType,
    pub position: Vec2<S>,
}

/// What a robot is too close to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContactKind {
    /// Index into `World::robots`.
    Robot(usize),
    Wall,
    Nest,
    /// Index into `World::objects`.
    Object(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact<S> {
    pub kind: ContactKind,
    /// Other robot or object center, or the closest boundary point.
    pub point: Vec2<S>,
    /// Distance from the robot center to `point`.
    pub distance: S,
}

/// Controls which contacts a query reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ContactFilter {
    /// Usually the querying robot itself.
    pub ignore_robot: Option<usize>,
    /// Returning robots cross the nest boundary freely.
    pub ignore_nest: bool,
}

/// The arena and everything in it.
#[derive(Debug, Clone, PartialEq)]
pub struct World<S> {
    pub config: ArenaConfig<S>,
    /// Free objects, in spawn order.
    pub objects: Vec<WorldObject<S>>,
    /// Robots indexed by id.
    pub robots: Vec<Robot<S>>,
    /// Configured total per object type (free plus carried).
    pub totals: [usize; 2],
    next_object_id: u64,
}

impl<S: Scalar> World<S> {
    pub fn new(config: ArenaConfig<S>, totals: [usize; 2]) -> Result<Self, ArenaError> {
        config.validate()?;
        Ok(World {
            config,
            objects: Vec::new(),
            robots: Vec::new(),
            totals,
            next_object_id: 0,
        })
    }

    pub fn free_count(&self, t: ObjectType) -> usize {
        self.objects.iter().filter(|o| o.obj_type == t).count()
    }

    pub fn carried_count(&self, t: ObjectType) -> usize {
        self.robots.iter().filter(|r| r.carried == Some(t)).count()
    }

    /// Places one new object of `obj_type` uniformly at random outside the
    /// nest and away from every free object.
    pub fn spawn_object<R: Rng + ?Sized>(
        &mut self,
        obj_type: ObjectType,
        rng: &mut R,
    ) -> Result<WorldObject<S>, ArenaError> {
        let c = &self.config;
        let lim = c.inner_limit(c.object_radius);
        let nest_clear = c.nest_radius + c.object_radius + c.contact_margin;
        let min_gap = S::lit(2.0) * c.object_radius;
        for _ in 0..SPAWN_ATTEMPTS {
            let x = uniform(rng, -lim, lim);
            let y = uniform(rng, -lim, lim);
            let p = Vec2::new(x, y);
            if p.norm() <= nest_clear {
                continue;
            }
            if self.objects.iter().any(|o| o.position.distance(p) < min_gap) {
                continue;
            }
            let obj = WorldObject {
                id: self.next_object_id,
                obj_type,
                position: p,
            };
            self.next_object_id += 1;
            self.objects.push(obj);
            return Ok(obj);
        }
        Err(ArenaError::SpawnInfeasible {
            obj_type,
            attempts: SPAWN_ATTEMPTS,
        })
    }

    /// Removes and returns the free object at `index`.
    pub fn take_object(&mut self, index: usize) -> WorldObject<S> {
        self.objects.remove(index)
    }

    /// Highest-priority contact for a disc at `pos` with radius `radius`.
    ///
    /// Priority is robot, then wall, then nest boundary, then object; within
    /// one kind the closest wins. Only robots that are out of the nest and
    /// not stopped take part in robot contacts.
    pub fn nearest_contact(&self, pos: Vec2<S>, radius: S, filter: ContactFilter) -> Option<Contact<S>> {
        let c = &self.config;
        let margin = c.contact_margin;

        let mut best: Option<Contact<S>> = None;
        for (i, other) in self.robots.iter().enumerate() {
            if Some(i) == filter.ignore_robot || !other.is_collidable(c.nest_radius) {
                continue;
            }
            let d = pos.distance(other.position);
            if d < radius + c.robot_radius + margin && best.is_none_or(|b| d < b.distance) {
                best = Some(Contact {
                    kind: ContactKind::Robot(i),
                    point: other.position,
                    distance: d,
                });
            }
        }
        if best.is_some() {
            return best;
        }

        let h = c.arena_half_width;
        let walls = [
            (h - pos.x, Vec2::new(h, pos.y)),
            (pos.x + h, Vec2::new(-h, pos.y)),
            (h - pos.y, Vec2::new(pos.x, h)),
            (pos.y + h, Vec2::new(pos.x, -h)),
        ];
        for (d, point) in walls {
            if d < radius + margin && best.is_none_or(|b| d < b.distance) {
                best = Some(Contact {
                    kind: ContactKind::Wall,
                    point,
                    distance: d,
                });
            }
        }
        if best.is_some() {
            return best;
        }

        if !filter.ignore_nest {
            let r = pos.norm();
            if r >= c.nest_radius && r - c.nest_radius < radius + margin {
                let dir = pos.normalized().unwrap_or(Vec2::new(S::one(), S::zero()));
                return Some(Contact {
                    kind: ContactKind::Nest,
                    point: dir * c.nest_radius,
                    distance: r - c.nest_radius,
                });
            }
        }

        for (i, o) in self.objects.iter().enumerate() {
            let d = pos.distance(o.position);
            if d < radius + c.object_radius + margin && best.is_none_or(|b| d < b.distance) {
                best = Some(Contact {
                    kind: ContactKind::Object(i),
                    point: o.position,
                    distance: d,
                });
            }
        }
        best
    }

    /// Number of robots in each phase, indexed Searching, Returning, Stopping.
    pub fn phase_counts(&self) -> [usize; 3] {
        let mut n = [0; 3];
        for r in &self.robots {
            n[match r.phase {
                RobotPhase::Searching => 0,
                RobotPhase::Returning => 1,
                RobotPhase::Stopping => 2,
            }] += 1;
        }
        n
    }
}

/// Draws random headings until `clear` accepts one; after
/// [`BOUNCE_REDRAWS`] rejections returns `away_heading` exactly.
pub fn bounce_heading<S, R, F>(_current_heading: S, rng: &mut R, away_heading: S, mut clear: F) -> S
where
    S: Scalar,
    R: Rng + ?Sized,
    F: FnMut(S) -> bool,
{
    for _ in 0..BOUNCE_REDRAWS {
        let h = unit_draw::<S, R>(rng) * S::two_pi();
        if clear(h) {
            return h;
        }
    }
    wrap_angle(away_heading)
}

/// Tangent direction around a circular obstacle that turns least away from
/// the goal. Ties go to the counter-clockwise tangent.
pub fn edge_follow_step<S: Scalar>(
    robot_position: Vec2<S>,
    goal: Vec2<S>,
    obstacle_center: Vec2<S>,
    _obstacle_radius: S,
    _config: &ArenaConfig<S>,
) -> Vec2<S> {
    let radial = (obstacle_center - robot_position)
        .normalized()
        .unwrap_or(Vec2::new(S::one(), S::zero()));
    let to_goal = (goal - robot_position).normalized().unwrap_or(Vec2::zero());
    let ccw = radial.perp_ccw();
    let cw = -ccw;
    if cw.dot(to_goal) > ccw.dot(to_goal) {
        cw
    } else {
        ccw
    }
}
