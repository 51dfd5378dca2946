//! Variable delta rule (VDR) state machines.
//!
//! A [`VdrState`] holds one clamped probability together with the lengths of
//! the current success and failure streaks. Each outcome moves the
//! probability by `delta` times the new streak length, so long runs of the
//! same outcome accelerate the drift towards `p_max` or `p_min`.
//!
//! [`AllocationState`] bundles the leave-nest state with one state per object
//! type. In [`Mode::Original`] only the leave-nest state is ever touched; in
//! [`Mode::Modified`] a robot is assigned an object type on every departure,
//! and the pickup state of a type is updated either from the trip outcome or
//! from every capability draw against that type, per [`ObjectUpdatePolicy`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Probability;

/// The two kinds of object in the arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectType {
    Type1,
    Type2,
}

impl ObjectType {
    pub const ALL: [ObjectType; 2] = [ObjectType::Type1, ObjectType::Type2];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            ObjectType::Type1 => 0,
            ObjectType::Type2 => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(ObjectType::Type1),
            1 => Some(ObjectType::Type2),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectType::Type1 => "type1",
            ObjectType::Type2 => "type2",
        }
    }
}

/// The object type a robot has been sent out to retrieve.
pub type TaskAssignment = ObjectType;

/// Which allocation rule is in force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Leave-nest probability only; object types are not distinguished.
    Original,
    /// Leave-nest probability plus one pickup probability per object type.
    Modified,
}

/// When the pickup-probability states are updated in modified mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectUpdatePolicy {
    /// Once per trip, from whether the trip delivered an object.
    PerTrip,
    /// Once per capability draw against an object of the assigned type.
    PerAttempt,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AllocationError {
    #[error("invalid VDR parameters: {0}")]
    InvalidParams(&'static str),
    #[error("task assignment requested in original mode")]
    AssignInOriginalMode,
    #[error("trip outcome in modified mode requires the trip's assignment")]
    MissingAssignment,
    #[error("trip outcome in original mode must not carry an assignment")]
    UnexpectedAssignment,
}

/// Bounds, starting value and step size of one VDR probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VdrParams<P> {
    pub p_max: P,
    pub p_min: P,
    pub p_initial: P,
    pub delta: P,
}

impl<P: Probability> VdrParams<P> {
    pub fn new(p_max: P, p_min: P, p_initial: P, delta: P) -> Result<Self, AllocationError> {
        let params = VdrParams {
            p_max,
            p_min,
            p_initial,
            delta,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), AllocationError> {
        let zero = P::zero();
        let one = P::one();
        if !(self.p_min >= zero) {
            return Err(AllocationError::InvalidParams("p_min must be >= 0"));
        }
        if !(self.p_min <= self.p_initial) {
            return Err(AllocationError::InvalidParams("p_min must be <= p_initial"));
        }
        if !(self.p_initial <= self.p_max) {
            return Err(AllocationError::InvalidParams("p_initial must be <= p_max"));
        }
        if !(self.p_max <= one) {
            return Err(AllocationError::InvalidParams("p_max must be <= 1"));
        }
        if !(self.delta > zero) {
            return Err(AllocationError::InvalidParams("delta must be > 0"));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, p: P) -> bool {
        self.p_min <= p && p <= self.p_max
    }
}

/// One clamped probability and its streak counters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VdrState<P> {
    pub p: P,
    pub succ_streak: u32,
    pub fail_streak: u32,
}

impl<P: Probability> VdrState<P> {
    pub fn new(params: &VdrParams<P>) -> Self {
        VdrState {
            p: params.p_initial,
            succ_streak: 0,
            fail_streak: 0,
        }
    }

    pub fn with(p: P, succ_streak: u32, fail_streak: u32) -> Self {
        VdrState {
            p,
            succ_streak,
            fail_streak,
        }
    }

    /// `p <- min(p_max, p + succ * delta)` after extending the success streak.
    #[must_use]
    pub fn success(self, params: &VdrParams<P>) -> Self {
        let succ_streak = self.succ_streak + 1;
        let raised = self.p + streak_factor::<P>(succ_streak) * params.delta;
        VdrState {
            p: if raised > params.p_max { params.p_max } else { raised },
            succ_streak,
            fail_streak: 0,
        }
    }

    /// `p <- max(p_min, p - fail * delta)` after extending the failure streak.
    #[must_use]
    pub fn failure(self, params: &VdrParams<P>) -> Self {
        let fail_streak = self.fail_streak + 1;
        let lowered = self.p - streak_factor::<P>(fail_streak) * params.delta;
        VdrState {
            p: if lowered < params.p_min { params.p_min } else { lowered },
            succ_streak: 0,
            fail_streak,
        }
    }

    #[must_use]
    pub fn update(self, success: bool, params: &VdrParams<P>) -> Self {
        if success {
            self.success(params)
        } else {
            self.failure(params)
        }
    }
}

#[inline]
fn streak_factor<P: Probability>(streak: u32) -> P {
    P::from_u32(streak).expect("streak count representable")
}

/// Free-function form of [`VdrState::success`].
pub fn vdr_success<P: Probability>(state: VdrState<P>, params: &VdrParams<P>) -> VdrState<P> {
    state.success(params)
}

/// Free-function form of [`VdrState::failure`].
pub fn vdr_failure<P: Probability>(state: VdrState<P>, params: &VdrParams<P>) -> VdrState<P> {
    state.failure(params)
}

/// Everything a single robot learns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationState<P> {
    pub leave: VdrState<P>,
    pub obj: [VdrState<P>; 2],
    pub mode: Mode,
}

/// Which states a trip outcome touched, in the order they were updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateTarget {
    Leave,
    Object(ObjectType),
}

impl<P: Probability> AllocationState<P> {
    pub fn new(mode: Mode, leave: &VdrParams<P>, obj: &[VdrParams<P>; 2]) -> Self {
        AllocationState {
            leave: VdrState::new(leave),
            obj: [VdrState::new(&obj[0]), VdrState::new(&obj[1])],
            mode,
        }
    }

    /// True iff the robot leaves the nest on this check.
    #[inline]
    pub fn leave_nest_decision(&self, u: P) -> bool {
        u < self.leave.p
    }

    /// Samples an object type with probability proportional to the current
    /// pickup probabilities.
    pub fn assign_task(&self, u: P) -> Result<TaskAssignment, AllocationError> {
        if self.mode == Mode::Original {
            return Err(AllocationError::AssignInOriginalMode);
        }
        let p1 = self.obj[0].p;
        let total = p1 + self.obj[1].p;
        if u < p1 / total {
            Ok(ObjectType::Type1)
        } else {
            Ok(ObjectType::Type2)
        }
    }

    /// Applies the outcome of one completed trip.
    ///
    /// In modified mode the assigned type's state is updated before the
    /// leave-nest state; the returned targets list records that order.
    pub fn record_trip_outcome(
        self,
        assignment: Option<TaskAssignment>,
        delivered: bool,
        leave_params: &VdrParams<P>,
        obj_params: &[VdrParams<P>; 2],
    ) -> Result<(Self, Vec<UpdateTarget>), AllocationError> {
        let mut next = self;
        let mut order = Vec::with_capacity(2);
        match (self.mode, assignment) {
            (Mode::Original, None) => {}
            (Mode::Original, Some(_)) => return Err(AllocationError::UnexpectedAssignment),
            (Mode::Modified, None) => return Err(AllocationError::MissingAssignment),
            (Mode::Modified, Some(t)) => {
                let i = t.index();
                next.obj[i] = next.obj[i].update(delivered, &obj_params[i]);
                order.push(UpdateTarget::Object(t));
            }
        }
        next.leave = next.leave.update(delivered, leave_params);
        order.push(UpdateTarget::Leave);
        Ok((next, order))
    }
}

impl<P: Probability> AllocationState<P> {
    /// Updates only the leave-nest state from a trip outcome.
    #[must_use]
    pub fn record_leave_outcome(self, delivered: bool, leave_params: &VdrParams<P>) -> Self {
        AllocationState {
            leave: self.leave.update(delivered, leave_params),
            ..self
        }
    }

    /// Updates the pickup state of `obj_type` from one capability draw.
    pub fn record_pickup_attempt(
        self,
        obj_type: ObjectType,
        picked_up: bool,
        obj_params: &[VdrParams<P>; 2],
    ) -> Result<Self, AllocationError> {
        if self.mode == Mode::Original {
            return Err(AllocationError::UnexpectedAssignment);
        }
        let mut next = self;
        let i = obj_type.index();
        next.obj[i] = next.obj[i].update(picked_up, &obj_params[i]);
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set1_leave() -> VdrParams<f64> {
        VdrParams::new(0.08, 0.002, 0.04, 0.0003).unwrap()
    }

    fn set2_obj() -> VdrParams<f64> {
        VdrParams::new(0.15, 0.002, 0.075, 0.0025).unwrap()
    }

    fn set2_leave() -> VdrParams<f64> {
        VdrParams::new(0.08, 0.002, 0.04, 0.0015).unwrap()
    }

    #[test]
    fn success_from_initial() {
        let s = VdrState::with(0.04, 0, 0).success(&set1_leave());
        assert_eq!(s, VdrState::with(0.04 + 1.0 * 0.0003, 1, 0));
        assert!((s.p - 0.0403).abs() < 1e-15);
    }

    #[test]
    fn success_clamps_at_max() {
        let s = VdrState::with(0.0799, 1, 0).success(&set1_leave());
        assert_eq!(s, VdrState::with(0.08, 2, 0));
    }

    #[test]
    fn success_resets_failure_streak() {
        let s = VdrState::with(0.075, 0, 3).success(&set1_leave());
        assert_eq!((s.succ_streak, s.fail_streak), (1, 0));
        assert!((s.p - 0.0753).abs() < 1e-15);
    }

    #[test]
    fn failure_from_initial() {
        let s = VdrState::with(0.04, 0, 0).failure(&set1_leave());
        assert_eq!((s.succ_streak, s.fail_streak), (0, 1));
        assert!((s.p - 0.0397).abs() < 1e-15);
    }

    #[test]
    fn failure_clamps_at_min() {
        let s = VdrState::with(0.0021, 0, 5).failure(&set1_leave());
        assert_eq!(s, VdrState::with(0.002, 0, 6));
    }

    #[test]
    fn failure_resets_success_streak() {
        let s = VdrState::with(0.075, 2, 0).failure(&set2_obj());
        assert_eq!((s.succ_streak, s.fail_streak), (0, 1));
        assert!((s.p - 0.0725).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(VdrParams::new(0.08, 0.1, 0.09, 0.01).is_err());
        assert!(VdrParams::new(0.08, 0.002, 0.09, 0.01).is_err());
        assert!(VdrParams::new(1.2, 0.002, 0.09, 0.01).is_err());
        assert!(VdrParams::new(0.08, 0.002, 0.04, 0.0).is_err());
        assert!(VdrParams::new(0.08, -0.1, 0.04, 0.1).is_err());
        assert!(VdrParams::new(0.08, 0.002, 0.04, 0.0003).is_ok());
    }

    fn modified(p1: f64, p2: f64) -> AllocationState<f64> {
        let mut s = AllocationState::new(Mode::Modified, &set2_leave(), &[set2_obj(), set2_obj()]);
        s.obj[0].p = p1;
        s.obj[1].p = p2;
        s
    }

    #[test]
    fn leave_decision_is_strict() {
        let mut s = AllocationState::new(Mode::Original, &set1_leave(), &[set2_obj(), set2_obj()]);
        assert!(s.leave_nest_decision(0.0399));
        assert!(!s.leave_nest_decision(0.04));
        s.leave.p = 0.002;
        assert!(!s.leave_nest_decision(0.5));
    }

    #[test]
    fn assignment_examples() {
        assert_eq!(modified(0.075, 0.075).assign_task(0.49), Ok(ObjectType::Type1));
        assert_eq!(modified(0.15, 0.002).assign_task(0.9), Ok(ObjectType::Type1));
        assert_eq!(modified(0.002, 0.15).assign_task(0.5), Ok(ObjectType::Type2));
        // threshold = 0.15 / 0.152
        assert_eq!(modified(0.15, 0.002).assign_task(0.99), Ok(ObjectType::Type2));
    }

    #[test]
    fn assignment_rejected_in_original_mode() {
        let s = AllocationState::new(Mode::Original, &set1_leave(), &[set2_obj(), set2_obj()]);
        assert_eq!(s.assign_task(0.1), Err(AllocationError::AssignInOriginalMode));
    }

    #[test]
    fn original_trip_equals_leave_update() {
        let s = AllocationState::new(Mode::Original, &set1_leave(), &[set2_obj(), set2_obj()]);
        let (n, order) = s
            .record_trip_outcome(None, true, &set1_leave(), &[set2_obj(), set2_obj()])
            .unwrap();
        assert_eq!(n.leave, VdrState::with(0.04, 0, 0).success(&set1_leave()));
        assert_eq!(n.obj, s.obj);
        assert_eq!(order, vec![UpdateTarget::Leave]);
    }

    #[test]
    fn modified_trip_updates_assigned_type_then_leave() {
        let s = modified(0.075, 0.075);
        let (n, order) = s
            .record_trip_outcome(Some(ObjectType::Type2), true, &set2_leave(), &[set2_obj(), set2_obj()])
            .unwrap();
        assert_eq!((n.leave.succ_streak, n.leave.fail_streak), (1, 0));
        assert!((n.leave.p - 0.0415).abs() < 1e-15);
        assert_eq!((n.obj[1].succ_streak, n.obj[1].fail_streak), (1, 0));
        assert!((n.obj[1].p - 0.0775).abs() < 1e-15);
        assert_eq!(n.obj[0], s.obj[0]);
        assert_eq!(
            order,
            vec![UpdateTarget::Object(ObjectType::Type2), UpdateTarget::Leave]
        );
    }

    #[test]
    fn modified_failure_at_floor() {
        let mut s = modified(0.002, 0.075);
        s.obj[0] = VdrState::with(0.002, 0, 9);
        let (n, _) = s
            .record_trip_outcome(Some(ObjectType::Type1), false, &set2_leave(), &[set2_obj(), set2_obj()])
            .unwrap();
        assert_eq!(n.obj[0], VdrState::with(0.002, 0, 10));
        assert_eq!(n.obj[1], s.obj[1]);
    }

    #[test]
    fn assignment_contract() {
        let s = modified(0.075, 0.075);
        assert_eq!(
            s.record_trip_outcome(None, true, &set2_leave(), &[set2_obj(), set2_obj()]),
            Err(AllocationError::MissingAssignment)
        );
        let o = AllocationState::new(Mode::Original, &set1_leave(), &[set2_obj(), set2_obj()]);
        assert_eq!(
            o.record_trip_outcome(Some(ObjectType::Type1), true, &set1_leave(), &[set2_obj(), set2_obj()]),
            Err(AllocationError::UnexpectedAssignment)
        );
    }

    #[test]
    fn pickup_attempt_updates_one_type() {
        let s = modified(0.075, 0.075);
        let n = s
            .record_pickup_attempt(ObjectType::Type1, false, &[set2_obj(), set2_obj()])
            .unwrap();
        assert!((n.obj[0].p - 0.0725).abs() < 1e-15);
        assert_eq!(n.obj[1], s.obj[1]);
        assert_eq!(n.leave, s.leave);
        let o = AllocationState::new(Mode::Original, &set1_leave(), &[set2_obj(), set2_obj()]);
        assert!(o
            .record_pickup_attempt(ObjectType::Type1, true, &[set2_obj(), set2_obj()])
            .is_err());
        let l = o.record_leave_outcome(true, &set1_leave());
        assert_eq!(l.leave, o.leave.success(&set1_leave()));
        assert_eq!(l.obj, o.obj);
    }

    #[test]
    fn f32_instantiation() {
        let p = VdrParams::<f32>::new(0.08, 0.002, 0.04, 0.0003).unwrap();
        let s = VdrState::new(&p).success(&p).success(&p);
        assert!((s.p - (0.04 + 0.0009)).abs() < 1e-6);
    }
}
