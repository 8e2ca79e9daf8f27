//! The abstract highway: lanes, cars, reservations, claims and views.
//!
//! Space is integer-valued and every observer has perfect knowledge of the
//! other cars, so the perceived size of a car is its configured size.
//! Positions never change; the only snapshot dynamics are the claim and
//! reservation actions in [`ControllerAction`].

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lanes are numbered `0..lane_count`. At most 64 lanes are supported.
pub const MAX_LANES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LaneId(pub u32);

impl fmt::Display for LaneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CarId(pub u32);

impl CarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for CarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A set of lanes stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LaneSet(u64);

impl LaneSet {
    pub const EMPTY: LaneSet = LaneSet(0);

    pub fn single(lane: LaneId) -> Self {
        assert!((lane.0 as usize) < MAX_LANES, "lane {lane} out of range");
        LaneSet(1 << lane.0)
    }

    pub fn from_bits(bits: u64) -> Self {
        LaneSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, lane: LaneId) -> bool {
        (lane.0 as usize) < MAX_LANES && self.0 & (1 << lane.0) != 0
    }

    pub fn insert(&mut self, lane: LaneId) {
        *self = self.union(LaneSet::single(lane));
    }

    pub fn union(self, other: LaneSet) -> LaneSet {
        LaneSet(self.0 | other.0)
    }

    pub fn intersection(self, other: LaneSet) -> LaneSet {
        LaneSet(self.0 & other.0)
    }

    /// Lanes `lo..=hi`; empty when `hi < lo`.
    pub fn range(lo: i64, hi: i64) -> LaneSet {
        let lo = lo.max(0);
        let hi = hi.min(MAX_LANES as i64 - 1);
        if hi < lo {
            return LaneSet::EMPTY;
        }
        let width = (hi - lo + 1) as u32;
        let mask = if width >= 64 { u64::MAX } else { (1u64 << width) - 1 };
        LaneSet(mask << lo)
    }

    pub fn iter(self) -> impl Iterator<Item = LaneId> {
        (0..MAX_LANES as u32).filter(move |i| self.0 & (1 << i) != 0).map(LaneId)
    }

    pub fn max(self) -> Option<LaneId> {
        (self.0 != 0).then(|| LaneId(63 - self.0.leading_zeros()))
    }
}

impl fmt::Debug for LaneSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|l| l.0)).finish()
    }
}

impl FromIterator<LaneId> for LaneSet {
    fn from_iter<I: IntoIterator<Item = LaneId>>(iter: I) -> Self {
        let mut set = LaneSet::EMPTY;
        for lane in iter {
            set.insert(lane);
        }
        set
    }
}

/// A closed integer interval of space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Extent {
    pub lo: i64,
    pub hi: i64,
}

impl Extent {
    pub fn new(lo: i64, hi: i64) -> Self {
        assert!(lo <= hi, "extent [{lo},{hi}] is reversed");
        Extent { lo, hi }
    }

    pub fn length(self) -> i64 {
        self.hi - self.lo
    }

    /// Closed intersection; `None` when disjoint.
    pub fn intersect(self, other: Extent) -> Option<Extent> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Extent { lo, hi })
    }

    pub fn contains(self, other: Extent) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

impl fmt::Display for Extent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

/// Position, size and lane bookkeeping of one car.
///
/// `size` covers the physical length plus braking distance, so the car
/// occupies `[pos, pos + size]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CarState {
    pub pos: i64,
    pub size: i64,
    pub res: LaneSet,
    pub clm: LaneSet,
}

impl CarState {
    pub fn new(lane: LaneId, pos: i64, size: i64) -> Self {
        CarState { pos, size, res: LaneSet::single(lane), clm: LaneSet::EMPTY }
    }

    pub fn extent(&self) -> Extent {
        Extent { lo: self.pos, hi: self.pos + self.size }
    }

    /// Checks the reservation/claim shape invariants.
    pub fn check(&self) -> Result<(), &'static str> {
        if self.size <= 0 {
            return Err("size must be positive");
        }
        match (self.res.len(), self.clm.len()) {
            (1, 0) | (1, 1) | (2, 0) => {}
            (r, _) if r == 0 || r > 2 => return Err("a car reserves one or two lanes"),
            _ => return Err("a car holds at most one claim and never alongside two reservations"),
        }
        if !self.res.intersection(self.clm).is_empty() {
            return Err("claimed and reserved lanes overlap");
        }
        for c in self.clm.iter() {
            let adjacent = self.res.iter().any(|r| r.0.abs_diff(c.0) == 1);
            if !adjacent {
                return Err("claim is not adjacent to a reserved lane");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrafficError {
    #[error("unknown car {0}")]
    UnknownCar(CarId),
    #[error("car {actor} cannot perform {action}: {reason}")]
    RejectedAction { actor: CarId, action: ControllerAction, reason: &'static str },
    #[error("invalid snapshot: {0}")]
    Invalid(String),
}

/// Global state of all cars on a road with `lane_count` lanes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrafficSnapshot {
    pub lane_count: u32,
    pub cars: Vec<CarState>,
}

impl TrafficSnapshot {
    pub fn new(lane_count: u32, cars: Vec<CarState>) -> Result<Self, TrafficError> {
        let ts = TrafficSnapshot { lane_count, cars };
        ts.validate()?;
        Ok(ts)
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        if self.lane_count == 0 || self.lane_count as usize > MAX_LANES {
            return Err(TrafficError::Invalid(format!("lane count {} outside 1..={MAX_LANES}", self.lane_count)));
        }
        let all = self.all_lanes();
        for (i, car) in self.cars.iter().enumerate() {
            car.check().map_err(|e| TrafficError::Invalid(format!("car {i}: {e}")))?;
            if car.res.union(car.clm).intersection(all) != car.res.union(car.clm) {
                return Err(TrafficError::Invalid(format!("car {i}: lane beyond the road")));
            }
        }
        Ok(())
    }

    /// Highest lane number `N`.
    pub fn max_lane(&self) -> LaneId {
        LaneId(self.lane_count - 1)
    }

    pub fn all_lanes(&self) -> LaneSet {
        LaneSet::range(0, self.lane_count as i64 - 1)
    }

    pub fn car(&self, id: CarId) -> Result<&CarState, TrafficError> {
        self.cars.get(id.index()).ok_or(TrafficError::UnknownCar(id))
    }

    pub fn car_ids(&self) -> impl Iterator<Item = CarId> {
        (0..self.cars.len() as u32).map(CarId)
    }

    /// Applies a controller action performed by `actor`, returning the new snapshot.
    pub fn apply_action(&self, actor: CarId, action: ControllerAction) -> Result<Self, TrafficError> {
        let car = *self.car(actor)?;
        let reject = |reason| TrafficError::RejectedAction { actor, action, reason };
        let mut next = car;
        match action {
            ControllerAction::Claim(lane) => {
                if lane.0 >= self.lane_count {
                    return Err(reject("target lane does not exist"));
                }
                if car.res.len() != 1 || !car.clm.is_empty() {
                    return Err(reject("claiming needs exactly one reservation and no claim"));
                }
                if !car.res.iter().any(|r| r.0.abs_diff(lane.0) == 1) {
                    return Err(reject("target lane is not adjacent"));
                }
                next.clm = LaneSet::single(lane);
            }
            ControllerAction::WithdrawClaim => {
                if car.clm.len() != 1 {
                    return Err(reject("no claim to withdraw"));
                }
                next.clm = LaneSet::EMPTY;
            }
            ControllerAction::Reserve => {
                if car.clm.len() != 1 {
                    return Err(reject("no claim to turn into a reservation"));
                }
                next.res = car.res.union(car.clm);
                next.clm = LaneSet::EMPTY;
            }
            ControllerAction::WithdrawReservation(lane) => {
                if !car.res.contains(lane) {
                    return Err(reject("kept lane is not reserved"));
                }
                next.res = LaneSet::single(lane);
            }
            ControllerAction::Tau => return Ok(self.clone()),
        }
        let mut ts = self.clone();
        ts.cars[actor.index()] = next;
        Ok(ts)
    }

    /// Standard view of car `owner`: every lane, `h` around its position.
    pub fn standard_view(&self, owner: CarId, h: i64) -> Result<View, TrafficError> {
        assert!(h > 0, "horizon must be positive");
        let car = self.car(owner)?;
        Ok(View {
            lanes: LaneInterval::new(0, self.lane_count as i64 - 1),
            extent: Extent::new(car.pos - h, car.pos + h),
            owner,
        })
    }

    /// Smallest horizon for which every car's standard view contains all cars.
    pub fn covering_horizon(&self) -> i64 {
        let mut h = 1;
        for a in &self.cars {
            for b in &self.cars {
                h = h.max(a.pos - b.pos).max(b.pos + b.size - a.pos);
            }
        }
        h
    }

    /// The part of car `c` inside the view's extent.
    pub fn len_v(&self, view: &View, c: CarId) -> Result<Option<Extent>, TrafficError> {
        Ok(self.car(c)?.extent().intersect(view.extent))
    }

    /// Reserved lanes of `c` inside the view; empty when `c` is outside the extent.
    pub fn res_v(&self, view: &View, c: CarId) -> Result<LaneSet, TrafficError> {
        let car = self.car(c)?;
        Ok(self.visible_lanes(view, car, car.res))
    }

    /// Claimed lanes of `c` inside the view; empty when `c` is outside the extent.
    pub fn clm_v(&self, view: &View, c: CarId) -> Result<LaneSet, TrafficError> {
        let car = self.car(c)?;
        Ok(self.visible_lanes(view, car, car.clm))
    }

    fn visible_lanes(&self, view: &View, car: &CarState, lanes: LaneSet) -> LaneSet {
        if car.extent().intersect(view.extent).is_none() {
            return LaneSet::EMPTY;
        }
        lanes.intersection(view.lanes.to_set())
    }
}

/// A closed interval of lanes `[lo, hi]`; empty when `hi < lo`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LaneInterval {
    pub lo: i64,
    pub hi: i64,
}

impl LaneInterval {
    pub fn new(lo: i64, hi: i64) -> Self {
        LaneInterval { lo, hi }
    }

    pub fn single(lane: LaneId) -> Self {
        LaneInterval { lo: lane.0 as i64, hi: lane.0 as i64 }
    }

    pub fn count(self) -> i64 {
        (self.hi - self.lo + 1).max(0)
    }

    pub fn is_empty(self) -> bool {
        self.hi < self.lo
    }

    pub fn to_set(self) -> LaneSet {
        LaneSet::range(self.lo, self.hi)
    }
}

/// A lane interval and a space interval owned by a car.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct View {
    pub lanes: LaneInterval,
    pub extent: Extent,
    pub owner: CarId,
}

/// A resolved controller action; lane arguments are already evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControllerAction {
    /// `c(c, ψ)`: claim lane ψ.
    Claim(LaneId),
    /// `wd c(c)`: drop the claim.
    WithdrawClaim,
    /// `r(c)`: turn the claim into a reservation.
    Reserve,
    /// `wd r(c, ψ)`: keep only the reservation on lane ψ.
    WithdrawReservation(LaneId),
    Tau,
}

impl fmt::Display for ControllerAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControllerAction::Claim(l) => write!(f, "c({l})"),
            ControllerAction::WithdrawClaim => write!(f, "wd_c"),
            ControllerAction::Reserve => write!(f, "r"),
            ControllerAction::WithdrawReservation(l) => write!(f, "wd_r({l})"),
            ControllerAction::Tau => write!(f, "tau"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: CarId = CarId(0);
    const B: CarId = CarId(1);
    const E: CarId = CarId(2);

    fn three_cars() -> TrafficSnapshot {
        TrafficSnapshot::new(
            4,
            vec![CarState::new(LaneId(2), 10, 5), CarState::new(LaneId(0), 12, 5), CarState::new(LaneId(3), 40, 5)],
        )
        .unwrap()
    }

    #[test]
    fn standard_view_of_e() {
        let ts = three_cars();
        let v = ts.standard_view(E, 100).unwrap();
        assert_eq!(v.lanes, LaneInterval::new(0, 3));
        assert_eq!(v.extent, Extent::new(-60, 140));
        assert_eq!(v.owner, E);
        assert!(matches!(ts.standard_view(CarId(9), 1), Err(TrafficError::UnknownCar(_))));
    }

    #[test]
    fn standard_view_single_car() {
        let ts = TrafficSnapshot::new(2, vec![CarState::new(LaneId(1), 7, 3)]).unwrap();
        let v = ts.standard_view(CarId(0), 1).unwrap();
        assert_eq!(v.lanes, LaneInterval::new(0, 1));
        assert_eq!(v.extent, Extent::new(6, 8));
    }

    #[test]
    fn len_v_clips_and_drops() {
        let ts = three_cars();
        let mut v = ts.standard_view(E, 100).unwrap();
        assert_eq!(ts.len_v(&v, A).unwrap(), Some(Extent::new(10, 15)));
        v.extent = Extent::new(0, 5);
        assert_eq!(ts.len_v(&v, A).unwrap(), None);
        v.extent = Extent::new(12, 13);
        assert_eq!(ts.len_v(&v, A).unwrap(), Some(Extent::new(12, 13)));
    }

    #[test]
    fn res_v_restricts_to_view() {
        let ts = three_cars();
        let mut v = ts.standard_view(E, 100).unwrap();
        assert_eq!(ts.res_v(&v, A).unwrap(), LaneSet::single(LaneId(2)));
        v.lanes = LaneInterval::new(0, 0);
        assert!(ts.res_v(&v, A).unwrap().is_empty());
        v.lanes = LaneInterval::new(0, 3);
        v.extent = Extent::new(100, 120);
        assert!(ts.res_v(&v, A).unwrap().is_empty());
    }

    #[test]
    fn claim_then_reserve_then_shrink() {
        let ts = three_cars();
        let ts = ts.apply_action(A, ControllerAction::Claim(LaneId(1))).unwrap();
        assert_eq!(ts.cars[0].clm, LaneSet::single(LaneId(1)));
        assert_eq!(ts.cars[0].res, LaneSet::single(LaneId(2)));
        let ts = ts.apply_action(A, ControllerAction::Reserve).unwrap();
        assert_eq!(ts.cars[0].res, [LaneId(1), LaneId(2)].into_iter().collect());
        assert!(ts.cars[0].clm.is_empty());
        let ts = ts.apply_action(A, ControllerAction::WithdrawReservation(LaneId(1))).unwrap();
        assert_eq!(ts.cars[0].res, LaneSet::single(LaneId(1)));
        ts.validate().unwrap();
    }

    #[test]
    fn tau_is_identity() {
        let ts = three_cars();
        assert_eq!(ts.apply_action(B, ControllerAction::Tau).unwrap(), ts);
    }

    #[test]
    fn rejected_actions_name_the_actor() {
        let ts = three_cars();
        let err = ts.apply_action(B, ControllerAction::WithdrawClaim).unwrap_err();
        assert!(matches!(err, TrafficError::RejectedAction { actor: CarId(1), .. }));
        assert!(ts.apply_action(B, ControllerAction::Claim(LaneId(2))).is_err());
        assert!(ts.apply_action(E, ControllerAction::Claim(LaneId(4))).is_err());
        assert!(ts.apply_action(A, ControllerAction::Reserve).is_err());
        assert!(ts.apply_action(A, ControllerAction::WithdrawReservation(LaneId(1))).is_err());
        let claimed = ts.apply_action(A, ControllerAction::Claim(LaneId(3))).unwrap();
        assert!(claimed.apply_action(A, ControllerAction::Claim(LaneId(1))).is_err());
    }

    #[test]
    fn covering_horizon_sees_everyone() {
        let ts = three_cars();
        let h = ts.covering_horizon();
        for e in ts.car_ids() {
            let v = ts.standard_view(e, h).unwrap();
            for c in ts.car_ids() {
                assert!(v.extent.contains(ts.cars[c.index()].extent()));
            }
        }
    }

    #[test]
    fn lane_set_ranges() {
        assert_eq!(LaneSet::range(1, 2).bits(), 0b110);
        assert!(LaneSet::range(3, 2).is_empty());
        assert_eq!(LaneSet::range(0, 63).len(), 64);
        assert_eq!(LaneSet::range(-1, 0).bits(), 1);
    }
}
