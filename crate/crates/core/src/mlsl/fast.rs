//! Interval-overlap versions of the collision checks, used on the hot path of
//! the model checker. Each one agrees with evaluating the corresponding
//! formula in a view that sees every car.

use crate::traffic::{CarId, CarState, LaneSet, TrafficError, TrafficSnapshot};

/// Lane marks plus the occupied interval `[pos, pos + size]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Occupancy {
    pub lanes: LaneSet,
    pub pos: i64,
    pub size: i64,
}

impl Occupancy {
    pub fn res(car: &CarState) -> Self {
        Occupancy { lanes: car.res, pos: car.pos, size: car.size }
    }

    pub fn clm(car: &CarState) -> Self {
        Occupancy { lanes: car.clm, pos: car.pos, size: car.size }
    }
}

/// Both records mark a common lane and their intervals overlap with positive
/// length. Intervals that only touch do not intersect.
pub fn intersect(p1: Occupancy, p2: Occupancy) -> bool {
    !p1.lanes.intersection(p2.lanes).is_empty() && p1.pos < p2.pos + p2.size && p2.pos < p1.pos + p1.size
}

/// No other car's reservation intersects the reservation of `ego`.
pub fn cc(ts: &TrafficSnapshot, ego: CarId) -> Result<bool, TrafficError> {
    let me = Occupancy::res(ts.car(ego)?);
    Ok(!ts.cars.iter().enumerate().any(|(i, other)| i != ego.index() && intersect(me, Occupancy::res(other))))
}

/// The claim of `ego` intersects a reservation or claim of `c`.
pub fn pc(ts: &TrafficSnapshot, ego: CarId, c: CarId) -> Result<bool, TrafficError> {
    let me = ts.car(ego)?;
    let other = ts.car(c)?;
    if ego == c {
        return Ok(false);
    }
    let claim = Occupancy::clm(me);
    Ok(intersect(claim, Occupancy::res(other)) || intersect(claim, Occupancy::clm(other)))
}

/// `∃c: pc(c)`.
pub fn any_pc(ts: &TrafficSnapshot, ego: CarId) -> Result<bool, TrafficError> {
    for c in ts.car_ids() {
        if pc(ts, ego, c)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Some pair of distinct cars has intersecting reservations.
pub fn collision(ts: &TrafficSnapshot) -> bool {
    let n = ts.cars.len();
    (0..n).any(|i| (i + 1..n).any(|j| intersect(Occupancy::res(&ts.cars[i]), Occupancy::res(&ts.cars[j]))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::LaneId;

    fn occ(lane: u32, pos: i64, size: i64) -> Occupancy {
        Occupancy { lanes: LaneSet::single(LaneId(lane)), pos, size }
    }

    #[test]
    fn claims_of_a_and_b_intersect() {
        assert!(intersect(occ(1, 10, 5), occ(1, 12, 5)));
        assert!(!intersect(occ(1, 10, 5), occ(2, 12, 5)));
        assert!(!intersect(occ(1, 10, 5), occ(1, 15, 5)));
        assert!(!intersect(occ(1, 10, 5), Occupancy { lanes: LaneSet::EMPTY, pos: 10, size: 5 }));
    }

    #[test]
    fn initial_checks_on_three_cars() {
        let ts = TrafficSnapshot::new(
            4,
            vec![CarState::new(LaneId(2), 10, 5), CarState::new(LaneId(0), 12, 5), CarState::new(LaneId(3), 40, 5)],
        )
        .unwrap();
        for e in ts.car_ids() {
            assert!(cc(&ts, e).unwrap());
            assert!(!any_pc(&ts, e).unwrap());
        }
        assert!(!pc(&ts, CarId(0), CarId(0)).unwrap());
        assert!(!collision(&ts));
        assert!(cc(&ts, CarId(7)).is_err());
    }
}
