//! Satisfaction of formulas over a snapshot, a view and a valuation.
//!
//! Sub-views produced by horizontal chops can end between integer points, so
//! the evaluator works on coordinates scaled by `2^d`, where `d` is the
//! horizontal-chop nesting depth of the formula. Truth of a formula only
//! depends on where chop points sit relative to car endpoints, so each chop
//! tries the car endpoints inside the sub-view, its two ends, and one point
//! strictly between every pair of consecutive such points.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::formula::{Formula, Sort, EGO};
use crate::traffic::{CarId, LaneId, LaneInterval, TrafficSnapshot, View};

const MAX_CHOP_DEPTH: u32 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Value {
    Car(CarId),
    Lane(LaneId),
}

/// Assignment of cars and lanes to variables.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Valuation {
    bindings: BTreeMap<String, Value>,
}

impl Valuation {
    pub fn ego(car: CarId) -> Self {
        Valuation::default().with_car(EGO, car)
    }

    pub fn with_car(mut self, var: &str, car: CarId) -> Self {
        self.bindings.insert(var.to_string(), Value::Car(car));
        self
    }

    pub fn with_lane(mut self, var: &str, lane: LaneId) -> Self {
        self.bindings.insert(var.to_string(), Value::Lane(lane));
        self
    }

    pub fn get(&self, var: &str) -> Option<Value> {
        self.bindings.get(var).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("variable `{0}` is unbound")]
    Unbound(String),
    #[error("variable `{0}` is bound to a value of the wrong sort")]
    WrongSort(String),
    #[error("variable `{var}` names car {car}, which is not in the snapshot")]
    UnknownCar { var: String, car: CarId },
    #[error("horizontal chops nested {0} deep; at most {MAX_CHOP_DEPTH} supported")]
    TooDeep(u32),
}

/// An exact point of space: `numer / denom` with `denom` a power of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpacePoint {
    pub numer: i128,
    pub denom: i128,
}

impl SpacePoint {
    fn reduced(mut numer: i128, mut denom: i128) -> Self {
        while denom > 1 && numer % 2 == 0 {
            numer /= 2;
            denom /= 2;
        }
        SpacePoint { numer, denom }
    }

    pub fn as_f64(self) -> f64 {
        self.numer as f64 / self.denom as f64
    }
}

impl fmt::Display for SpacePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom == 1 {
            write!(f, "{}", self.numer)
        } else {
            write!(f, "{}/{}", self.numer, self.denom)
        }
    }
}

/// Decides `ts, view, nu ⊨ phi`.
pub fn eval(ts: &TrafficSnapshot, view: &View, nu: &Valuation, phi: &Formula) -> Result<bool, EvalError> {
    let mut ev = Evaluator::new(ts, nu, phi)?;
    let region = ev.top_region(view);
    Ok(ev.sat(region, phi))
}

/// Evaluates `phi` in the standard view of `ego` with horizon `h`, binding `ego`.
pub fn eval_standard(ts: &TrafficSnapshot, ego: CarId, h: i64, phi: &Formula) -> Result<bool, EvalError> {
    let view = ts.standard_view(ego, h).map_err(|_| EvalError::UnknownCar { var: EGO.to_string(), car: ego })?;
    eval(ts, &view, &Valuation::ego(ego), phi)
}

/// Finds a split point for `lhs ; rhs`, if one exists.
pub fn hchop_witness(
    ts: &TrafficSnapshot,
    view: &View,
    nu: &Valuation,
    lhs: &Formula,
    rhs: &Formula,
) -> Result<Option<SpacePoint>, EvalError> {
    let whole = lhs.clone().hchop(rhs.clone());
    let mut ev = Evaluator::new(ts, nu, &whole)?;
    let region = ev.top_region(view);
    for s in ev.chop_points(region) {
        let (left, right) = region.split_at(s);
        if ev.sat(left, lhs) && ev.sat(right, rhs) {
            return Ok(Some(SpacePoint::reduced(s, ev.scale)));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy)]
struct Region {
    lanes: LaneInterval,
    lo: i128,
    hi: i128,
}

impl Region {
    fn split_at(self, s: i128) -> (Region, Region) {
        (Region { hi: s, ..self }, Region { lo: s, ..self })
    }
}

struct CarBox {
    lo: i128,
    hi: i128,
    res: crate::traffic::LaneSet,
    clm: crate::traffic::LaneSet,
}

struct Evaluator {
    cars: Vec<CarBox>,
    scale: i128,
    env: Vec<(String, Value)>,
}

impl Evaluator {
    fn new(ts: &TrafficSnapshot, nu: &Valuation, phi: &Formula) -> Result<Self, EvalError> {
        for var in phi.free_vars() {
            match nu.get(&var) {
                None => return Err(EvalError::Unbound(var)),
                Some(Value::Car(car)) => {
                    if Sort::of(&var) != Sort::Car {
                        return Err(EvalError::WrongSort(var));
                    }
                    if ts.car(car).is_err() {
                        return Err(EvalError::UnknownCar { var, car });
                    }
                }
                Some(Value::Lane(_)) if Sort::of(&var) != Sort::Lane => return Err(EvalError::WrongSort(var)),
                Some(Value::Lane(_)) => {}
            }
        }
        let depth = phi.hchop_depth();
        if depth > MAX_CHOP_DEPTH {
            return Err(EvalError::TooDeep(depth));
        }
        let scale = 1i128 << depth;
        let cars = ts
            .cars
            .iter()
            .map(|c| CarBox { lo: c.pos as i128 * scale, hi: (c.pos + c.size) as i128 * scale, res: c.res, clm: c.clm })
            .collect();
        let env = nu.bindings.iter().map(|(k, v)| (k.clone(), *v)).collect();
        Ok(Evaluator { cars, scale, env })
    }

    fn top_region(&self, view: &View) -> Region {
        Region { lanes: view.lanes, lo: view.extent.lo as i128 * self.scale, hi: view.extent.hi as i128 * self.scale }
    }

    fn lookup(&self, var: &str) -> Value {
        // Free variables were checked in `new`; quantifiers push their own.
        self.env.iter().rev().find(|(k, _)| k == var).map(|(_, v)| *v).expect("variable bound")
    }

    fn lookup_car(&self, var: &str) -> usize {
        match self.lookup(var) {
            Value::Car(c) => c.index(),
            Value::Lane(_) => unreachable!("car variable bound to a lane"),
        }
    }

    /// Car `i` is part of the region: it has a reservation or claim on one of
    /// the region's lanes and its extent meets the region's extent.
    fn visible(&self, i: usize, r: Region) -> bool {
        let car = &self.cars[i];
        let lanes = r.lanes.to_set();
        !car.res.union(car.clm).intersection(lanes).is_empty() && car.lo <= r.hi && r.lo <= car.hi
    }

    fn single_lane(r: Region) -> Option<LaneId> {
        (r.lanes.count() == 1 && r.lo < r.hi).then_some(LaneId(r.lanes.lo as u32))
    }

    fn sat(&mut self, r: Region, phi: &Formula) -> bool {
        match phi {
            Formula::True => true,
            Formula::VarEq(u, v) => self.lookup(u) == self.lookup(v),
            Formula::Free => {
                Self::single_lane(r).is_some()
                    && (0..self.cars.len())
                        .filter(|&i| self.visible(i, r))
                        .all(|i| self.cars[i].hi <= r.lo || self.cars[i].lo >= r.hi)
            }
            Formula::Re(c) | Formula::Cl(c) => {
                let Some(lane) = Self::single_lane(r) else { return false };
                let i = self.lookup_car(c);
                let car = &self.cars[i];
                let lanes = if matches!(phi, Formula::Re(_)) { car.res } else { car.clm };
                self.visible(i, r) && lanes.contains(lane) && car.lo <= r.lo && r.hi <= car.hi
            }
            Formula::Not(a) => !self.sat(r, a),
            Formula::And(a, b) => self.sat(r, a) && self.sat(r, b),
            Formula::ExistsCar(var, body) => {
                let members: Vec<usize> = (0..self.cars.len()).filter(|&i| self.visible(i, r)).collect();
                members.into_iter().any(|i| {
                    self.env.push((var.clone(), Value::Car(CarId(i as u32))));
                    let holds = self.sat(r, body);
                    self.env.pop();
                    holds
                })
            }
            Formula::HChop(a, b) => self.chop_points(r).into_iter().any(|s| {
                let (left, right) = r.split_at(s);
                self.sat(left, a) && self.sat(right, b)
            }),
            Formula::VChop { lower, upper } => {
                let (l, n) = (r.lanes.lo, r.lanes.hi);
                // Splits at m = n + 1 give the same sub-views as m = n once the
                // lower part is kept inside the view.
                (l - 1..=n.max(l - 1)).any(|m| {
                    let below = Region { lanes: LaneInterval::new(l, m), ..r };
                    let above = Region { lanes: LaneInterval::new(m + 1, n), ..r };
                    self.sat(below, lower) && self.sat(above, upper)
                })
            }
        }
    }

    /// Chop candidates in `[r.lo, r.hi]`: the ends, endpoints of cars on the
    /// region's lanes, and the midpoint of every gap between them.
    fn chop_points(&self, r: Region) -> Vec<i128> {
        let lanes = r.lanes.to_set();
        let mut pts = vec![r.lo, r.hi];
        for car in &self.cars {
            if car.res.union(car.clm).intersection(lanes).is_empty() {
                continue;
            }
            for p in [car.lo, car.hi] {
                if r.lo < p && p < r.hi {
                    pts.push(p);
                }
            }
        }
        pts.sort_unstable();
        pts.dedup();
        let mut out = Vec::with_capacity(pts.len() * 2);
        for w in pts.windows(2) {
            out.push(w[0]);
            debug_assert!((w[0] + w[1]) % 2 == 0, "scale too coarse for midpoint");
            out.push((w[0] + w[1]) / 2);
        }
        out.push(*pts.last().expect("region has endpoints"));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlsl::formula::{cc_formula, pc_formula, safe_formula};
    use crate::mlsl::parse::parse;
    use crate::traffic::{CarState, Extent, LaneSet};

    const A: CarId = CarId(0);
    const B: CarId = CarId(1);
    const E: CarId = CarId(2);
    const D: CarId = CarId(3);

    /// Lanes 0..3; A and B both claim lane 1; D sits far ahead on lane 1.
    fn three_cars_with_claims() -> TrafficSnapshot {
        let mut a = CarState::new(LaneId(2), 10, 5);
        a.clm = LaneSet::single(LaneId(1));
        let mut b = CarState::new(LaneId(0), 12, 5);
        b.clm = LaneSet::single(LaneId(1));
        let e = CarState::new(LaneId(3), 40, 5);
        let d = CarState::new(LaneId(1), 200, 5);
        TrafficSnapshot::new(4, vec![a, b, e, d]).unwrap()
    }

    fn example_valuation() -> Valuation {
        Valuation::ego(E).with_car("a", A).with_car("b", B).with_car("d", D)
    }

    fn holds(ts: &TrafficSnapshot, h: i64, nu: &Valuation, src: &str) -> bool {
        let view = ts.standard_view(E, h).unwrap();
        eval(ts, &view, nu, &parse(src).unwrap()).unwrap()
    }

    #[test]
    fn example_formulas_in_view_of_e() {
        let ts = three_cars_with_claims();
        let nu = example_valuation();
        assert!(holds(&ts, 100, &nu, "<re(ego) ; free>"));
        assert!(holds(&ts, 100, &nu, "<cl(a) & cl(b) ; !cl(a) & cl(b)>"));
        assert!(!holds(&ts, 100, &nu, "<cl(b) ; free ; re(d)>"));
        // With a horizon reaching D the third formula becomes true.
        assert!(holds(&ts, 200, &nu, "<cl(b) ; free ; re(d)>"));
    }

    #[test]
    fn somewhere_of_invisible_car_is_false() {
        let ts = three_cars_with_claims();
        let nu = example_valuation();
        assert!(holds(&ts, 100, &nu, "<re(ego)>"));
        assert!(!holds(&ts, 100, &nu, "<re(d)>"));
        assert!(holds(&ts, 100, &nu, "<true>"));
    }

    #[test]
    fn reservation_atom_needs_sub_extent() {
        let ts = three_cars_with_claims();
        let nu = example_valuation();
        // Two halves of A's reservation both satisfy re(a).
        let view = View { lanes: LaneInterval::single(LaneId(2)), extent: Extent::new(10, 15), owner: E };
        let f = parse("re(a) ; re(a)").unwrap();
        assert!(eval(&ts, &view, &nu, &f).unwrap());
        let w = hchop_witness(&ts, &view, &nu, &Formula::re("a"), &Formula::re("a")).unwrap().unwrap();
        assert!(10.0 < w.as_f64() && w.as_f64() < 15.0);
        // Zero-length views satisfy no atom.
        let point = View { extent: Extent::new(12, 12), ..view };
        assert!(!eval(&ts, &point, &nu, &Formula::re("a")).unwrap());
    }

    #[test]
    fn free_ignores_touching_and_other_lanes() {
        let ts = three_cars_with_claims();
        let nu = example_valuation();
        let lane2 = |lo, hi| View { lanes: LaneInterval::single(LaneId(2)), extent: Extent::new(lo, hi), owner: E };
        assert!(eval(&ts, &lane2(15, 30), &nu, &Formula::Free).unwrap());
        assert!(eval(&ts, &lane2(0, 10), &nu, &Formula::Free).unwrap());
        assert!(!eval(&ts, &lane2(14, 30), &nu, &Formula::Free).unwrap());
        // B sits at [12,17] on lane 0 and does not block lane 2 beyond A.
        assert!(eval(&ts, &lane2(15, 17), &nu, &Formula::Free).unwrap());
        let two = View { lanes: LaneInterval::new(1, 2), extent: Extent::new(50, 60), owner: E };
        assert!(!eval(&ts, &two, &nu, &Formula::Free).unwrap());
    }

    #[test]
    fn collision_and_claim_checks_on_three_cars() {
        let ts = three_cars_with_claims();
        let h = 300;
        for ego in [A, B, E] {
            assert!(eval_standard(&ts, ego, h, &cc_formula()).unwrap());
            assert!(eval_standard(&ts, ego, h, &safe_formula()).unwrap());
        }
        let view = ts.standard_view(A, h).unwrap();
        let pc_b = pc_formula("b");
        assert!(eval(&ts, &view, &Valuation::ego(A).with_car("b", B), &pc_b).unwrap());
        assert!(!eval(&ts, &view, &Valuation::ego(A).with_car("b", E), &pc_b).unwrap());
        assert!(!eval(&ts, &view, &Valuation::ego(A).with_car("b", A), &pc_b).unwrap());
    }

    #[test]
    fn errors_for_unbound_and_unknown() {
        let ts = three_cars_with_claims();
        let view = ts.standard_view(E, 10).unwrap();
        let err = eval(&ts, &view, &Valuation::ego(E), &Formula::re("zz")).unwrap_err();
        assert_eq!(err, EvalError::Unbound("zz".into()));
        let nu = Valuation::ego(E).with_car("zz", CarId(42));
        assert!(matches!(eval(&ts, &view, &nu, &Formula::re("zz")), Err(EvalError::UnknownCar { .. })));
        let nu = Valuation::ego(E).with_lane("zz", LaneId(1));
        assert!(matches!(eval(&ts, &view, &nu, &Formula::re("zz")), Err(EvalError::WrongSort(_))));
    }

    #[test]
    fn lane_variables_compare() {
        let ts = three_cars_with_claims();
        let view = ts.standard_view(E, 10).unwrap();
        let nu = Valuation::ego(E).with_lane("n", LaneId(1)).with_lane("l", LaneId(1));
        assert!(eval(&ts, &view, &nu, &parse("n = l").unwrap()).unwrap());
        let nu = nu.with_lane("l", LaneId(2));
        assert!(!eval(&ts, &view, &nu, &parse("n = l").unwrap()).unwrap());
    }

    #[test]
    fn vertical_chop_degenerate_sides() {
        let ts = three_cars_with_claims();
        let nu = example_valuation();
        let single = View { lanes: LaneInterval::single(LaneId(3)), extent: Extent::new(40, 45), owner: E };
        let f = Formula::vchop(Formula::True, Formula::re(EGO));
        assert!(eval(&ts, &single, &nu, &f).unwrap());
        let f = Formula::vchop(Formula::re(EGO), Formula::True);
        assert!(eval(&ts, &single, &nu, &f).unwrap());
        let f = Formula::vchop(Formula::re(EGO), Formula::re(EGO));
        assert!(!eval(&ts, &single, &nu, &f).unwrap());
    }
}
