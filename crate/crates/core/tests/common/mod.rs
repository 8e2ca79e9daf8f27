#![allow(dead_code)]

use std::collections::{HashMap, HashSet, VecDeque};

use lanecheck::acta::{LcpConstants, Variant};
use lanecheck::checker::{
    build_network, check_query, predicate, CheckOptions, GuardMode, ModelConfig, Network, Outcome, Query, SystemState,
};
use lanecheck::mlsl::{Formula, Value};
use lanecheck::scenario::Scenario;
use lanecheck::traffic::{CarId, CarState, LaneId, LaneSet, TrafficSnapshot, View};
use proptest::prelude::*;
use rand::Rng;

pub const THREE_CARS: &str = include_str!("../../scenarios/three-cars.scn");
pub const THREE_CARS_CLAIMS: &str = include_str!("../../scenarios/three-cars-claims.scn");
pub const THREE_CARS_16: &str = include_str!("../../scenarios/three-cars-16lanes.scn");
pub const FOUR_CARS: &str = include_str!("../../scenarios/four-cars.scn");
pub const ONE_LANE: &str = include_str!("../../scenarios/one-lane.scn");
pub const TWO_CARS: &str = include_str!("../../scenarios/two-cars.scn");

pub fn scenario(text: &str) -> Scenario {
    Scenario::parse(text).expect("bundled scenario parses")
}

fn neighbour(lane: u32, lanes: u32, up: bool) -> Option<u32> {
    if up {
        (lane + 1 < lanes).then_some(lane + 1)
    } else {
        lane.checked_sub(1)
    }
}

/// A car on `lane` shaped by `kind`: 0 plain, 1/2 claiming up/down, 3/4
/// reserving two lanes up/down. Shapes that leave the road fall back to plain.
pub fn shaped_car(lane: u32, lanes: u32, pos: i64, size: i64, kind: u8) -> CarState {
    let mut car = CarState::new(LaneId(lane), pos, size);
    let other = match kind {
        1 | 3 => neighbour(lane, lanes, true),
        2 | 4 => neighbour(lane, lanes, false),
        _ => None,
    };
    if let Some(o) = other {
        if kind <= 2 {
            car.clm = LaneSet::single(LaneId(o));
        } else {
            car.res.insert(LaneId(o));
        }
    }
    car
}

pub fn arb_snapshot(max_cars: usize, max_lanes: u32, max_pos: i64) -> impl Strategy<Value = TrafficSnapshot> {
    (1..=max_lanes).prop_flat_map(move |lanes| {
        let car = (0..lanes, 0..max_pos, 1i64..8, 0u8..5)
            .prop_map(move |(lane, pos, size, kind)| shaped_car(lane, lanes, pos, size, kind));
        prop::collection::vec(car, 1..=max_cars)
            .prop_map(move |cars| TrafficSnapshot::new(lanes, cars).expect("generated snapshot is valid"))
    })
}

pub fn random_snapshot(rng: &mut impl Rng, max_cars: usize, max_lanes: u32, max_pos: i64) -> TrafficSnapshot {
    let lanes = rng.gen_range(1..=max_lanes);
    let n = rng.gen_range(1..=max_cars);
    let cars = (0..n)
        .map(|_| {
            let lane = rng.gen_range(0..lanes);
            shaped_car(lane, lanes, rng.gen_range(0..max_pos), rng.gen_range(1..8), rng.gen_range(0..5))
        })
        .collect();
    TrafficSnapshot::new(lanes, cars).expect("generated snapshot is valid")
}

/// Reference semantics on a fixed grid: every chop point of resolution
/// `1/scale` is tried, and atoms are decided cell by cell.
pub struct GridOracle<'a> {
    ts: &'a TrafficSnapshot,
    scale: i64,
}

#[derive(Clone, Copy)]
struct Cell {
    lanes: (i64, i64),
    lo: i64,
    hi: i64,
}

impl<'a> GridOracle<'a> {
    pub fn new(ts: &'a TrafficSnapshot, scale: i64) -> Self {
        GridOracle { ts, scale }
    }

    pub fn holds(&self, view: &View, nu: &[(&str, CarId)], phi: &Formula) -> bool {
        let mut env: Vec<(String, Value)> = nu.iter().map(|(k, c)| (k.to_string(), Value::Car(*c))).collect();
        let r = Cell {
            lanes: (view.lanes.lo, view.lanes.hi),
            lo: view.extent.lo * self.scale,
            hi: view.extent.hi * self.scale,
        };
        self.sat(&mut env, r, phi)
    }

    fn car_span(&self, i: usize) -> (i64, i64) {
        let c = &self.ts.cars[i];
        (c.pos * self.scale, (c.pos + c.size) * self.scale)
    }

    fn marks(&self, i: usize, lanes: (i64, i64)) -> bool {
        let c = &self.ts.cars[i];
        c.res.union(c.clm).iter().any(|l| lanes.0 <= l.0 as i64 && l.0 as i64 <= lanes.1)
    }

    fn in_view(&self, i: usize, r: Cell) -> bool {
        let (lo, hi) = self.car_span(i);
        self.marks(i, r.lanes) && lo <= r.hi && r.lo <= hi
    }

    fn car(env: &[(String, Value)], var: &str) -> usize {
        match env.iter().rev().find(|(k, _)| k == var).map(|(_, v)| *v) {
            Some(Value::Car(c)) => c.index(),
            other => panic!("{var} bound to {other:?}"),
        }
    }

    fn covered(&self, i: usize, lanes: LaneSet, lane: i64, g: i64) -> bool {
        let (lo, hi) = self.car_span(i);
        lanes.contains(LaneId(lane as u32)) && lo <= g && g < hi
    }

    fn sat(&self, env: &mut Vec<(String, Value)>, r: Cell, phi: &Formula) -> bool {
        let single = r.lanes.0 == r.lanes.1 && r.lo < r.hi;
        match phi {
            Formula::True => true,
            Formula::VarEq(u, v) => {
                let get = |x: &str| env.iter().rev().find(|(k, _)| k == x).map(|(_, v)| *v);
                get(u) == get(v)
            }
            Formula::Free => {
                single
                    && (r.lo..r.hi).all(|g| {
                        (0..self.ts.cars.len()).all(|i| {
                            let c = &self.ts.cars[i];
                            !self.in_view(i, r) || !self.covered(i, c.res.union(c.clm), r.lanes.0, g)
                        })
                    })
            }
            Formula::Re(v) | Formula::Cl(v) => {
                let i = Self::car(env, v);
                let c = &self.ts.cars[i];
                let lanes = if matches!(phi, Formula::Re(_)) { c.res } else { c.clm };
                single && self.in_view(i, r) && (r.lo..r.hi).all(|g| self.covered(i, lanes, r.lanes.0, g))
            }
            Formula::Not(a) => !self.sat(env, r, a),
            Formula::And(a, b) => self.sat(env, r, a) && self.sat(env, r, b),
            Formula::ExistsCar(var, body) => (0..self.ts.cars.len()).any(|i| {
                if !self.in_view(i, r) {
                    return false;
                }
                env.push((var.clone(), Value::Car(CarId(i as u32))));
                let ok = self.sat(env, r, body);
                env.pop();
                ok
            }),
            Formula::HChop(a, b) => {
                (r.lo..=r.hi).any(|s| self.sat(env, Cell { hi: s, ..r }, a) && self.sat(env, Cell { lo: s, ..r }, b))
            }
            Formula::VChop { lower, upper } => (r.lanes.0 - 1..=r.lanes.1).any(|m| {
                self.sat(env, Cell { lanes: (r.lanes.0, m), ..r }, lower)
                    && self.sat(env, Cell { lanes: (m + 1, r.lanes.1), ..r }, upper)
            }),
        }
    }
}

/// Every state reachable from the initial one, found by a plain
/// breadth-first search over whole states.
pub fn reachable(net: &Network) -> (Vec<SystemState>, HashMap<SystemState, usize>) {
    let mut states = vec![net.initial().clone()];
    let mut index = HashMap::from([(net.initial().clone(), 0)]);
    let mut queue = VecDeque::from([0]);
    while let Some(i) = queue.pop_front() {
        for (_, t) in net.successors(&states[i]) {
            if !index.contains_key(&t) {
                index.insert(t.clone(), states.len());
                queue.push_back(states.len());
                states.push(t);
            }
        }
    }
    (states, index)
}

/// `A[] !bad` by enumeration.
pub fn oracle_ag(net: &Network, bad: impl Fn(&SystemState) -> bool) -> bool {
    !reachable(net).0.iter().any(bad)
}

/// `A<> good` by the bounded-path fixpoint: after round `k`, `won` holds the
/// states all of whose paths of length at most `k` meet `good`. Rounds run
/// until nothing changes, which happens within the state count.
pub fn oracle_af(net: &Network, good: impl Fn(&SystemState) -> bool) -> bool {
    let (states, index) = reachable(net);
    let succ: Vec<Vec<usize>> =
        states.iter().map(|s| net.successors(s).into_iter().map(|(_, t)| index[&t]).collect()).collect();
    let mut won: Vec<bool> = states.iter().map(&good).collect();
    for _ in 0..=states.len() {
        let next: Vec<bool> =
            (0..states.len()).map(|i| won[i] || (!succ[i].is_empty() && succ[i].iter().all(|&j| won[j]))).collect();
        if next == won {
            break;
        }
        won = next;
    }
    won[0]
}

/// Reachable states as a set, with clocks clamped to `cap`.
pub fn projected_states(net: &Network, cap: u8) -> HashSet<SystemState> {
    reachable(net)
        .0
        .into_iter()
        .map(|mut s| {
            for c in &mut s.clocks {
                *c = (*c).min(cap);
            }
            s
        })
        .collect()
}

/// A scenario with at most two cars on at most three lanes, constants in
/// `1..=2`, and no overlapping reservations at the start.
pub fn small_case(rng: &mut impl Rng) -> (TrafficSnapshot, ModelConfig) {
    loop {
        let lanes = rng.gen_range(1..=3);
        let n = rng.gen_range(1..=2);
        let cars = (0..n)
            .map(|_| CarState::new(LaneId(rng.gen_range(0..lanes)), rng.gen_range(0..8), rng.gen_range(2..5)))
            .collect();
        let ts = TrafficSnapshot::new(lanes, cars).unwrap();
        if lanecheck::mlsl::fast::collision(&ts) {
            continue;
        }
        let mut k = LcpConstants::default();
        for name in ["t", "t_lc", "t_w", "wait_lo", "t_idle"] {
            k.set(name, rng.gen_range(1..=2));
        }
        k.wait_hi = rng.gen_range(k.wait_lo..=2);
        let variant = Variant::ALL[rng.gen_range(0..Variant::ALL.len())];
        let horizon = ts.covering_horizon();
        return (ts, ModelConfig { variant, constants: k, horizon, guard_mode: GuardMode::Auto });
    }
}

pub fn all_queries(ts: &TrafficSnapshot) -> Vec<Query> {
    let mut qs = vec![Query::NoDeadlock, Query::SafetyNoCollision, Query::LivenessAny(ts.car_ids().collect())];
    qs.extend(ts.car_ids().map(Query::LivenessCar));
    qs
}

/// Compares the checker with the enumeration oracles on every query.
/// Returns how many verdicts were compared and how many of them failed.
pub fn cross_check(ts: &TrafficSnapshot, cfg: &ModelConfig) -> Result<(usize, usize), String> {
    let names: Vec<String> = (0..ts.cars.len()).map(|i| format!("C{i}")).collect();
    let opts = CheckOptions::default();
    let (mut compared, mut failed) = (0, 0);
    for q in all_queries(ts) {
        let net = build_network(ts, &names, cfg, &q).map_err(|e| e.to_string())?;
        let verdict = check_query(&net, &q, &opts);
        let p = predicate(&net, &q);
        let expected = if q.is_invariance() { oracle_ag(&net, &p) } else { oracle_af(&net, &p) };
        let got = match verdict.outcome {
            Outcome::Holds => true,
            Outcome::Fails => false,
            Outcome::Inconclusive => return Err(format!("{q:?} inconclusive")),
        };
        if got != expected {
            return Err(format!("{q:?} on {ts:?} with {cfg:?}: checker {got}, oracle {expected}"));
        }
        if let Some(w) = &verdict.witness {
            w.replay(&net).map_err(|e| format!("{q:?}: witness does not replay: {e}"))?;
        }
        compared += 1;
        failed += usize::from(!got);
    }
    Ok((compared, failed))
}
