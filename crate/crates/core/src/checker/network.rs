use std::fmt;

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acta::{Automaton, Channel, CtrlData, EdgeId, GuardAtom, LocId, SpatialGuard, Sync};
use crate::mlsl::{eval, eval_standard, fast, Valuation};
use crate::traffic::{CarId, Extent, LaneInterval, LaneSet, TrafficSnapshot, View};

/// How spatial guards are decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum GuardMode {
    /// Interval checks when the horizon sees every car, formula evaluation
    /// otherwise.
    #[default]
    Auto,
    Fast,
    Semantic,
}

/// One state of the product of all automata over a shared snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemState {
    pub snapshot: TrafficSnapshot,
    pub locs: Vec<LocId>,
    /// Clock `x` of every automaton; zero for unclocked ones.
    pub clocks: Vec<u8>,
    /// `n` and `l` of every automaton; zero for automata without data.
    pub data: Vec<CtrlData>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Step {
    /// All clocks advance by one time unit.
    Delay,
    /// One edge, or an emitting edge together with its receiving partner.
    Fire { automaton: usize, edge: EdgeId, partner: Option<(usize, EdgeId)> },
}

impl Step {
    pub fn is_delay(self) -> bool {
        matches!(self, Step::Delay)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("automaton {0}: {1}")]
    Automaton(String, String),
    #[error("automaton {0} belongs to car {1}, which is not in the snapshot")]
    UnknownOwner(String, u32),
    #[error("car {0} must start with exactly one reservation and no claim")]
    InitialLanes(String),
    #[error("automaton {0} uses an ego-relative spatial guard but belongs to no car")]
    NoEgo(String),
    #[error("the initial state violates the invariant of {0}")]
    InitialInvariant(String),
    #[error("clock cap {0} is not above the largest clock constant {1}")]
    ClockCap(u32, u32),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone)]
struct Layout {
    lane_bytes: usize,
    cars: usize,
    clocked: Vec<usize>,
    with_data: Vec<usize>,
    stride: usize,
}

/// A fixed set of automata over the cars of one scenario.
#[derive(Debug, Clone)]
pub struct Network {
    automata: Vec<Automaton>,
    car_names: Vec<String>,
    initial: SystemState,
    horizon: i64,
    mode: GuardMode,
    clock_cap: u8,
    connected: FxHashSet<Channel>,
    /// `clock_live[a][q]`: the clock of automaton `a` may be read in `q`
    /// before its next reset.
    clock_live: Vec<Vec<bool>>,
    /// `data_live[a][q]`: whether `n` and `l` may be read in `q` before
    /// being assigned.
    data_live: Vec<Vec<[bool; 2]>>,
    global_view: View,
    layout: Layout,
}

impl Network {
    /// Builds the network. Every automaton with data variables starts with
    /// `n = l =` the lane its car reserves.
    pub fn new(
        snapshot: TrafficSnapshot,
        car_names: Vec<String>,
        automata: Vec<Automaton>,
        horizon: i64,
        mode: GuardMode,
    ) -> Result<Network, NetworkError> {
        snapshot.validate().map_err(|e| NetworkError::Invalid(e.to_string()))?;
        if car_names.len() != snapshot.cars.len() {
            return Err(NetworkError::Invalid("one name per car is required".into()));
        }
        if horizon <= 0 {
            return Err(NetworkError::Invalid("horizon must be positive".into()));
        }
        let mut connected = FxHashSet::default();
        let mut data = Vec::with_capacity(automata.len());
        for a in &automata {
            a.validate().map_err(|e| NetworkError::Automaton(a.name.clone(), e))?;
            if a.locations.len() > u8::MAX as usize {
                return Err(NetworkError::Automaton(a.name.clone(), "too many locations".into()));
            }
            if let Some(c) = a.owner {
                if c.index() >= snapshot.cars.len() {
                    return Err(NetworkError::UnknownOwner(a.name.clone(), c.0));
                }
            }
            let guards = a.locations.iter().map(|l| &l.invariant).chain(a.edges.iter().map(|e| &e.guard));
            for g in guards {
                for s in g.spatial() {
                    let ego_free = match s {
                        SpatialGuard::AnyCollision => true,
                        SpatialGuard::Formula(f) => f.free_vars().is_empty(),
                        _ => false,
                    };
                    if a.owner.is_none() && !ego_free {
                        return Err(NetworkError::NoEgo(a.name.clone()));
                    }
                    if let SpatialGuard::Formula(f) = s {
                        if f.free_vars().iter().any(|v| v != crate::mlsl::EGO) {
                            return Err(NetworkError::Automaton(
                                a.name.clone(),
                                format!("guard {f} has free variables other than ego"),
                            ));
                        }
                    }
                }
            }
            for e in &a.edges {
                if let Some(Sync::Receive(ch)) = e.sync {
                    connected.insert(ch);
                }
            }
            let d = match (a.has_data, a.owner) {
                (true, Some(c)) => {
                    let car = &snapshot.cars[c.index()];
                    if car.res.len() != 1 || !car.clm.is_empty() {
                        return Err(NetworkError::InitialLanes(car_names[c.index()].clone()));
                    }
                    let lane = car.res.iter().next().expect("one lane").0 as u8;
                    CtrlData { n: lane, l: lane }
                }
                (true, None) => {
                    return Err(NetworkError::Automaton(a.name.clone(), "data variables need an owning car".into()))
                }
                _ => CtrlData::default(),
            };
            data.push(d);
        }
        let max_const = automata.iter().map(|a| a.max_constant()).max().unwrap_or(0);
        if max_const + 1 > u8::MAX as u32 {
            return Err(NetworkError::Invalid("clock constants must stay below 255".into()));
        }
        let lane_bytes = (snapshot.lane_count as usize).div_ceil(8);
        let clocked: Vec<usize> = (0..automata.len()).filter(|&i| automata[i].clocked).collect();
        let with_data: Vec<usize> = (0..automata.len()).filter(|&i| automata[i].has_data).collect();
        let layout = Layout {
            lane_bytes,
            cars: snapshot.cars.len(),
            stride: snapshot.cars.len() * 2 * lane_bytes + automata.len() + clocked.len() + 2 * with_data.len(),
            clocked,
            with_data,
        };
        let lo = snapshot.cars.iter().map(|c| c.pos).min().unwrap_or(0);
        let hi = snapshot.cars.iter().map(|c| c.pos + c.size).max().unwrap_or(1);
        let global_view = View {
            lanes: LaneInterval::new(0, snapshot.lane_count as i64 - 1),
            extent: Extent::new(lo, hi.max(lo + 1)),
            owner: CarId(0),
        };
        let mode = match mode {
            GuardMode::Auto if horizon >= snapshot.covering_horizon() => GuardMode::Fast,
            GuardMode::Auto => GuardMode::Semantic,
            m => m,
        };
        let clock_live = automata.iter().map(clock_liveness).collect();
        let data_live = automata.iter().map(data_liveness).collect();
        let initial = SystemState {
            locs: automata.iter().map(|a| a.initial).collect(),
            clocks: vec![0; automata.len()],
            data,
            snapshot,
        };
        let mut net = Network {
            automata,
            car_names,
            initial,
            horizon,
            mode,
            clock_cap: (max_const + 1) as u8,
            connected,
            clock_live,
            data_live,
            global_view,
            layout,
        };
        for a in 0..net.automata.len() {
            if !net.invariant_after_move(a, &net.initial) {
                return Err(NetworkError::InitialInvariant(net.automata[a].name.clone()));
            }
        }
        let mut init = net.initial.clone();
        net.canonicalize(&mut init);
        net.initial = init;
        Ok(net)
    }

    /// Raises the clock cap. Any cap above the largest constant gives the
    /// same verdicts; larger caps only make the state space bigger.
    pub fn with_clock_cap(mut self, cap: u32) -> Result<Network, NetworkError> {
        let max_const = self.max_constant();
        if cap <= max_const || cap > u8::MAX as u32 {
            return Err(NetworkError::ClockCap(cap, max_const));
        }
        self.clock_cap = cap as u8;
        Ok(self)
    }

    pub fn max_constant(&self) -> u32 {
        self.automata.iter().map(|a| a.max_constant()).max().unwrap_or(0)
    }

    pub fn clock_cap(&self) -> u32 {
        self.clock_cap as u32
    }

    pub fn automata(&self) -> &[Automaton] {
        &self.automata
    }

    pub fn automaton_index(&self, name: &str) -> Option<usize> {
        self.automata.iter().position(|a| a.name == name)
    }

    pub fn car_names(&self) -> &[String] {
        &self.car_names
    }

    pub fn car_name(&self, car: CarId) -> &str {
        &self.car_names[car.index()]
    }

    pub fn initial(&self) -> &SystemState {
        &self.initial
    }

    pub fn horizon(&self) -> i64 {
        self.horizon
    }

    /// The resolved guard mode, never `Auto`.
    pub fn guard_mode(&self) -> GuardMode {
        self.mode
    }

    /// Truth of a spatial guard for automaton `a` on snapshot `ts`.
    pub fn spatial_holds(&self, a: usize, g: &SpatialGuard, ts: &TrafficSnapshot) -> bool {
        let owner = self.automata[a].owner;
        let ego = || owner.expect("ego-relative guard checked at construction");
        if self.mode == GuardMode::Fast {
            match g {
                SpatialGuard::CollisionCheck => return fast::cc(ts, ego()).expect("owner exists"),
                SpatialGuard::SomePotentialCollision => return fast::any_pc(ts, ego()).expect("owner exists"),
                SpatialGuard::NoPotentialCollision => return !fast::any_pc(ts, ego()).expect("owner exists"),
                SpatialGuard::AnyCollision => return fast::collision(ts),
                SpatialGuard::Formula(_) => {}
            }
        }
        let phi = g.formula();
        let result = match (g, owner) {
            (SpatialGuard::AnyCollision, _) | (SpatialGuard::Formula(_), None) => {
                eval(ts, &self.global_view, &Valuation::default(), &phi)
            }
            (_, Some(c)) => eval_standard(ts, c, self.horizon, &phi),
            (_, None) => unreachable!("checked at construction"),
        };
        result.expect("guards are closed up to ego")
    }

    fn atom_holds(&self, a: usize, atom: &GuardAtom, s: &SystemState, clock: u8) -> bool {
        match atom {
            GuardAtom::Clock(op, k) => op.test(clock as i64, *k as i64),
            GuardAtom::Data(x, op, y) => {
                let max_lane = s.snapshot.lane_count as i64 - 1;
                op.test(x.eval(s.data[a], max_lane), y.eval(s.data[a], max_lane))
            }
            GuardAtom::Spatial(g) => self.spatial_holds(a, g, &s.snapshot),
        }
    }

    pub fn guard_holds(&self, a: usize, edge: EdgeId, s: &SystemState) -> bool {
        let atoms = &self.automata[a].edges[edge].guard.0;
        let cheap =
            atoms.iter().filter(|x| !matches!(x, GuardAtom::Spatial(_))).all(|x| self.atom_holds(a, x, s, s.clocks[a]));
        cheap
            && atoms
                .iter()
                .filter(|x| matches!(x, GuardAtom::Spatial(_)))
                .all(|x| self.atom_holds(a, x, s, s.clocks[a]))
    }

    /// Clock and data parts of the invariant of `a`'s current location.
    /// Spatial parts never block a move; they only forbid delays.
    fn invariant_after_move(&self, a: usize, s: &SystemState) -> bool {
        self.automata[a].locations[s.locs[a]]
            .invariant
            .0
            .iter()
            .filter(|x| !matches!(x, GuardAtom::Spatial(_)))
            .all(|x| self.atom_holds(a, x, s, s.clocks[a]))
    }

    /// Whether every invariant, spatial parts included, holds in `s`.
    pub fn invariants_hold(&self, s: &SystemState) -> bool {
        (0..self.automata.len()).all(|a| {
            self.automata[a].locations[s.locs[a]].invariant.0.iter().all(|x| self.atom_holds(a, x, s, s.clocks[a]))
        })
    }

    fn canonicalize(&self, s: &mut SystemState) {
        for (a, aut) in self.automata.iter().enumerate() {
            if aut.clocked && !self.clock_live[a][s.locs[a]] {
                s.clocks[a] = 0;
            }
            if aut.has_data {
                let [n, l] = self.data_live[a][s.locs[a]];
                if !n {
                    s.data[a].n = 0;
                }
                if !l {
                    s.data[a].l = 0;
                }
            }
        }
    }

    /// Applies edge `edge` of automaton `a` to `into`, reading guards' data
    /// from `pre`. `None` when the action is rejected or the target
    /// invariant would fail.
    fn take_edge(&self, a: usize, edge: EdgeId, pre: &SystemState, mut into: SystemState) -> Option<SystemState> {
        let aut = &self.automata[a];
        let e = &aut.edges[edge];
        let d = pre.data[a];
        if let Some(car) = aut.owner {
            let max_lane = pre.snapshot.lane_count as i64 - 1;
            let act = e.action.resolve(d, max_lane)?;
            if act != crate::traffic::ControllerAction::Tau {
                into.snapshot = into.snapshot.apply_action(car, act).ok()?;
            }
        }
        if aut.has_data {
            into.data[a] = e.apply_assign(d)?;
        }
        if e.reset_clock {
            into.clocks[a] = 0;
        }
        into.locs[a] = e.target;
        self.invariant_after_move(a, &into).then_some(into)
    }

    /// All discrete successors, in automaton and edge order.
    pub fn fires(&self, s: &SystemState, out: &mut Vec<(Step, SystemState)>) {
        for (a, aut) in self.automata.iter().enumerate() {
            for (ei, e) in aut.edges_from(s.locs[a]) {
                let emitted = match e.sync {
                    Some(Sync::Receive(_)) => continue,
                    Some(Sync::Emit(ch)) if self.connected.contains(&ch) => Some(ch),
                    _ => None,
                };
                if !self.guard_holds(a, ei, s) {
                    continue;
                }
                let Some(mid) = self.take_edge(a, ei, s, s.clone()) else { continue };
                match emitted {
                    None => {
                        let mut next = mid;
                        self.canonicalize(&mut next);
                        out.push((Step::Fire { automaton: a, edge: ei, partner: None }, next));
                    }
                    Some(ch) => {
                        for (b, other) in self.automata.iter().enumerate() {
                            if b == a {
                                continue;
                            }
                            for (bi, be) in other.edges_from(s.locs[b]) {
                                if be.sync != Some(Sync::Receive(ch)) || !self.guard_holds(b, bi, s) {
                                    continue;
                                }
                                if let Some(mut next) = self.take_edge(b, bi, s, mid.clone()) {
                                    self.canonicalize(&mut next);
                                    out.push((Step::Fire { automaton: a, edge: ei, partner: Some((b, bi)) }, next));
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// The state one time unit later, if no invariant forbids waiting.
    pub fn delay(&self, s: &SystemState) -> Option<SystemState> {
        let mut next = s.clone();
        for (a, aut) in self.automata.iter().enumerate() {
            if aut.clocked {
                next.clocks[a] = (s.clocks[a] + 1).min(self.clock_cap);
            }
        }
        for a in 0..self.automata.len() {
            for atom in &self.automata[a].locations[s.locs[a]].invariant.0 {
                let ok = match atom {
                    GuardAtom::Spatial(_) => self.atom_holds(a, atom, s, s.clocks[a]),
                    _ => self.atom_holds(a, atom, &next, next.clocks[a]),
                };
                if !ok {
                    return None;
                }
            }
        }
        self.canonicalize(&mut next);
        Some(next)
    }

    /// The delay successor, if any, followed by all discrete successors.
    pub fn successors(&self, s: &SystemState) -> Vec<(Step, SystemState)> {
        let mut out = Vec::new();
        if let Some(d) = self.delay(s) {
            out.push((Step::Delay, d));
        }
        self.fires(s, &mut out);
        out
    }

    /// The state reached by `step`, if `step` is enabled in `s`.
    pub fn apply(&self, s: &SystemState, step: Step) -> Option<SystemState> {
        match step {
            Step::Delay => self.delay(s),
            Step::Fire { .. } => {
                let mut out = Vec::new();
                self.fires(s, &mut out);
                out.into_iter().find(|(st, _)| *st == step).map(|(_, t)| t)
            }
        }
    }

    /// No discrete step is possible now or after any amount of waiting.
    pub fn deadlock(&self, s: &SystemState) -> bool {
        let mut cur = s.clone();
        let mut buf = Vec::new();
        loop {
            buf.clear();
            self.fires(&cur, &mut buf);
            if !buf.is_empty() {
                return false;
            }
            match self.delay(&cur) {
                Some(next) if next != cur => cur = next,
                _ => return true,
            }
        }
    }

    /// Bytes per packed state.
    pub fn stride(&self) -> usize {
        self.layout.stride
    }

    pub fn pack(&self, s: &SystemState, out: &mut Vec<u8>) {
        let lb = self.layout.lane_bytes;
        for car in &s.snapshot.cars {
            out.extend_from_slice(&car.res.bits().to_le_bytes()[..lb]);
            out.extend_from_slice(&car.clm.bits().to_le_bytes()[..lb]);
        }
        out.extend(s.locs.iter().map(|&l| l as u8));
        out.extend(self.layout.clocked.iter().map(|&a| s.clocks[a]));
        for &a in &self.layout.with_data {
            out.push(s.data[a].n);
            out.push(s.data[a].l);
        }
    }

    pub fn unpack(&self, bytes: &[u8]) -> SystemState {
        let lb = self.layout.lane_bytes;
        let mut s = self.initial.clone();
        let mut i = 0;
        let lanes = |bytes: &[u8], i: &mut usize| {
            let mut buf = [0u8; 8];
            buf[..lb].copy_from_slice(&bytes[*i..*i + lb]);
            *i += lb;
            LaneSet::from_bits(u64::from_le_bytes(buf))
        };
        for c in 0..self.layout.cars {
            s.snapshot.cars[c].res = lanes(bytes, &mut i);
            s.snapshot.cars[c].clm = lanes(bytes, &mut i);
        }
        for a in 0..self.automata.len() {
            s.locs[a] = bytes[i] as LocId;
            i += 1;
        }
        for &a in &self.layout.clocked {
            s.clocks[a] = bytes[i];
            i += 1;
        }
        for &a in &self.layout.with_data {
            s.data[a] = CtrlData { n: bytes[i], l: bytes[i + 1] };
            i += 2;
        }
        s
    }

    /// Human-readable description of a step.
    pub fn describe(&self, s: &SystemState, step: Step) -> String {
        match step {
            Step::Delay => "delay 1".to_string(),
            Step::Fire { automaton, edge, partner } => {
                let aut = &self.automata[automaton];
                let e = &aut.edges[edge];
                let who = self.actor_name(automaton);
                let max_lane = s.snapshot.lane_count as i64 - 1;
                let action = match (aut.owner, e.action.resolve(s.data[automaton], max_lane)) {
                    (Some(c), Some(act)) => format_action(act, self.car_name(c)),
                    _ => "tau".to_string(),
                };
                let mut line = format!("fire {who} {} {action}", e.name);
                if let Some((b, bi)) = partner {
                    line.push_str(&format!(" with {} {}", self.actor_name(b), self.automata[b].edges[bi].name));
                }
                line
            }
        }
    }

    /// The car name for controllers, the automaton name otherwise.
    pub fn actor_name(&self, a: usize) -> String {
        let aut = &self.automata[a];
        match aut.owner {
            Some(c) if aut.has_data => self.car_name(c).to_string(),
            _ => aut.name.clone(),
        }
    }

    /// Index of the automaton printed as `name` by [`Network::actor_name`].
    pub fn actor_index(&self, name: &str) -> Option<usize> {
        (0..self.automata.len()).find(|&a| self.actor_name(a) == name)
    }
}

pub(crate) fn format_action(act: crate::traffic::ControllerAction, car: &str) -> String {
    use crate::traffic::ControllerAction::*;
    match act {
        Claim(l) => format!("c({car},{})", l.0),
        WithdrawClaim => format!("wd_c({car})"),
        Reserve => format!("r({car})"),
        WithdrawReservation(l) => format!("wd_r({car},{})", l.0),
        Tau => "tau".to_string(),
    }
}

/// Locations where the clock may be read before it is next reset.
fn clock_liveness(a: &Automaton) -> Vec<bool> {
    let reads = |g: &crate::acta::Guard| g.clock_bounds().next().is_some();
    let mut live: Vec<bool> = a.locations.iter().map(|l| reads(&l.invariant)).collect();
    if !a.clocked {
        return live;
    }
    loop {
        let mut changed = false;
        for e in &a.edges {
            let v = reads(&e.guard) || (!e.reset_clock && live[e.target]);
            if v && !live[e.source] {
                live[e.source] = true;
                changed = true;
            }
        }
        if !changed {
            return live;
        }
    }
}

/// Per location, whether `n` and `l` may be read before their next
/// assignment.
fn data_liveness(a: &Automaton) -> Vec<[bool; 2]> {
    use crate::acta::{Action, DataVar, IntTerm, LaneExpr};
    let idx = |v: DataVar| match v {
        DataVar::N => 0,
        DataVar::L => 1,
    };
    let lane_reads = |e: &LaneExpr, out: &mut [bool; 2]| match *e {
        LaneExpr::Const(_) => {}
        LaneExpr::Var(v) | LaneExpr::Offset(v, _) => out[idx(v)] = true,
        LaneExpr::Add(x, y) | LaneExpr::Sub(x, y) => {
            out[idx(x)] = true;
            out[idx(y)] = true;
        }
    };
    let guard_reads = |g: &crate::acta::Guard, out: &mut [bool; 2]| {
        for atom in &g.0 {
            if let GuardAtom::Data(x, _, y) = atom {
                for t in [x, y] {
                    if let IntTerm::Var(v, _) = t {
                        out[idx(*v)] = true;
                    }
                }
            }
        }
    };
    let mut live: Vec<[bool; 2]> = a
        .locations
        .iter()
        .map(|l| {
            let mut r = [false; 2];
            guard_reads(&l.invariant, &mut r);
            r
        })
        .collect();
    let edge_info: Vec<([bool; 2], [bool; 2])> = a
        .edges
        .iter()
        .map(|e| {
            let mut reads = [false; 2];
            guard_reads(&e.guard, &mut reads);
            if let Action::Claim(x) | Action::WithdrawReservation(x) = &e.action {
                lane_reads(x, &mut reads);
            }
            let mut writes = [false; 2];
            for (v, x) in &e.assign {
                lane_reads(x, &mut reads);
                writes[idx(*v)] = true;
            }
            (reads, writes)
        })
        .collect();
    loop {
        let mut changed = false;
        for (e, (reads, writes)) in a.edges.iter().zip(&edge_info) {
            for v in 0..2 {
                if (reads[v] || (!writes[v] && live[e.target][v])) && !live[e.source][v] {
                    live[e.source][v] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            return live;
        }
    }
}

impl fmt::Display for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "locs={:?} clocks={:?} data=[", self.locs, self.clocks)?;
        for (i, d) in self.data.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}/{}", d.n, d.l)?;
        }
        f.write_str("] cars=[")?;
        for (i, c) in self.snapshot.cars.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{:?}{:?}", c.res, c.clm)?;
        }
        f.write_str("]")
    }
}
