use std::fmt;

use serde::{Deserialize, Serialize};

use crate::mlsl::{cc_formula, collision_formula, exists_pc_formula, Formula};
use crate::traffic::{CarId, ControllerAction, LaneId};

pub type LocId = usize;
pub type EdgeId = usize;

/// Data variables of a controller: the current lane and the target lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DataVar {
    N,
    L,
}

impl fmt::Display for DataVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataVar::N => "n",
            DataVar::L => "l",
        })
    }
}

/// Values of `n` and `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CtrlData {
    pub n: u8,
    pub l: u8,
}

impl CtrlData {
    pub fn get(self, v: DataVar) -> i64 {
        match v {
            DataVar::N => self.n as i64,
            DataVar::L => self.l as i64,
        }
    }
}

/// Lane arguments of controller actions: `k | v | v1 + v2 | v1 - v2`, plus
/// `v ± k` for the neighbouring lanes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LaneExpr {
    Const(u32),
    Var(DataVar),
    Add(DataVar, DataVar),
    Sub(DataVar, DataVar),
    Offset(DataVar, i32),
}

impl LaneExpr {
    pub fn eval(self, d: CtrlData) -> i64 {
        match self {
            LaneExpr::Const(k) => k as i64,
            LaneExpr::Var(v) => d.get(v),
            LaneExpr::Add(a, b) => d.get(a) + d.get(b),
            LaneExpr::Sub(a, b) => d.get(a) - d.get(b),
            LaneExpr::Offset(v, k) => d.get(v) + k as i64,
        }
    }
}

impl fmt::Display for LaneExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LaneExpr::Const(k) => write!(f, "{k}"),
            LaneExpr::Var(v) => write!(f, "{v}"),
            LaneExpr::Add(a, b) => write!(f, "{a}+{b}"),
            LaneExpr::Sub(a, b) => write!(f, "{a}-{b}"),
            LaneExpr::Offset(v, k) if *k < 0 => write!(f, "{v}{k}"),
            LaneExpr::Offset(v, k) => write!(f, "{v}+{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

impl Cmp {
    pub fn test(self, a: i64, b: i64) -> bool {
        match self {
            Cmp::Le => a <= b,
            Cmp::Ge => a >= b,
            Cmp::Eq => a == b,
        }
    }
}

impl fmt::Display for Cmp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cmp::Le => "<=",
            Cmp::Ge => ">=",
            Cmp::Eq => "==",
        })
    }
}

/// Integer term over data variables and the highest lane `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntTerm {
    Const(i64),
    Var(DataVar, i64),
    MaxLane(i64),
}

impl IntTerm {
    pub fn eval(self, d: CtrlData, max_lane: i64) -> i64 {
        match self {
            IntTerm::Const(k) => k,
            IntTerm::Var(v, k) => d.get(v) + k,
            IntTerm::MaxLane(k) => max_lane + k,
        }
    }
}

impl fmt::Display for IntTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (base, k) = match self {
            IntTerm::Const(k) => return write!(f, "{k}"),
            IntTerm::Var(v, k) => (v.to_string(), *k),
            IntTerm::MaxLane(k) => ("N".to_string(), *k),
        };
        match k {
            0 => write!(f, "{base}"),
            k if k < 0 => write!(f, "{base}{k}"),
            k => write!(f, "{base}+{k}"),
        }
    }
}

/// Spatial conditions. The named variants are the formulas the controllers
/// and observers use; `Formula` is any other formula, evaluated in the
/// standard view of the automaton's car with `ego` bound to it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpatialGuard {
    /// `cc`
    CollisionCheck,
    /// `∃c: pc(c)`
    SomePotentialCollision,
    /// `¬∃c: pc(c)`
    NoPotentialCollision,
    /// Two distinct cars with intersecting reservations, seen globally.
    AnyCollision,
    Formula(Formula),
}

impl SpatialGuard {
    pub fn formula(&self) -> Formula {
        match self {
            SpatialGuard::CollisionCheck => cc_formula(),
            SpatialGuard::SomePotentialCollision => exists_pc_formula(),
            SpatialGuard::NoPotentialCollision => exists_pc_formula().not(),
            SpatialGuard::AnyCollision => collision_formula(),
            SpatialGuard::Formula(f) => f.clone(),
        }
    }
}

impl fmt::Display for SpatialGuard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpatialGuard::CollisionCheck => f.write_str("cc"),
            SpatialGuard::SomePotentialCollision => f.write_str("exists c: pc(c)"),
            SpatialGuard::NoPotentialCollision => f.write_str("!exists c: pc(c)"),
            SpatialGuard::AnyCollision => f.write_str("collision"),
            SpatialGuard::Formula(phi) => write!(f, "{{{phi}}}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GuardAtom {
    Spatial(SpatialGuard),
    /// `x ⋈ k` on the automaton's clock.
    Clock(Cmp, u32),
    Data(IntTerm, Cmp, IntTerm),
}

impl fmt::Display for GuardAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GuardAtom::Spatial(s) => write!(f, "{s}"),
            GuardAtom::Clock(op, k) => write!(f, "x {op} {k}"),
            GuardAtom::Data(a, op, b) => write!(f, "{a} {op} {b}"),
        }
    }
}

/// Conjunction of atoms; empty means `true`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Guard(pub Vec<GuardAtom>);

impl Guard {
    pub fn tt() -> Self {
        Guard(Vec::new())
    }

    pub fn with(mut self, atom: GuardAtom) -> Self {
        self.0.push(atom);
        self
    }

    pub fn spatial(&self) -> impl Iterator<Item = &SpatialGuard> {
        self.0.iter().filter_map(|a| match a {
            GuardAtom::Spatial(s) => Some(s),
            _ => None,
        })
    }

    pub fn clock_bounds(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().filter_map(|a| match a {
            GuardAtom::Clock(_, k) => Some(*k),
            _ => None,
        })
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("true");
        }
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" && ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// Controller action with lane arguments still symbolic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Claim(LaneExpr),
    WithdrawClaim,
    Reserve,
    WithdrawReservation(LaneExpr),
    Tau,
}

impl Action {
    /// Evaluates lane arguments; `None` when a lane falls outside `0..=max_lane`.
    pub fn resolve(self, d: CtrlData, max_lane: i64) -> Option<ControllerAction> {
        let lane = |e: LaneExpr| {
            let v = e.eval(d);
            (0..=max_lane).contains(&v).then_some(LaneId(v as u32))
        };
        Some(match self {
            Action::Claim(e) => ControllerAction::Claim(lane(e)?),
            Action::WithdrawClaim => ControllerAction::WithdrawClaim,
            Action::Reserve => ControllerAction::Reserve,
            Action::WithdrawReservation(e) => ControllerAction::WithdrawReservation(lane(e)?),
            Action::Tau => ControllerAction::Tau,
        })
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Claim(e) => write!(f, "c(ego,{e})"),
            Action::WithdrawClaim => write!(f, "wd c(ego)"),
            Action::Reserve => write!(f, "r(ego)"),
            Action::WithdrawReservation(e) => write!(f, "wd r(ego,{e})"),
            Action::Tau => write!(f, "tau"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelKind {
    Claiming,
    Reserving,
    Withdrawing,
}

/// A channel `claiming[i]`, `reserving[i]` or `withdrawing[i]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Channel {
    pub kind: ChannelKind,
    pub car: CarId,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            ChannelKind::Claiming => "claiming",
            ChannelKind::Reserving => "reserving",
            ChannelKind::Withdrawing => "withdrawing",
        };
        write!(f, "{k}[{}]", self.car.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sync {
    Emit(Channel),
    Receive(Channel),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub name: String,
    pub source: LocId,
    pub target: LocId,
    pub guard: Guard,
    pub action: Action,
    pub sync: Option<Sync>,
    pub reset_clock: bool,
    pub assign: Vec<(DataVar, LaneExpr)>,
}

impl Edge {
    pub fn new(name: &str, source: LocId, target: LocId) -> Self {
        Edge {
            name: name.to_string(),
            source,
            target,
            guard: Guard::tt(),
            action: Action::Tau,
            sync: None,
            reset_clock: false,
            assign: Vec::new(),
        }
    }

    pub fn guard(mut self, atom: GuardAtom) -> Self {
        self.guard.0.push(atom);
        self
    }

    pub fn action(mut self, action: Action) -> Self {
        self.action = action;
        self
    }

    pub fn sync(mut self, sync: Sync) -> Self {
        self.sync = Some(sync);
        self
    }

    pub fn reset(mut self) -> Self {
        self.reset_clock = true;
        self
    }

    pub fn assign(mut self, var: DataVar, e: LaneExpr) -> Self {
        self.assign.push((var, e));
        self
    }

    /// Data after the assignments, all evaluated on the pre-state.
    pub fn apply_assign(&self, d: CtrlData) -> Option<CtrlData> {
        let mut out = d;
        for (var, e) in &self.assign {
            let v = u8::try_from(e.eval(d)).ok()?;
            match var {
                DataVar::N => out.n = v,
                DataVar::L => out.l = v,
            }
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub name: String,
    pub invariant: Guard,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Automaton {
    pub name: String,
    /// The car this automaton controls or observes; `ego` in its spatial
    /// guards refers to it.
    pub owner: Option<CarId>,
    pub locations: Vec<Location>,
    pub initial: LocId,
    pub edges: Vec<Edge>,
    /// Whether the automaton owns a clock `x`.
    pub clocked: bool,
    /// Whether the automaton keeps the data variables `n` and `l`.
    pub has_data: bool,
}

impl Automaton {
    pub fn location(&self, name: &str) -> Option<LocId> {
        self.locations.iter().position(|l| l.name == name)
    }

    pub fn edge(&self, name: &str) -> Option<EdgeId> {
        self.edges.iter().position(|e| e.name == name)
    }

    pub fn edges_from(&self, loc: LocId) -> impl Iterator<Item = (EdgeId, &Edge)> {
        self.edges.iter().enumerate().filter(move |(_, e)| e.source == loc)
    }

    /// Largest clock constant in guards and invariants.
    pub fn max_constant(&self) -> u32 {
        let inv = self.locations.iter().flat_map(|l| l.invariant.clock_bounds());
        let grd = self.edges.iter().flat_map(|e| e.guard.clock_bounds());
        inv.chain(grd).max().unwrap_or(0)
    }

    /// Well-formedness: edges point at existing locations, clock atoms only
    /// appear in clocked automata, and the initial invariant's clock part
    /// holds at `x = 0`.
    pub fn validate(&self) -> Result<(), String> {
        if self.initial >= self.locations.len() {
            return Err(format!("{}: initial location out of range", self.name));
        }
        for e in &self.edges {
            if e.source >= self.locations.len() || e.target >= self.locations.len() {
                return Err(format!("{}: edge {} points outside the automaton", self.name, e.name));
            }
            if !self.has_data && !e.assign.is_empty() {
                return Err(format!("{}: edge {} assigns data without data variables", self.name, e.name));
            }
        }
        let clock_atoms = self
            .locations
            .iter()
            .map(|l| &l.invariant)
            .chain(self.edges.iter().map(|e| &e.guard))
            .any(|g| g.clock_bounds().next().is_some());
        if clock_atoms && !self.clocked {
            return Err(format!("{}: clock constraint without a clock", self.name));
        }
        for atom in &self.locations[self.initial].invariant.0 {
            if let GuardAtom::Clock(op, k) = atom {
                if !op.test(0, *k as i64) {
                    return Err(format!("{}: initial invariant fails at x = 0", self.name));
                }
            }
        }
        Ok(())
    }
}
