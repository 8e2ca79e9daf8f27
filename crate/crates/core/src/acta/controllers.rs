use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::automaton::{
    Action, Automaton, Channel, ChannelKind, Cmp, DataVar, Edge, Guard, GuardAtom, IntTerm, LaneExpr, Location,
    SpatialGuard, Sync,
};
use crate::traffic::CarId;

pub const Q0: usize = 0;
pub const Q1: usize = 1;
pub const Q2: usize = 2;
pub const Q3: usize = 3;
pub const Q_WAIT: usize = 4;

/// Timing constants of the lane-change controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LcpConstants {
    /// Upper bound on the time spent in `q2` before reserving.
    pub t: u32,
    /// Duration of the lane change in `q3`.
    pub t_lc: u32,
    /// Dwell time in `q1`.
    pub t_w: u32,
    pub wait_lo: u32,
    pub wait_hi: u32,
    /// Longest stay in `q0` before the next claim, in variants that bound it.
    pub t_idle: u32,
}

impl Default for LcpConstants {
    fn default() -> Self {
        LcpConstants { t: 2, t_lc: 3, t_w: 1, wait_lo: 1, wait_hi: 4, t_idle: 1 }
    }
}

impl LcpConstants {
    pub const NAMES: [&'static str; 6] = ["t", "t_lc", "t_w", "wait_lo", "wait_hi", "t_idle"];

    pub fn get(&self, name: &str) -> Option<u32> {
        Some(match name {
            "t" => self.t,
            "t_lc" => self.t_lc,
            "t_w" => self.t_w,
            "wait_lo" => self.wait_lo,
            "wait_hi" => self.wait_hi,
            "t_idle" => self.t_idle,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, value: u32) -> bool {
        let slot = match name {
            "t" => &mut self.t,
            "t_lc" => &mut self.t_lc,
            "t_w" => &mut self.t_w,
            "wait_lo" => &mut self.wait_lo,
            "wait_hi" => &mut self.wait_hi,
            "t_idle" => &mut self.t_idle,
            _ => return false,
        };
        *slot = value;
        true
    }

    pub fn validate(&self) -> Result<(), String> {
        for name in Self::NAMES {
            if self.get(name) == Some(0) {
                return Err(format!("constant {name} must be positive"));
            }
        }
        if self.wait_lo > self.wait_hi {
            return Err("wait_lo must not exceed wait_hi".into());
        }
        Ok(())
    }
}

/// Which additions to the basic controller are present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LcpShape {
    /// `x ≤ t_w` on `q1`, `x ≥ t_w` on its exits, `x := 0` on the claims.
    pub dwell: bool,
    /// Withdrawals go through `q_wait`.
    pub wait_state: bool,
    /// `x ≤ t_idle` on `q0`, with `x := 0` on every edge into `q0`.
    pub idle_bound: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Original,
    OriginalPlusTw,
    Live,
    /// `Live` without the dwell time in `q1`.
    LiveNoTw,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Original, Variant::OriginalPlusTw, Variant::Live, Variant::LiveNoTw];

    pub fn shape(self) -> LcpShape {
        match self {
            Variant::Original => LcpShape { dwell: false, wait_state: false, idle_bound: false },
            Variant::OriginalPlusTw => LcpShape { dwell: true, wait_state: false, idle_bound: true },
            Variant::Live => LcpShape { dwell: true, wait_state: true, idle_bound: true },
            Variant::LiveNoTw => LcpShape { dwell: false, wait_state: true, idle_bound: true },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::OriginalPlusTw => "original-plus-tw",
            Variant::Live => "live",
            Variant::LiveNoTw => "live-no-tw",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(Variant::Original),
            "original-plus-tw" | "live-no-qwait" => Ok(Variant::OriginalPlusTw),
            "live" => Ok(Variant::Live),
            "live-no-tw" => Ok(Variant::LiveNoTw),
            _ => Err(format!(
                "unknown variant `{s}` (expected original, original-plus-tw, live-no-qwait, live or live-no-tw)"
            )),
        }
    }
}

fn chan(kind: ChannelKind, car: CarId) -> Sync {
    Sync::Emit(Channel { kind, car })
}

fn clock(op: Cmp, k: u32) -> GuardAtom {
    GuardAtom::Clock(op, k)
}

fn spatial(g: SpatialGuard) -> GuardAtom {
    GuardAtom::Spatial(g)
}

/// The lane-change controller for car `car` with the given additions.
pub fn build_lcp(car: CarId, shape: LcpShape, k: LcpConstants) -> Automaton {
    use DataVar::{L, N};
    use SpatialGuard::*;

    let mut q0 = Guard::tt().with(spatial(CollisionCheck));
    if shape.idle_bound {
        q0 = q0.with(clock(Cmp::Le, k.t_idle));
    }
    let mut q1 = Guard::tt();
    if shape.dwell {
        q1 = q1.with(clock(Cmp::Le, k.t_w));
    }
    let mut locations = vec![
        Location { name: "q0".into(), invariant: q0 },
        Location { name: "q1".into(), invariant: q1 },
        Location {
            name: "q2".into(),
            invariant: Guard::tt().with(spatial(NoPotentialCollision)).with(clock(Cmp::Le, k.t)),
        },
        Location { name: "q3".into(), invariant: Guard::tt().with(clock(Cmp::Le, k.t_lc)) },
    ];
    if shape.wait_state {
        locations.push(Location { name: "q_wait".into(), invariant: Guard::tt().with(clock(Cmp::Le, k.wait_hi)) });
    }

    let after_withdraw = if shape.wait_state { Q_WAIT } else { Q0 };
    let reset_on_withdraw = shape.wait_state || shape.idle_bound;
    let dwelled = |e: Edge| if shape.dwell { e.guard(clock(Cmp::Ge, k.t_w)) } else { e };
    let reset_if = |e: Edge, b: bool| if b { e.reset() } else { e };

    let mut edges = vec![
        reset_if(
            Edge::new("claim_up", Q0, Q1)
                .guard(GuardAtom::Data(IntTerm::Var(N, 1), Cmp::Le, IntTerm::MaxLane(0)))
                .action(Action::Claim(LaneExpr::Offset(N, 1)))
                .assign(L, LaneExpr::Offset(N, 1))
                .sync(chan(ChannelKind::Claiming, car)),
            shape.dwell,
        ),
        reset_if(
            Edge::new("claim_down", Q0, Q1)
                .guard(GuardAtom::Data(IntTerm::Const(0), Cmp::Le, IntTerm::Var(N, -1)))
                .action(Action::Claim(LaneExpr::Offset(N, -1)))
                .assign(L, LaneExpr::Offset(N, -1))
                .sync(chan(ChannelKind::Claiming, car)),
            shape.dwell,
        ),
        reset_if(
            dwelled(Edge::new("withdraw_q1", Q1, after_withdraw).guard(spatial(SomePotentialCollision)))
                .action(Action::WithdrawClaim)
                .sync(chan(ChannelKind::Withdrawing, car)),
            reset_on_withdraw,
        ),
        dwelled(Edge::new("commit", Q1, Q2).guard(spatial(NoPotentialCollision))).reset(),
        reset_if(
            Edge::new("withdraw_q2", Q2, after_withdraw)
                .guard(spatial(SomePotentialCollision))
                .action(Action::WithdrawClaim)
                .sync(chan(ChannelKind::Withdrawing, car)),
            reset_on_withdraw,
        ),
        Edge::new("reserve", Q2, Q3)
            .guard(spatial(NoPotentialCollision))
            .action(Action::Reserve)
            .sync(chan(ChannelKind::Reserving, car))
            .reset(),
        reset_if(
            Edge::new("finish", Q3, Q0)
                .guard(clock(Cmp::Ge, k.t_lc))
                .action(Action::WithdrawReservation(LaneExpr::Var(L)))
                .assign(N, LaneExpr::Var(L)),
            shape.idle_bound,
        ),
    ];
    if shape.wait_state {
        edges.push(reset_if(Edge::new("resume", Q_WAIT, Q0).guard(clock(Cmp::Ge, k.wait_lo)), shape.idle_bound));
    }

    Automaton {
        name: format!("LCP({})", car.0),
        owner: Some(car),
        locations,
        initial: Q0,
        edges,
        clocked: true,
        has_data: true,
    }
}

/// The controller exactly as drawn for the basic protocol: four locations,
/// seven edges.
pub fn build_lcp_original(car: CarId, k: LcpConstants) -> Automaton {
    build_lcp(car, Variant::Original.shape(), k)
}

/// The controller with the dwell time in `q1` and the waiting location.
pub fn build_lcp_live(car: CarId, k: LcpConstants) -> Automaton {
    build_lcp(car, Variant::Live.shape(), k)
}

#[cfg(test)]
mod tests {
    use super::super::automaton::CtrlData;
    use super::*;
    use crate::mlsl::{cc_formula, exists_pc_formula};
    use crate::traffic::ControllerAction;
    use crate::traffic::LaneId;

    #[test]
    fn original_has_four_locations_and_seven_edges() {
        let a = build_lcp_original(CarId(0), LcpConstants::default());
        a.validate().unwrap();
        assert_eq!(a.locations.len(), 4);
        assert_eq!(a.edges.len(), 7);
        assert_eq!(a.initial, Q0);
        assert_eq!(a.locations[Q0].invariant.0, vec![GuardAtom::Spatial(SpatialGuard::CollisionCheck)]);
        assert_eq!(a.locations[Q3].invariant.0, vec![GuardAtom::Clock(Cmp::Le, 3)]);
        assert!(a.locations[Q1].invariant.0.is_empty());
        let up = &a.edges[a.edge("claim_up").unwrap()];
        assert_eq!(up.guard.to_string(), "n+1 <= N");
        assert_eq!(up.action.to_string(), "c(ego,n+1)");
        assert!(!up.reset_clock);
        let down = &a.edges[a.edge("claim_down").unwrap()];
        assert_eq!(down.guard.to_string(), "0 <= n-1");
        let fin = &a.edges[a.edge("finish").unwrap()];
        assert_eq!(fin.target, Q0);
        assert_eq!(fin.assign, vec![(DataVar::N, LaneExpr::Var(DataVar::L))]);
        assert_eq!(a.edges[a.edge("withdraw_q1").unwrap()].target, Q0);
        assert!(a.edges[a.edge("commit").unwrap()].reset_clock);
        assert!(a.edges[a.edge("reserve").unwrap()].reset_clock);
    }

    #[test]
    fn live_adds_dwell_and_wait() {
        let k = LcpConstants::default();
        let a = build_lcp_live(CarId(1), k);
        a.validate().unwrap();
        assert_eq!(a.locations.len(), 5);
        assert_eq!(a.locations[Q_WAIT].invariant.0, vec![GuardAtom::Clock(Cmp::Le, 4)]);
        let resume = &a.edges[a.edge("resume").unwrap()];
        assert_eq!(resume.guard.0, vec![GuardAtom::Clock(Cmp::Ge, 1)]);
        assert!(a.locations[Q1].invariant.0.contains(&GuardAtom::Clock(Cmp::Le, k.t_w)));
        for name in ["withdraw_q1", "commit"] {
            let e = &a.edges[a.edge(name).unwrap()];
            assert!(e.guard.0.contains(&GuardAtom::Clock(Cmp::Ge, k.t_w)), "{name}");
        }
        for name in ["withdraw_q1", "withdraw_q2"] {
            let e = &a.edges[a.edge(name).unwrap()];
            assert_eq!(e.target, Q_WAIT);
            assert!(e.reset_clock);
        }
        for name in ["claim_up", "claim_down"] {
            let e = &a.edges[a.edge(name).unwrap()];
            assert!(e.reset_clock);
            assert_eq!(e.sync, Some(Sync::Emit(Channel { kind: ChannelKind::Claiming, car: CarId(1) })));
        }
        let r = &a.edges[a.edge("reserve").unwrap()];
        assert_eq!(r.sync, Some(Sync::Emit(Channel { kind: ChannelKind::Reserving, car: CarId(1) })));
    }

    #[test]
    fn variants_share_the_basic_locations() {
        let k = LcpConstants::default();
        let base = build_lcp_original(CarId(0), k);
        for v in Variant::ALL {
            let a = build_lcp(CarId(0), v.shape(), k);
            a.validate().unwrap();
            for q in [Q0, Q1, Q2, Q3] {
                assert_eq!(a.locations[q].name, base.locations[q].name);
                for atom in &base.locations[q].invariant.0 {
                    assert!(a.locations[q].invariant.0.contains(atom), "{v} {q}");
                }
            }
            for e in &base.edges {
                let mine = &a.edges[a.edge(&e.name).unwrap()];
                assert_eq!(mine.source, e.source);
                assert_eq!(mine.action, e.action);
                for atom in &e.guard.0 {
                    assert!(mine.guard.0.contains(atom));
                }
            }
        }
    }

    #[test]
    fn spatial_guards_are_cc_and_pc_only() {
        let allowed = [cc_formula(), exists_pc_formula(), exists_pc_formula().not()];
        for v in Variant::ALL {
            let a = build_lcp(CarId(2), v.shape(), LcpConstants::default());
            let guards = a.locations.iter().map(|l| &l.invariant).chain(a.edges.iter().map(|e| &e.guard));
            for g in guards {
                for s in g.spatial() {
                    assert!(allowed.contains(&s.formula()), "{v}: {s}");
                }
            }
        }
    }

    #[test]
    fn assignments_stay_on_the_road() {
        let a = build_lcp_live(CarId(0), LcpConstants::default());
        for max_lane in 0..6i64 {
            for n in 0..=max_lane as u8 {
                for l in 0..=max_lane as u8 {
                    let d = CtrlData { n, l };
                    for e in &a.edges {
                        let data_ok = e.guard.0.iter().all(|atom| match atom {
                            GuardAtom::Data(x, op, y) => op.test(x.eval(d, max_lane), y.eval(d, max_lane)),
                            _ => true,
                        });
                        if !data_ok {
                            continue;
                        }
                        let out = e.apply_assign(d).unwrap();
                        assert!(out.n as i64 <= max_lane && out.l as i64 <= max_lane, "{}", e.name);
                        if let Some(act) = e.action.resolve(d, max_lane) {
                            if let ControllerAction::Claim(LaneId(x)) = act {
                                assert!(x as i64 <= max_lane);
                            }
                        } else {
                            panic!("{} resolves off-road", e.name);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("live-no-qwait".parse::<Variant>().unwrap(), Variant::OriginalPlusTw);
        assert!("fast".parse::<Variant>().is_err());
    }

    #[test]
    fn constants_validate() {
        let mut k = LcpConstants::default();
        assert!(k.validate().is_ok());
        assert!(k.set("wait_lo", 5));
        assert!(k.validate().is_err());
        assert!(!k.set("speed", 1));
        k.wait_lo = 1;
        k.t = 0;
        assert!(k.validate().is_err());
    }
}
