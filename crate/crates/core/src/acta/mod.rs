//! Timed automata with spatial guards: the lane-change controllers and the
//! observers used to state safety and liveness.

pub mod automaton;
pub mod controllers;
pub mod observers;

pub use automaton::{
    Action, Automaton, Channel, ChannelKind, Cmp, CtrlData, DataVar, Edge, EdgeId, Guard, GuardAtom, IntTerm, LaneExpr,
    LocId, Location, SpatialGuard, Sync,
};
pub use controllers::{
    build_lcp, build_lcp_live, build_lcp_original, LcpConstants, LcpShape, Variant, Q0, Q1, Q2, Q3, Q_WAIT,
};
pub use observers::{
    build_observer_collision, build_observer_live, OBS_CLAIMED, OBS_IDLE, OBS_INIT, OBS_SUCCESS, OBS_UNSAFE,
};
