//! Discrete-time explicit-state model checking of controller networks.
//!
//! Clocks advance in unit steps and are capped one above the largest clock
//! constant. Edges fire one at a time, or as a handshake pair when one emits
//! on a channel another receives. Invariance queries run a breadth-first
//! search; eventuality queries look for a dead end or a cycle among the
//! states that avoid the goal.

pub mod network;
pub mod query;
pub mod search;
pub mod store;
pub mod trace;

pub use network::{GuardMode, Network, NetworkError, Step, SystemState};
pub use query::{build_network, check, check_query, collision_observer, observer_of, predicate, ModelConfig, Query};
pub use search::{
    check_af, check_ag, explore, CheckOptions, Exploration, Outcome, Stats, Verdict, DEFAULT_MAX_STATES, MAX_STATES_ENV,
};
pub use store::StateStore;
pub use trace::{state_json, ReplayError, Trace, TraceKind, TraceStep};
