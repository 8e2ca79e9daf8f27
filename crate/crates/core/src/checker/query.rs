use serde::{Deserialize, Serialize};

use super::network::{GuardMode, Network, NetworkError, SystemState};
use super::search::{check_af, check_ag, CheckOptions, Verdict};
use crate::acta::{
    build_lcp, build_observer_collision, build_observer_live, LcpConstants, Variant, OBS_SUCCESS, OBS_UNSAFE,
};
use crate::mlsl::fast;
use crate::traffic::{CarId, TrafficSnapshot};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Query {
    /// `A[] not deadlock`
    NoDeadlock,
    /// `A[] not Observer1.unsafe`
    SafetyNoCollision,
    /// `A<> (Observer(i).success or ...)` over the given cars.
    LivenessAny(Vec<CarId>),
    /// `A<> Observer(i).success`
    LivenessCar(CarId),
}

impl Query {
    pub fn cars(&self) -> Vec<CarId> {
        match self {
            Query::LivenessAny(cs) => cs.clone(),
            Query::LivenessCar(c) => vec![*c],
            _ => Vec::new(),
        }
    }

    pub fn is_invariance(&self) -> bool {
        matches!(self, Query::NoDeadlock | Query::SafetyNoCollision)
    }

    /// The query as the command line spells it, with car names.
    pub fn label(&self, names: &[String]) -> String {
        match self {
            Query::NoDeadlock => "no-deadlock".into(),
            Query::SafetyNoCollision => "safety".into(),
            Query::LivenessAny(_) => "liveness-any".into(),
            Query::LivenessCar(c) => format!("liveness-car={}", names[c.index()]),
        }
    }

    /// The query in the temporal-logic notation, with car names.
    pub fn formula(&self, names: &[String]) -> String {
        let success = |c: &CarId| format!("Observer({}).success", names[c.index()]);
        match self {
            Query::NoDeadlock => "A[] not deadlock".into(),
            Query::SafetyNoCollision => "A[] not Observer1.unsafe".into(),
            Query::LivenessAny(cs) => format!("A<> ({})", cs.iter().map(success).collect::<Vec<_>>().join(" or ")),
            Query::LivenessCar(c) => format!("A<> {}", success(c)),
        }
    }
}

/// Controller variant, constants and evaluation settings of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub constants: LcpConstants,
    pub horizon: i64,
    pub guard_mode: GuardMode,
}

/// One controller per car plus the observers `query` needs.
pub fn build_network(
    ts: &TrafficSnapshot,
    names: &[String],
    cfg: &ModelConfig,
    query: &Query,
) -> Result<Network, NetworkError> {
    cfg.constants.validate().map_err(NetworkError::Invalid)?;
    for c in query.cars() {
        if c.index() >= ts.cars.len() {
            return Err(NetworkError::Invalid(format!("query names car {}, which does not exist", c.0)));
        }
    }
    if matches!(query, Query::LivenessAny(cs) if cs.is_empty()) {
        return Err(NetworkError::Invalid("liveness-any needs at least one car".into()));
    }
    let mut automata = Vec::new();
    for c in ts.car_ids() {
        let mut a = build_lcp(c, cfg.variant.shape(), cfg.constants);
        a.name = format!("LCP({})", names[c.index()]);
        automata.push(a);
    }
    if *query == Query::SafetyNoCollision {
        automata.push(build_observer_collision());
    }
    for c in query.cars() {
        let mut o = build_observer_live(c);
        o.name = format!("Observer({})", names[c.index()]);
        automata.push(o);
    }
    Network::new(ts.clone(), names.to_vec(), automata, cfg.horizon, cfg.guard_mode)
}

/// Index of the liveness observer of `car`.
pub fn observer_of(net: &Network, car: CarId) -> Option<usize> {
    net.automata().iter().position(|a| a.owner == Some(car) && !a.has_data)
}

/// Index of the collision observer.
pub fn collision_observer(net: &Network) -> Option<usize> {
    net.automata().iter().position(|a| a.owner.is_none() && a.location("unsafe").is_some())
}

/// The bad-state predicate of an invariance query, or the goal predicate of
/// an eventuality query.
pub fn predicate<'a>(net: &'a Network, query: &Query) -> Box<dyn Fn(&SystemState) -> bool + 'a> {
    match query {
        Query::NoDeadlock => Box::new(move |s| net.deadlock(s)),
        Query::SafetyNoCollision => {
            let obs = collision_observer(net).expect("safety network has Observer1");
            Box::new(move |s| s.locs[obs] == OBS_UNSAFE || fast::collision(&s.snapshot))
        }
        Query::LivenessAny(_) | Query::LivenessCar(_) => {
            let obs: Vec<usize> =
                query.cars().iter().map(|&c| observer_of(net, c).expect("liveness network has observers")).collect();
            Box::new(move |s| obs.iter().any(|&o| s.locs[o] == OBS_SUCCESS))
        }
    }
}

pub fn check_query(net: &Network, query: &Query, opts: &CheckOptions) -> Verdict {
    let p = predicate(net, query);
    if query.is_invariance() {
        check_ag(net, p, opts)
    } else {
        check_af(net, p, opts)
    }
}

/// Builds the network for `query` and checks it.
pub fn check(
    ts: &TrafficSnapshot,
    names: &[String],
    cfg: &ModelConfig,
    query: &Query,
    opts: &CheckOptions,
) -> Result<(Network, Verdict), NetworkError> {
    let net = build_network(ts, names, cfg, query)?;
    let v = check_query(&net, query, opts);
    Ok((net, v))
}
