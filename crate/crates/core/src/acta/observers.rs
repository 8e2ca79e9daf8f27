use super::automaton::{Automaton, Channel, ChannelKind, Edge, Guard, GuardAtom, Location, SpatialGuard, Sync};
use crate::traffic::CarId;

pub const OBS_INIT: usize = 0;
pub const OBS_UNSAFE: usize = 1;

pub const OBS_IDLE: usize = 0;
pub const OBS_CLAIMED: usize = 1;
pub const OBS_SUCCESS: usize = 2;

/// Moves to `unsafe` as soon as two reservations intersect.
pub fn build_observer_collision() -> Automaton {
    Automaton {
        name: "Observer1".into(),
        owner: None,
        locations: vec![
            Location { name: "init".into(), invariant: Guard::tt() },
            Location { name: "unsafe".into(), invariant: Guard::tt() },
        ],
        initial: OBS_INIT,
        edges: vec![Edge::new("collide", OBS_INIT, OBS_UNSAFE).guard(GuardAtom::Spatial(SpatialGuard::AnyCollision))],
        clocked: false,
        has_data: false,
    }
}

/// Follows the claims and reservations of one controller. It never blocks
/// the controller: every channel of car `car` is accepted in every location.
pub fn build_observer_live(car: CarId) -> Automaton {
    let recv = |kind| Sync::Receive(Channel { kind, car });
    let mut edges = vec![
        Edge::new("claimed", OBS_IDLE, OBS_CLAIMED).sync(recv(ChannelKind::Claiming)),
        Edge::new("withdrawn", OBS_CLAIMED, OBS_IDLE).sync(recv(ChannelKind::Withdrawing)),
        Edge::new("success", OBS_CLAIMED, OBS_SUCCESS).sync(recv(ChannelKind::Reserving)),
        Edge::new("idle_withdraw", OBS_IDLE, OBS_IDLE).sync(recv(ChannelKind::Withdrawing)),
        Edge::new("idle_reserve", OBS_IDLE, OBS_IDLE).sync(recv(ChannelKind::Reserving)),
        Edge::new("reclaimed", OBS_CLAIMED, OBS_CLAIMED).sync(recv(ChannelKind::Claiming)),
    ];
    for (name, kind) in [
        ("done_claim", ChannelKind::Claiming),
        ("done_reserve", ChannelKind::Reserving),
        ("done_withdraw", ChannelKind::Withdrawing),
    ] {
        edges.push(Edge::new(name, OBS_SUCCESS, OBS_SUCCESS).sync(recv(kind)));
    }
    Automaton {
        name: format!("Observer({})", car.0),
        owner: Some(car),
        locations: ["idle", "claimed", "success"]
            .into_iter()
            .map(|n| Location { name: n.into(), invariant: Guard::tt() })
            .collect(),
        initial: OBS_IDLE,
        edges,
        clocked: false,
        has_data: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collision_observer_shape() {
        let o = build_observer_collision();
        o.validate().unwrap();
        assert_eq!(o.location("unsafe"), Some(OBS_UNSAFE));
        assert_eq!(o.edges.len(), 1);
    }

    #[test]
    fn live_observer_accepts_every_channel_everywhere() {
        let o = build_observer_live(CarId(3));
        o.validate().unwrap();
        for loc in 0..o.locations.len() {
            for kind in [ChannelKind::Claiming, ChannelKind::Reserving, ChannelKind::Withdrawing] {
                let n = o
                    .edges_from(loc)
                    .filter(|(_, e)| e.sync == Some(Sync::Receive(Channel { kind, car: CarId(3) })))
                    .count();
                assert_eq!(n, 1, "{} {kind:?}", o.locations[loc].name);
            }
        }
        assert!(o.edges.iter().all(|e| e.source != OBS_SUCCESS || e.target == OBS_SUCCESS));
    }
}
