//! Communication layer: the broadcast V2V bus, the radar model, scripted
//! hardware faults and peer liveness monitoring.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::types::{FaultKind, Heartbeat, MessageKind, PlatoonInfo, Role, V2VMessage, VehicleId, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BusConfig {
    pub delivery_delay_ticks: u64,
    /// Broadcast range (m); `None` is unlimited.
    pub range: Option<f64>,
}

impl Default for BusConfig {
    fn default() -> Self {
        Self {
            delivery_delay_ticks: 1,
            range: None,
        }
    }
}

/// Active faults per vehicle with their injection tick. Faults never clear.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaultBoard {
    faults: BTreeMap<VehicleId, BTreeMap<FaultKind, u64>>,
}

impl FaultBoard {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a fault. Re-injecting keeps the earliest tick.
    pub fn inject(&mut self, vehicle: VehicleId, kind: FaultKind, tick: u64) {
        self.faults
            .entry(vehicle)
            .or_default()
            .entry(kind)
            .or_insert(tick);
    }

    /// Whether `vehicle` has `kind` active at `tick`.
    pub fn active(&self, vehicle: VehicleId, kind: FaultKind, tick: u64) -> bool {
        self.injected_at(vehicle, kind).is_some_and(|t| t <= tick)
    }

    pub fn injected_at(&self, vehicle: VehicleId, kind: FaultKind) -> Option<u64> {
        self.faults.get(&vehicle).and_then(|m| m.get(&kind)).copied()
    }

    pub fn kinds(&self, vehicle: VehicleId, tick: u64) -> Vec<FaultKind> {
        self.faults
            .get(&vehicle)
            .map(|m| m.iter().filter(|(_, &t)| t <= tick).map(|(&k, _)| k).collect())
            .unwrap_or_default()
    }
}

/// A bus participant at delivery time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Receiver {
    pub id: VehicleId,
    pub s: f64,
}

/// Delivers every message of `sent` that is due at `tick`.
///
/// Messages from a sender whose V2V device had failed when they were sent are
/// dropped, a receiver with a failed device gets nothing, nobody receives its
/// own broadcast, and each inbox is ordered by (sender, message kind).
pub fn bus_deliver(
    sent: &[V2VMessage],
    receivers: &[Receiver],
    faults: &FaultBoard,
    tick: u64,
    config: &BusConfig,
) -> BTreeMap<VehicleId, Vec<V2VMessage>> {
    let position: BTreeMap<VehicleId, f64> = receivers.iter().map(|r| (r.id, r.s)).collect();
    let mut inboxes: BTreeMap<VehicleId, Vec<V2VMessage>> =
        receivers.iter().map(|r| (r.id, Vec::new())).collect();
    for msg in sent {
        if msg.tick_sent + config.delivery_delay_ticks != tick {
            continue;
        }
        if faults.active(msg.sender, FaultKind::V2VFail, msg.tick_sent) {
            continue;
        }
        for r in receivers {
            if r.id == msg.sender || faults.active(r.id, FaultKind::V2VFail, tick) {
                continue;
            }
            if let (Some(range), Some(&from)) = (config.range, position.get(&msg.sender)) {
                if (from - r.s).abs() > range {
                    continue;
                }
            }
            inboxes.entry(r.id).or_default().push(msg.clone());
        }
    }
    for inbox in inboxes.values_mut() {
        inbox.sort_by(|a, b| {
            (a.sender, a.kind.rank(), a.tick_sent).cmp(&(b.sender, b.kind.rank(), b.tick_sent))
        });
    }
    inboxes
}

/// Engine-owned bus holding messages in flight.
#[derive(Debug, Clone, Default)]
pub struct Bus {
    pub config: BusConfig,
    in_flight: Vec<V2VMessage>,
}

impl Bus {
    pub fn new(config: BusConfig) -> Self {
        Self {
            config,
            in_flight: Vec::new(),
        }
    }

    pub fn send(&mut self, messages: impl IntoIterator<Item = V2VMessage>) {
        self.in_flight.extend(messages);
    }

    pub fn deliver(
        &mut self,
        tick: u64,
        receivers: &[Receiver],
        faults: &FaultBoard,
    ) -> BTreeMap<VehicleId, Vec<V2VMessage>> {
        let inboxes = bus_deliver(&self.in_flight, receivers, faults, tick, &self.config);
        let delay = self.config.delivery_delay_ticks;
        self.in_flight.retain(|m| m.tick_sent + delay > tick);
        inboxes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadarConfig {
    pub max_range: f64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self { max_range: 200.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarReading {
    pub valid: bool,
    /// Bumper-to-bumper distance to the nearest vehicle ahead in the ego
    /// corridor, `max_range` when nothing is in range.
    pub gap: f64,
    /// Target speed minus ego speed.
    pub rel_speed: f64,
    pub max_range: f64,
    /// Track id of the target.
    pub target: Option<VehicleId>,
}

impl RadarReading {
    pub fn empty(max_range: f64) -> Self {
        Self {
            valid: true,
            gap: max_range,
            rel_speed: 0.0,
            max_range,
            target: None,
        }
    }

    pub fn failed(max_range: f64) -> Self {
        Self {
            valid: false,
            ..Self::empty(max_range)
        }
    }
}

/// Single-target radar: the nearest vehicle ahead whose lateral overlap with
/// the ego vehicle exceeds half a vehicle width.
pub fn radar_sense(
    ego: &VehicleState,
    others: &[VehicleState],
    faulty: bool,
    config: &RadarConfig,
    lane_width: f64,
    vehicle_width: f64,
) -> RadarReading {
    if faulty {
        return RadarReading::failed(config.max_range);
    }
    let ego_y = ego.lateral_position(lane_width);
    let mut best: Option<(f64, &VehicleState)> = None;
    for other in others {
        if other.id == ego.id || other.s <= ego.s {
            continue;
        }
        if (other.lateral_position(lane_width) - ego_y).abs() >= vehicle_width / 2.0 {
            continue;
        }
        let gap = other.rear() - ego.s;
        if gap > config.max_range {
            continue;
        }
        let closer = match best {
            None => true,
            Some((g, b)) => gap < g || (gap == g && other.id < b.id),
        };
        if closer {
            best = Some((gap, other));
        }
    }
    match best {
        Some((gap, target)) => RadarReading {
            valid: true,
            gap,
            rel_speed: target.v - ego.v,
            max_range: config.max_range,
            target: Some(target.id),
        },
        None => RadarReading::empty(config.max_range),
    }
}

/// What a vehicle knows about one peer from V2V.
#[derive(Debug, Clone, PartialEq)]
pub struct PeerView {
    pub state: VehicleState,
    pub role: Role,
    pub platoon: Option<PlatoonInfo>,
    /// Ticks since the heartbeat was sent.
    pub age_ticks: u64,
    /// The fields were replaced by zeros because the peer went silent.
    pub zeroed: bool,
}

/// Latest heartbeat per peer, kept by each vehicle.
#[derive(Debug, Clone, Default)]
pub struct PeerTable {
    latest: BTreeMap<VehicleId, (Heartbeat, u64)>,
}

impl PeerTable {
    pub fn ingest(&mut self, inbox: &[V2VMessage]) {
        for msg in inbox {
            if let MessageKind::Heartbeat(hb) = &msg.kind {
                let newer = self
                    .latest
                    .get(&msg.sender)
                    .is_none_or(|(_, t)| msg.tick_sent >= *t);
                if newer {
                    self.latest.insert(msg.sender, (hb.clone(), msg.tick_sent));
                }
            }
        }
    }

    pub fn latest(&self, id: VehicleId) -> Option<&(Heartbeat, u64)> {
        self.latest.get(&id)
    }

    /// Heartbeat age of each watched peer. A peer never heard from is as old
    /// as the simulation.
    pub fn ages(&self, watched: &[VehicleId], tick: u64) -> BTreeMap<VehicleId, u64> {
        watched
            .iter()
            .map(|&id| {
                let age = self.latest.get(&id).map_or(tick, |(_, t)| tick.saturating_sub(*t));
                (id, age)
            })
            .collect()
    }
}

/// Peers whose heartbeat is older than the timeout.
pub fn detect_peer_failure(ages: &BTreeMap<VehicleId, u64>, timeout_ticks: u64) -> Vec<VehicleId> {
    ages.iter()
        .filter(|(_, &age)| age > timeout_ticks)
        .map(|(&id, _)| id)
        .collect()
}

/// Result of assembling the per-peer kinematic view.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PayloadView {
    pub peers: BTreeMap<VehicleId, PeerView>,
    /// Watched peers silent past the timeout (only reported with degradation on).
    pub silent: Vec<VehicleId>,
}

/// Builds the per-peer view from the latest heartbeats.
///
/// With degradation enabled a watched peer silent past the timeout is reported
/// in `silent`. Without it the silence is not detected and the peer's fields
/// read as zeros, which is how an unmonitored receiver sees a dead link.
pub fn v2v_payload(
    ego: VehicleId,
    table: &PeerTable,
    watched: &[VehicleId],
    tick: u64,
    timeout_ticks: u64,
    degradation_enabled: bool,
) -> PayloadView {
    let mut view = PayloadView::default();
    for (&id, (hb, sent)) in &table.latest {
        if id == ego {
            continue;
        }
        view.peers.insert(
            id,
            PeerView {
                state: hb.state,
                role: hb.role,
                platoon: hb.platoon.clone(),
                age_ticks: tick.saturating_sub(*sent),
                zeroed: false,
            },
        );
    }
    let watched: Vec<VehicleId> = watched.iter().copied().filter(|&id| id != ego).collect();
    let ages = table.ages(&watched, tick);
    for id in detect_peer_failure(&ages, timeout_ticks) {
        if degradation_enabled {
            view.silent.push(id);
        } else {
            let mut state = VehicleState::new(id, 0.0, 0, 0.0, 0.0);
            let mut role = Role::FreeVehicle;
            let mut platoon = None;
            if let Some(p) = view.peers.get(&id) {
                state.length = p.state.length;
                role = p.role;
                platoon = p.platoon.clone();
            }
            view.peers.insert(
                id,
                PeerView {
                    state,
                    role,
                    platoon,
                    age_ticks: ages[&id],
                    zeroed: true,
                },
            );
        }
    }
    view
}

#[cfg(test)]
mod tests {
    use super::*;

    fn car(id: u32, s: f64, lane: u32, v: f64) -> VehicleState {
        VehicleState::new(VehicleId(id), s, lane, v, 5.0)
    }

    fn rx(ids: &[u32]) -> Vec<Receiver> {
        ids.iter()
            .map(|&i| Receiver {
                id: VehicleId(i),
                s: 0.0,
            })
            .collect()
    }

    fn flag(sender: u32, tick: u64, kind: MessageKind) -> V2VMessage {
        V2VMessage::new(VehicleId(sender), tick, kind)
    }

    #[test]
    fn delivery_after_delay() {
        let cfg = BusConfig::default();
        let sent = vec![flag(1, 100, MessageKind::JoinFlag)];
        let faults = FaultBoard::new();
        let early = bus_deliver(&sent, &rx(&[1, 2]), &faults, 100, &cfg);
        assert!(early[&VehicleId(2)].is_empty());
        let on_time = bus_deliver(&sent, &rx(&[1, 2]), &faults, 101, &cfg);
        assert_eq!(on_time[&VehicleId(2)].len(), 1);
        assert!(on_time[&VehicleId(1)].is_empty());
    }

    #[test]
    fn fault_combinations_for_three_vehicles() {
        // Oracle: a message from s reaches r iff s != r, s healthy, r healthy.
        let cfg = BusConfig::default();
        for mask in 0u8..8 {
            let mut faults = FaultBoard::new();
            for i in 0..3u32 {
                if mask & (1 << i) != 0 {
                    faults.inject(VehicleId(i + 1), FaultKind::V2VFail, 0);
                }
            }
            let sent: Vec<_> = (1..=3).map(|s| flag(s, 5, MessageKind::SafeFlag)).collect();
            let inboxes = bus_deliver(&sent, &rx(&[1, 2, 3]), &faults, 6, &cfg);
            for r in 1..=3u32 {
                let got: Vec<u32> = inboxes[&VehicleId(r)].iter().map(|m| m.sender.0).collect();
                let healthy = |v: u32| mask & (1 << (v - 1)) == 0;
                let expected: Vec<u32> = (1..=3u32)
                    .filter(|&s| s != r && healthy(s) && healthy(r))
                    .collect();
                assert_eq!(got, expected, "mask {mask:03b} receiver {r}");
            }
        }
    }

    #[test]
    fn inbox_order_is_sender_then_kind() {
        let cfg = BusConfig::default();
        let sent = vec![
            flag(3, 0, MessageKind::SafeFlag),
            flag(2, 0, MessageKind::UpdateFlag),
            flag(2, 0, MessageKind::JoinFlag),
        ];
        let inbox = &bus_deliver(&sent, &rx(&[1, 2, 3]), &FaultBoard::new(), 1, &cfg)[&VehicleId(1)];
        let order: Vec<_> = inbox.iter().map(|m| (m.sender.0, m.kind.rank())).collect();
        assert_eq!(order, vec![(2, 1), (2, 2), (3, 4)]);
    }

    #[test]
    fn range_limits_delivery() {
        let cfg = BusConfig {
            range: Some(100.0),
            ..Default::default()
        };
        let receivers = vec![
            Receiver { id: VehicleId(1), s: 0.0 },
            Receiver { id: VehicleId(2), s: 50.0 },
            Receiver { id: VehicleId(3), s: 150.0 },
        ];
        let sent = vec![flag(1, 0, MessageKind::JoinFlag)];
        let inboxes = bus_deliver(&sent, &receivers, &FaultBoard::new(), 1, &cfg);
        assert_eq!(inboxes[&VehicleId(2)].len(), 1);
        assert!(inboxes[&VehicleId(3)].is_empty());
    }

    #[test]
    fn radar_nearest_leader() {
        let cfg = RadarConfig::default();
        let ego = car(2, 100.0, 1, 20.0);
        let lead = car(1, 118.0, 1, 20.0);
        let far = car(3, 160.0, 1, 20.0);
        let beside = car(4, 110.0, 2, 20.0);
        let r = radar_sense(&ego, &[far, lead, beside], false, &cfg, 3.5, 2.0);
        assert!(r.valid);
        assert!((r.gap - 13.0).abs() < 1e-12);
        assert_eq!(r.target, Some(VehicleId(1)));
    }

    #[test]
    fn radar_empty_and_failed() {
        let cfg = RadarConfig::default();
        let ego = car(2, 100.0, 1, 20.0);
        let far = car(1, 400.0, 1, 20.0);
        let r = radar_sense(&ego, &[far], false, &cfg, 3.5, 2.0);
        assert_eq!((r.valid, r.gap, r.target), (true, 200.0, None));
        let lead = car(1, 118.0, 1, 20.0);
        let r = radar_sense(&ego, &[lead], true, &cfg, 3.5, 2.0);
        assert_eq!((r.valid, r.gap), (false, 200.0));
    }

    #[test]
    fn peer_failure_threshold() {
        let mut ages = BTreeMap::new();
        ages.insert(VehicleId(2), 3);
        ages.insert(VehicleId(3), 11);
        assert_eq!(detect_peer_failure(&ages, 10), vec![VehicleId(3)]);
    }

    #[test]
    fn never_heard_peer_fails_after_timeout() {
        let table = PeerTable::default();
        let watched = [VehicleId(4)];
        assert!(detect_peer_failure(&table.ages(&watched, 10), 10).is_empty());
        assert_eq!(detect_peer_failure(&table.ages(&watched, 11), 10), vec![VehicleId(4)]);
    }

    fn heartbeat(sender: u32, tick: u64, v: f64) -> V2VMessage {
        flag(
            sender,
            tick,
            MessageKind::Heartbeat(Heartbeat {
                state: VehicleState { a: 0.5, ..car(sender, 50.0, 1, v) },
                role: Role::Follower,
                platoon: None,
            }),
        )
    }

    #[test]
    fn payload_freshest_wins() {
        let mut table = PeerTable::default();
        table.ingest(&[heartbeat(3, 99, 19.0)]);
        table.ingest(&[heartbeat(3, 100, 20.0)]);
        let view = v2v_payload(VehicleId(4), &table, &[VehicleId(3)], 101, 10, true);
        let p = &view.peers[&VehicleId(3)];
        assert_eq!((p.state.v, p.age_ticks, p.zeroed), (20.0, 1, false));
        assert!(view.silent.is_empty());
    }

    #[test]
    fn silent_peer_zeroed_without_degradation() {
        let mut table = PeerTable::default();
        table.ingest(&[heartbeat(3, 100, 20.0)]);
        let view = v2v_payload(VehicleId(4), &table, &[VehicleId(3)], 111, 10, false);
        let p = &view.peers[&VehicleId(3)];
        assert!(p.zeroed);
        assert_eq!((p.state.v, p.state.a), (0.0, 0.0));
        assert!(view.silent.is_empty());
    }

    #[test]
    fn silent_peer_reported_with_degradation() {
        let mut table = PeerTable::default();
        table.ingest(&[heartbeat(3, 100, 20.0)]);
        let view = v2v_payload(VehicleId(4), &table, &[VehicleId(3)], 111, 10, true);
        assert_eq!(view.silent, vec![VehicleId(3)]);
        assert!(!view.peers[&VehicleId(3)].zeroed);
    }

    #[test]
    fn faults_are_monotone() {
        let mut board = FaultBoard::new();
        board.inject(VehicleId(3), FaultKind::RadarFail, 400);
        board.inject(VehicleId(3), FaultKind::RadarFail, 500);
        assert!(!board.active(VehicleId(3), FaultKind::RadarFail, 399));
        for t in 400..1000 {
            assert!(board.active(VehicleId(3), FaultKind::RadarFail, t));
        }
    }
}
