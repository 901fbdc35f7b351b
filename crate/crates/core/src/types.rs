//! Domain types shared by every layer of the stack.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Identifier of a simulated vehicle. Platoon vehicles are numbered densely
/// from 1; scripted intruders get the ids after the last declared vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Kinematic truth of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub id: VehicleId,
    /// Front-bumper position along the road (m).
    pub s: f64,
    /// Lane index, 0 is the rightmost lane.
    pub lane: u32,
    /// Lateral displacement from the lane center (m), positive towards higher lanes.
    pub lateral_offset: f64,
    /// Speed (m/s), never negative.
    pub v: f64,
    /// Acceleration applied during the last step (m/s²).
    pub a: f64,
    pub length: f64,
}

impl VehicleState {
    pub fn new(id: VehicleId, s: f64, lane: u32, v: f64, length: f64) -> Self {
        Self {
            id,
            s,
            lane,
            lateral_offset: 0.0,
            v,
            a: 0.0,
            length,
        }
    }

    /// Lateral position of the vehicle center measured from the center of lane 0.
    pub fn lateral_position(&self, lane_width: f64) -> f64 {
        self.lane as f64 * lane_width + self.lateral_offset
    }

    /// Rear-bumper position.
    pub fn rear(&self) -> f64 {
        self.s - self.length
    }
}

/// Platoon role of a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    FreeVehicle,
    Leader,
    Follower,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::FreeVehicle, Role::Leader, Role::Follower];

    pub fn as_str(&self) -> &'static str {
        match self {
            Role::FreeVehicle => "FreeVehicle",
            Role::Leader => "Leader",
            Role::Follower => "Follower",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Maneuver currently executed by a vehicle. `Extension` carries the name of
/// a maneuver registered outside the built-in set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Maneuver {
    Platooning,
    JoinTail,
    JoinMiddle,
    LeaveTail,
    LeaveMiddle,
    AebHead,
    AebMiddle,
    CutIn,
    HardwareFailures,
    Extension(String),
}

impl Maneuver {
    /// Every built-in maneuver, in declaration order.
    pub const BUILT_IN: [Maneuver; 9] = [
        Maneuver::Platooning,
        Maneuver::JoinTail,
        Maneuver::JoinMiddle,
        Maneuver::LeaveTail,
        Maneuver::LeaveMiddle,
        Maneuver::AebHead,
        Maneuver::AebMiddle,
        Maneuver::CutIn,
        Maneuver::HardwareFailures,
    ];

    pub fn name(&self) -> &str {
        match self {
            Maneuver::Platooning => "Platooning",
            Maneuver::JoinTail => "JoinTail",
            Maneuver::JoinMiddle => "JoinMiddle",
            Maneuver::LeaveTail => "LeaveTail",
            Maneuver::LeaveMiddle => "LeaveMiddle",
            Maneuver::AebHead => "AEBHead",
            Maneuver::AebMiddle => "AEBMiddle",
            Maneuver::CutIn => "CutIn",
            Maneuver::HardwareFailures => "HardwareFailures",
            Maneuver::Extension(name) => name,
        }
    }

    /// Parses the names produced by [`Maneuver::name`]; anything else is an extension.
    pub fn from_name(name: &str) -> Maneuver {
        Maneuver::BUILT_IN
            .iter()
            .find(|m| m.name() == name)
            .cloned()
            .unwrap_or_else(|| Maneuver::Extension(name.to_string()))
    }

    pub fn is_platooning(&self) -> bool {
        matches!(self, Maneuver::Platooning)
    }
}

impl fmt::Display for Maneuver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Longitudinal controller selected by the management layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Longitudinal {
    /// Speed tracking towards a set speed.
    Cc { v_set: f64 },
    /// Radar-only gap regulation at the enlarged headway.
    Acc,
    /// Cooperative gap regulation behind `front`. With `virtual_gap` the gap is
    /// computed from the broadcast position of `front` instead of radar, which
    /// lets a vehicle in a neighbouring lane line up with a slot.
    Cacc { front: VehicleId, virtual_gap: bool },
    /// Full emergency braking.
    Aeb,
    /// Human driver holding `v_des` while avoiding the vehicle ahead.
    Driver { v_des: f64 },
}

impl Longitudinal {
    pub fn name(&self) -> &'static str {
        match self {
            Longitudinal::Cc { .. } => "CC",
            Longitudinal::Acc => "ACC",
            Longitudinal::Cacc { .. } => "CACC",
            Longitudinal::Aeb => "AEB",
            Longitudinal::Driver { .. } => "Driver",
        }
    }

    /// The speed setpoint, for controllers that have one.
    pub fn setpoint(&self) -> Option<f64> {
        match self {
            Longitudinal::Cc { v_set } => Some(*v_set),
            Longitudinal::Driver { v_des } => Some(*v_des),
            _ => None,
        }
    }

    /// True when both values select the same control law, ignoring setpoints.
    pub fn same_law(&self, other: &Longitudinal) -> bool {
        match (self, other) {
            (Longitudinal::Cacc { front: a, virtual_gap: va }, Longitudinal::Cacc { front: b, virtual_gap: vb }) => {
                a == b && va == vb
            }
            _ => std::mem::discriminant(self) == std::mem::discriminant(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lateral {
    LaneCenter,
    LaneChange { target_lane: u32 },
}

/// Pair of longitudinal and lateral controller choices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerKind {
    pub longitudinal: Longitudinal,
    pub lateral: Lateral,
}

impl ControllerKind {
    pub fn longitudinal(longitudinal: Longitudinal) -> Self {
        Self {
            longitudinal,
            lateral: Lateral::LaneCenter,
        }
    }
}

/// Platoon membership as maintained by the leader.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlatoonInfo {
    pub size: usize,
    /// Ordered front to back; the head is the leader.
    pub id_series: Vec<VehicleId>,
}

impl PlatoonInfo {
    pub fn new(id_series: Vec<VehicleId>) -> Self {
        Self {
            size: id_series.len(),
            id_series,
        }
    }

    pub fn solo(leader: VehicleId) -> Self {
        Self::new(vec![leader])
    }

    pub fn leader(&self) -> Option<VehicleId> {
        self.id_series.first().copied()
    }

    pub fn position(&self, id: VehicleId) -> Option<usize> {
        self.id_series.iter().position(|&m| m == id)
    }

    pub fn contains(&self, id: VehicleId) -> bool {
        self.position(id).is_some()
    }

    /// Member directly ahead of `id`.
    pub fn predecessor(&self, id: VehicleId) -> Option<VehicleId> {
        match self.position(id) {
            Some(i) if i > 0 => Some(self.id_series[i - 1]),
            _ => None,
        }
    }

    /// Member directly behind `id`.
    pub fn successor(&self, id: VehicleId) -> Option<VehicleId> {
        self.position(id).and_then(|i| self.id_series.get(i + 1).copied())
    }

    pub fn tail(&self) -> Option<VehicleId> {
        self.id_series.last().copied()
    }

    /// True when `ego` sits strictly behind `other` in the series.
    pub fn is_behind(&self, ego: VehicleId, other: VehicleId) -> bool {
        match (self.position(ego), self.position(other)) {
            (Some(e), Some(o)) => e > o,
            _ => false,
        }
    }

    pub fn append(&mut self, id: VehicleId) {
        self.id_series.push(id);
        self.size = self.id_series.len();
    }

    /// Inserts `id` directly in front of `before`. Returns false when `before`
    /// is not a member.
    pub fn insert_before(&mut self, id: VehicleId, before: VehicleId) -> bool {
        match self.position(before) {
            Some(i) => {
                self.id_series.insert(i, id);
                self.size = self.id_series.len();
                true
            }
            None => false,
        }
    }

    pub fn remove(&mut self, id: VehicleId) -> bool {
        let before = self.id_series.len();
        self.id_series.retain(|&m| m != id);
        self.size = self.id_series.len();
        before != self.size
    }

    /// Drops `from` and every member behind it.
    pub fn truncate_from(&mut self, from: VehicleId) {
        if let Some(i) = self.position(from) {
            self.id_series.truncate(i);
            self.size = self.id_series.len();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FaultKind {
    RadarFail,
    V2VFail,
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultKind::RadarFail => f.write_str("RadarFail"),
            FaultKind::V2VFail => f.write_str("V2VFail"),
        }
    }
}

/// Periodic state broadcast.
#[derive(Debug, Clone, PartialEq)]
pub struct Heartbeat {
    pub state: VehicleState,
    pub role: Role,
    pub platoon: Option<PlatoonInfo>,
}

/// Payload of a V2V message. Variant order is the delivery order within one
/// sender and tick.
#[derive(Debug, Clone, PartialEq)]
pub enum MessageKind {
    Heartbeat(Heartbeat),
    JoinFlag,
    UpdateFlag,
    EvadeFlag,
    SafeFlag,
    LeaveFlag,
    FaultFlag(FaultKind),
    ManeuverAnnounce(Maneuver),
    JoinRequest,
    TakeoverRequest,
}

impl MessageKind {
    pub fn rank(&self) -> u8 {
        match self {
            MessageKind::Heartbeat(_) => 0,
            MessageKind::JoinFlag => 1,
            MessageKind::UpdateFlag => 2,
            MessageKind::EvadeFlag => 3,
            MessageKind::SafeFlag => 4,
            MessageKind::LeaveFlag => 5,
            MessageKind::FaultFlag(_) => 6,
            MessageKind::ManeuverAnnounce(_) => 7,
            MessageKind::JoinRequest => 8,
            MessageKind::TakeoverRequest => 9,
        }
    }

    pub fn label(&self) -> String {
        match self {
            MessageKind::Heartbeat(_) => "Heartbeat".into(),
            MessageKind::JoinFlag => "JoinFlag".into(),
            MessageKind::UpdateFlag => "UpdateFlag".into(),
            MessageKind::EvadeFlag => "EvadeFlag".into(),
            MessageKind::SafeFlag => "SafeFlag".into(),
            MessageKind::LeaveFlag => "LeaveFlag".into(),
            MessageKind::FaultFlag(k) => format!("FaultFlag({k})"),
            MessageKind::ManeuverAnnounce(m) => format!("ManeuverAnnounce({m})"),
            MessageKind::JoinRequest => "JoinRequest".into(),
            MessageKind::TakeoverRequest => "TakeoverRequest".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct V2VMessage {
    pub sender: VehicleId,
    pub tick_sent: u64,
    pub kind: MessageKind,
}

impl V2VMessage {
    pub fn new(sender: VehicleId, tick_sent: u64, kind: MessageKind) -> Self {
        Self {
            sender,
            tick_sent,
            kind,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(ids: &[u32]) -> PlatoonInfo {
        PlatoonInfo::new(ids.iter().map(|&i| VehicleId(i)).collect())
    }

    #[test]
    fn platoon_info_neighbours() {
        let p = series(&[1, 2, 3]);
        assert_eq!(p.leader(), Some(VehicleId(1)));
        assert_eq!(p.predecessor(VehicleId(3)), Some(VehicleId(2)));
        assert_eq!(p.predecessor(VehicleId(1)), None);
        assert_eq!(p.successor(VehicleId(3)), None);
        assert!(p.is_behind(VehicleId(3), VehicleId(1)));
        assert!(!p.is_behind(VehicleId(1), VehicleId(3)));
        assert!(!p.is_behind(VehicleId(9), VehicleId(1)));
    }

    #[test]
    fn insertion_and_pruning_keep_size_in_sync() {
        let mut p = series(&[1, 2, 4]);
        assert!(p.insert_before(VehicleId(5), VehicleId(2)));
        assert_eq!(p, series(&[1, 5, 2, 4]));
        assert!(!p.insert_before(VehicleId(6), VehicleId(9)));
        p.truncate_from(VehicleId(2));
        assert_eq!(p, series(&[1, 5]));
        assert!(p.remove(VehicleId(5)));
        assert_eq!(p.size, 1);
    }

    #[test]
    fn maneuver_names_round_trip() {
        for m in Maneuver::BUILT_IN {
            assert_eq!(Maneuver::from_name(m.name()), m);
        }
        assert_eq!(
            Maneuver::from_name("Split-stub"),
            Maneuver::Extension("Split-stub".into())
        );
    }
}
