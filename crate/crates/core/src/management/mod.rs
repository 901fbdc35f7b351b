//! Management layer: maneuver and role selection, and the strategy registry
//! keyed by (maneuver, role).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comms::{PeerView, RadarReading};
use crate::controllers::SpacingPolicy;
use crate::types::{
    ControllerKind, FaultKind, Longitudinal, Maneuver, MessageKind, PlatoonInfo, Role, V2VMessage,
    VehicleId, VehicleState,
};

mod manager;
mod registry;
pub mod strategies;

pub use manager::{tick_manage, ManageInputs, MindEvent, VehicleMind};
pub use registry::{default_registry, RegistryError, Strategy, StrategyKey, StrategyRegistry};

/// Thresholds and setpoints used by the maneuver strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManagementParams {
    /// Cruise speed of the platoon (m/s).
    pub platoon_speed: f64,
    /// Radar gap at which a joiner announces itself and an evading follower
    /// has opened enough room (m).
    pub evade_gap: f64,
    pub evade_speed: f64,
    /// Speed the vehicles ahead of an emergency stop slow down to (m/s).
    pub aeb_wait_speed: f64,
    /// Set speed drop of a vehicle that lost its radar (m/s).
    pub radar_fault_speed_drop: f64,
    /// Driver reaction time after a takeover request (s).
    pub takeover_delay: f64,
    /// Delay between consecutive driver restarts after an emergency stop (s).
    pub restart_stagger: f64,
    pub restart_speed: f64,
    /// Speed above which a restarted vehicle asks the cloud to rejoin (m/s).
    pub rejoin_speed: f64,
    /// Maneuvers still running after this long are aborted (s).
    pub strategy_timeout: f64,
    /// Gap error a middle joiner must reach before changing lane (m).
    pub slot_tolerance: f64,
    /// Cruise speed of a vehicle that left the platoon (m/s).
    pub leave_speed: f64,
    pub heartbeat_timeout_ticks: u64,
    /// Free distance required ahead of and behind a lane change (m).
    pub lane_clear_margin: f64,
}

impl Default for ManagementParams {
    fn default() -> Self {
        Self {
            platoon_speed: 20.0,
            evade_gap: 30.0,
            evade_speed: 15.0,
            aeb_wait_speed: 10.0,
            radar_fault_speed_drop: 2.0,
            takeover_delay: 3.0,
            restart_stagger: 1.0,
            restart_speed: 20.0,
            rejoin_speed: 19.0,
            strategy_timeout: 60.0,
            slot_tolerance: 1.5,
            leave_speed: 24.0,
            heartbeat_timeout_ticks: 10,
            lane_clear_margin: 5.0,
        }
    }
}

/// A cloud instruction as delivered to the vehicles it concerns.
#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    pub maneuver: Maneuver,
    /// The joining or leaving vehicle.
    pub target: VehicleId,
    pub leader: VehicleId,
    /// Member the joiner is inserted in front of (middle join).
    pub before: Option<VehicleId>,
    /// Member the joiner lines up behind (middle join).
    pub front: Option<VehicleId>,
    /// Member directly behind the leaver (middle leave).
    pub behind: Option<VehicleId>,
}

impl Instruction {
    /// Vehicles that receive this instruction.
    pub fn recipients(&self) -> Vec<VehicleId> {
        let mut out = vec![self.target, self.leader];
        out.extend(self.before);
        out.extend(self.behind);
        out.sort();
        out.dedup();
        out
    }
}

/// What started the current maneuver.
#[derive(Debug, Clone, PartialEq)]
pub struct ManeuverInstance {
    pub maneuver: Maneuver,
    /// Vehicle that detected the event or announced the maneuver.
    pub origin: VehicleId,
    pub instruction: Option<Instruction>,
    pub fault: Option<(VehicleId, FaultKind)>,
}

/// Setpoint schedule for the simulated driver of a free vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverPlan {
    pub v_des: f64,
    /// The driver keeps the vehicle stopped until this tick.
    pub start_tick: u64,
    /// The driver asks the cloud to rejoin once up to speed.
    pub rejoin: bool,
    pub join_requested: bool,
}

impl DriverPlan {
    pub fn cruise(v_des: f64) -> Self {
        Self {
            v_des,
            start_tick: 0,
            rejoin: false,
            join_requested: false,
        }
    }

    pub fn target_speed(&self, tick: u64) -> f64 {
        if tick < self.start_tick {
            0.0
        } else {
            self.v_des
        }
    }
}

/// Read-only view of one vehicle at the current tick.
#[derive(Debug, Clone)]
pub struct StrategyContext<'a> {
    pub tick: u64,
    pub dt: f64,
    pub ego: VehicleState,
    pub role: Role,
    pub maneuver: &'a Maneuver,
    /// Controller applied during the previous tick.
    pub controller: ControllerKind,
    pub radar: RadarReading,
    /// Radar target that does not broadcast heartbeats.
    pub obstacle: Option<VehicleId>,
    pub peers: &'a BTreeMap<VehicleId, PeerView>,
    pub inbox: &'a [V2VMessage],
    pub platoon: Option<&'a PlatoonInfo>,
    pub instance: Option<&'a ManeuverInstance>,
    /// Faults the vehicle diagnosed on itself.
    pub own_faults: &'a [FaultKind],
    /// Adjacent lanes with room for a lane change.
    pub clear_lanes: &'a [u32],
    pub lane_count: u32,
    pub driver_plan: Option<DriverPlan>,
    pub params: &'a ManagementParams,
    pub spacing: &'a SpacingPolicy,
}

impl StrategyContext<'_> {
    /// True when a message of the given kind arrived from `sender` (any
    /// sender when `None`).
    pub fn received(&self, sender: Option<VehicleId>, pred: impl Fn(&MessageKind) -> bool) -> bool {
        self.inbox
            .iter()
            .any(|m| sender.is_none_or(|s| m.sender == s) && pred(&m.kind))
    }

    pub fn senders_of(&self, pred: impl Fn(&MessageKind) -> bool) -> Vec<VehicleId> {
        self.inbox.iter().filter(|m| pred(&m.kind)).map(|m| m.sender).collect()
    }

    pub fn leader(&self) -> Option<VehicleId> {
        self.platoon
            .and_then(PlatoonInfo::leader)
            .or_else(|| self.instance.and_then(|i| i.instruction.as_ref()).map(|i| i.leader))
    }

    pub fn predecessor(&self) -> Option<VehicleId> {
        self.platoon.and_then(|p| p.predecessor(self.ego.id))
    }

    /// 0 for the leader, 1 for the first follower and so on.
    pub fn rank(&self) -> Option<usize> {
        self.platoon.and_then(|p| p.position(self.ego.id))
    }

    pub fn instruction(&self) -> Option<&Instruction> {
        self.instance.and_then(|i| i.instruction.as_ref())
    }

    pub fn origin(&self) -> Option<VehicleId> {
        self.instance.map(|i| i.origin)
    }

    pub fn seconds_since(&self, tick: u64) -> f64 {
        self.tick.saturating_sub(tick) as f64 * self.dt
    }

    /// The steady controller of the current role.
    pub fn platooning_controller(&self) -> ControllerKind {
        let longitudinal = match self.role {
            Role::Leader => Longitudinal::Cc {
                v_set: self.params.platoon_speed,
            },
            Role::Follower => match self.predecessor() {
                Some(front) => Longitudinal::Cacc {
                    front,
                    virtual_gap: false,
                },
                None => Longitudinal::Acc,
            },
            Role::FreeVehicle => Longitudinal::Driver {
                v_des: self
                    .driver_plan
                    .map_or(self.ego.v, |p| p.target_speed(self.tick)),
            },
        };
        ControllerKind::longitudinal(longitudinal)
    }

    /// Preferred free adjacent lane: the higher-index lane first.
    pub fn exit_lane(&self) -> Option<u32> {
        let lane = self.ego.lane;
        let left = lane + 1;
        if left < self.lane_count && self.clear_lanes.contains(&left) {
            return Some(left);
        }
        lane.checked_sub(1).filter(|l| self.clear_lanes.contains(l))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyOutput {
    pub controller: ControllerKind,
    pub messages_out: Vec<V2VMessage>,
    pub platoon_update: Option<PlatoonInfo>,
    pub role_change: Option<Role>,
    pub maneuver_done: bool,
    pub takeover_requested: bool,
    pub driver_plan: Option<DriverPlan>,
}

impl StrategyOutput {
    pub fn hold(controller: ControllerKind) -> Self {
        Self {
            controller,
            messages_out: Vec::new(),
            platoon_update: None,
            role_change: None,
            maneuver_done: false,
            takeover_requested: false,
            driver_plan: None,
        }
    }

    pub fn with(longitudinal: Longitudinal) -> Self {
        Self::hold(ControllerKind::longitudinal(longitudinal))
    }

    pub fn send(mut self, ctx: &StrategyContext, kind: MessageKind) -> Self {
        self.messages_out.push(V2VMessage::new(ctx.ego.id, ctx.tick, kind));
        self
    }

    pub fn done(mut self) -> Self {
        self.maneuver_done = true;
        self
    }
}

/// Wait states of the strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub enum Phase {
    #[default]
    Start,
    WaitingGap,
    WaitingEvadeFlag,
    WaitingSlot,
    ChangingLane,
    WaitingJoinFlag,
    WaitingUpdateFlag,
    Braking,
    Standstill,
    WaitingSafeFlag,
    WaitingTakeover,
    /// Free for use by extension strategies.
    Custom(u32),
}

/// Resumable state of the running strategy. Reset on every maneuver entry.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StrategyProgress {
    pub phase: Phase,
    pub entered_tick: u64,
    pub phase_tick: u64,
    /// Strategy-specific scalar, e.g. a speed captured on entry.
    pub memo: Option<f64>,
    pub target: Option<VehicleId>,
    pub lane: Option<u32>,
    pub plan: Option<DriverPlan>,
    /// Own and originator positions in the series, captured on entry.
    pub rank: Option<usize>,
    pub origin_rank: Option<usize>,
}

impl StrategyProgress {
    pub fn new(tick: u64) -> Self {
        Self {
            entered_tick: tick,
            phase_tick: tick,
            ..Self::default()
        }
    }

    pub fn advance(&mut self, phase: Phase, tick: u64) {
        self.phase = phase;
        self.phase_tick = tick;
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("JoinFlag from {sender}, which no instruction names")]
    UnknownJoiner { sender: VehicleId },
    #[error("{0}")]
    Other(String),
}
