use std::collections::{BTreeSet, VecDeque};

use super::registry::{StrategyKey, StrategyRegistry};
use super::{
    DriverPlan, Instruction, ManagementParams, ManeuverInstance, StrategyContext, StrategyOutput,
    StrategyProgress,
};
use crate::comms::{PayloadView, RadarReading};
use crate::controllers::{ttc_trigger, SpacingPolicy, TtcConfig, TtcOutcome};
use crate::fsm::{maneuver_transition, role_transition, ManeuverTrigger, RoleCause};
use crate::types::{
    ControllerKind, FaultKind, Maneuver, MessageKind, PlatoonInfo, Role, V2VMessage, VehicleId,
    VehicleState,
};

/// Management state of one vehicle, persisting across ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleMind {
    pub id: VehicleId,
    pub role: Role,
    pub maneuver: Maneuver,
    pub progress: StrategyProgress,
    pub controller: ControllerKind,
    /// The leader's copy is authoritative; members keep a replica.
    pub platoon: Option<PlatoonInfo>,
    pub instance: Option<ManeuverInstance>,
    pub driver_plan: Option<DriverPlan>,
    pub last_radar_target: Option<VehicleId>,
    /// Faulty vehicles this one has already reacted to.
    pub acknowledged_faults: BTreeSet<VehicleId>,
    /// Cloud instructions that arrived while busy.
    pub queued: VecDeque<Instruction>,
    /// Set once a takeover was requested; such a vehicle never rejoins.
    pub taken_over: bool,
}

impl VehicleMind {
    pub fn free(id: VehicleId, controller: ControllerKind, plan: DriverPlan) -> Self {
        Self {
            id,
            role: Role::FreeVehicle,
            maneuver: Maneuver::Platooning,
            progress: StrategyProgress::default(),
            controller,
            platoon: None,
            instance: None,
            driver_plan: Some(plan),
            last_radar_target: None,
            acknowledged_faults: BTreeSet::new(),
            queued: VecDeque::new(),
            taken_over: false,
        }
    }

    pub fn key(&self) -> StrategyKey {
        StrategyKey::new(self.maneuver.clone(), self.role)
    }

    fn enter(&mut self, maneuver: Maneuver, instance: ManeuverInstance, tick: u64) {
        self.maneuver = maneuver;
        self.instance = Some(instance);
        self.progress = StrategyProgress::new(tick);
    }
}

/// Everything the vehicle perceives at this tick.
#[derive(Debug, Clone)]
pub struct ManageInputs<'a> {
    pub tick: u64,
    pub dt: f64,
    pub ego: VehicleState,
    pub radar: RadarReading,
    pub payload: &'a PayloadView,
    pub inbox: &'a [V2VMessage],
    pub instructions: &'a [Instruction],
    /// Self-diagnosed faults; empty when degradation is disabled.
    pub own_faults: &'a [FaultKind],
    pub clear_lanes: &'a [u32],
    pub lane_count: u32,
    pub degradation_enabled: bool,
    pub params: &'a ManagementParams,
    pub spacing: &'a SpacingPolicy,
    pub ttc: &'a TtcConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MindEvent {
    ManeuverStarted { maneuver: Maneuver, origin: VehicleId },
    ManeuverCompleted { maneuver: Maneuver },
    ManeuverAborted { maneuver: Maneuver, reason: String },
    RoleChanged { from: Role, to: Role },
    TakeoverRequested,
    PlatoonUpdated { series: Vec<VehicleId> },
    TriggerDropped { trigger: String },
    InstructionQueued { maneuver: Maneuver },
    NoStrategy { key: String },
    StrategyFailed { reason: String },
    IllegalTransition { reason: String },
}

impl std::fmt::Display for MindEvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MindEvent::ManeuverStarted { maneuver, origin } => {
                write!(f, "maneuver {maneuver} started (origin {origin})")
            }
            MindEvent::ManeuverCompleted { maneuver } => write!(f, "maneuver {maneuver} completed"),
            MindEvent::ManeuverAborted { maneuver, reason } => {
                write!(f, "maneuver {maneuver} aborted: {reason}")
            }
            MindEvent::RoleChanged { from, to } => write!(f, "role {from} -> {to}"),
            MindEvent::TakeoverRequested => f.write_str("takeover requested"),
            MindEvent::PlatoonUpdated { series } => {
                let ids: Vec<String> = series.iter().map(|i| i.to_string()).collect();
                write!(f, "platoon [{}]", ids.join(","))
            }
            MindEvent::TriggerDropped { trigger } => write!(f, "trigger dropped: {trigger}"),
            MindEvent::InstructionQueued { maneuver } => write!(f, "instruction {maneuver} queued"),
            MindEvent::NoStrategy { key } => write!(f, "no strategy for {key}, holding controller"),
            MindEvent::StrategyFailed { reason } => write!(f, "strategy error: {reason}"),
            MindEvent::IllegalTransition { reason } => write!(f, "illegal transition: {reason}"),
        }
    }
}

enum Source {
    Cloud(Instruction),
    Fault(VehicleId, FaultKind),
    Sensor,
    Announce(VehicleId),
}

/// One management step: trigger handling, strategy dispatch and application
/// of the strategy's role and membership changes.
pub fn tick_manage(
    registry: &StrategyRegistry,
    mind: &mut VehicleMind,
    inp: &ManageInputs,
) -> (StrategyOutput, Vec<MindEvent>) {
    let mut events = Vec::new();
    adopt_replica(mind, inp);

    let obstacle = inp
        .radar
        .target
        .filter(|t| inp.radar.valid && !inp.payload.peers.contains_key(t));

    let mut triggers: Vec<(ManeuverTrigger, Source)> = Vec::new();
    let queued: Vec<Instruction> = mind.queued.drain(..).collect();
    for instr in queued.into_iter().chain(inp.instructions.iter().cloned()) {
        triggers.push((ManeuverTrigger::CloudInstruction(instr.maneuver.clone()), Source::Cloud(instr)));
    }
    if inp.degradation_enabled {
        for (vehicle, kind) in fault_candidates(mind, inp) {
            if mind.acknowledged_faults.insert(vehicle) {
                triggers.push((ManeuverTrigger::HardwareFault { vehicle, kind }, Source::Fault(vehicle, kind)));
            }
        }
    }
    if mind.role != Role::FreeVehicle && obstacle.is_some() {
        match ttc_trigger(&inp.radar, mind.last_radar_target, inp.ttc) {
            TtcOutcome::AebTrigger => triggers.push((
                ManeuverTrigger::ObstacleTtc {
                    at_head: mind.role == Role::Leader,
                },
                Source::Sensor,
            )),
            TtcOutcome::CutIn => triggers.push((ManeuverTrigger::ObstacleCutIn, Source::Sensor)),
            TtcOutcome::None => {}
        }
    }
    if inp.radar.valid {
        mind.last_radar_target = inp.radar.target;
    }
    if mind.role != Role::FreeVehicle {
        for msg in inp.inbox {
            if let MessageKind::ManeuverAnnounce(m) = &msg.kind {
                if mind.platoon.as_ref().is_some_and(|p| p.contains(msg.sender)) {
                    triggers.push((ManeuverTrigger::PeerAnnounce(m.clone()), Source::Announce(msg.sender)));
                }
            }
        }
    }

    let mut announce = None;
    for (trigger, source) in triggers {
        if let Source::Fault(..) = source {
            if mind.maneuver == Maneuver::HardwareFailures {
                continue;
            }
        }
        match maneuver_transition(&mind.maneuver, &trigger) {
            Ok(next) => {
                let (origin, instruction, fault) = match source {
                    Source::Cloud(i) => (i.target, Some(i), None),
                    Source::Fault(v, k) => (v, None, Some((v, k))),
                    Source::Sensor => {
                        announce = Some(next.clone());
                        (mind.id, None, None)
                    }
                    Source::Announce(s) => (s, None, None),
                };
                events.push(MindEvent::ManeuverStarted {
                    maneuver: next.clone(),
                    origin,
                });
                let instance = ManeuverInstance {
                    maneuver: next.clone(),
                    origin,
                    instruction,
                    fault,
                };
                mind.enter(next, instance, inp.tick);
            }
            Err(_) => match source {
                Source::Cloud(i) => {
                    events.push(MindEvent::InstructionQueued {
                        maneuver: i.maneuver.clone(),
                    });
                    mind.queued.push_back(i);
                }
                _ => events.push(MindEvent::TriggerDropped {
                    trigger: format!("{trigger:?}"),
                }),
            },
        }
    }

    if !mind.maneuver.is_platooning() && mind.maneuver != Maneuver::HardwareFailures {
        let elapsed = inp.tick.saturating_sub(mind.progress.entered_tick) as f64 * inp.dt;
        if elapsed > inp.params.strategy_timeout {
            events.push(MindEvent::ManeuverAborted {
                maneuver: mind.maneuver.clone(),
                reason: format!("no progress after {:.1} s", elapsed),
            });
            mind.maneuver = Maneuver::Platooning;
            mind.instance = None;
            mind.progress = StrategyProgress::new(inp.tick);
        }
    }

    let key = mind.key();
    let Some(strategy) = registry.lookup(&key) else {
        events.push(MindEvent::NoStrategy {
            key: key.to_string(),
        });
        return (StrategyOutput::hold(mind.controller), events);
    };
    let ctx = StrategyContext {
        tick: inp.tick,
        dt: inp.dt,
        ego: inp.ego,
        role: mind.role,
        maneuver: &mind.maneuver,
        controller: mind.controller,
        radar: inp.radar,
        obstacle,
        peers: &inp.payload.peers,
        inbox: inp.inbox,
        platoon: mind.platoon.as_ref(),
        instance: mind.instance.as_ref(),
        own_faults: inp.own_faults,
        clear_lanes: inp.clear_lanes,
        lane_count: inp.lane_count,
        driver_plan: mind.driver_plan,
        params: inp.params,
        spacing: inp.spacing,
    };
    let mut progress = std::mem::take(&mut mind.progress);
    let result = strategy.step(&ctx, &mut progress);
    mind.progress = progress;
    let mut out = match result {
        Ok(out) => out,
        Err(e) => {
            events.push(MindEvent::StrategyFailed {
                reason: e.to_string(),
            });
            StrategyOutput::hold(mind.controller)
        }
    };
    if let Some(m) = announce {
        out.messages_out
            .push(V2VMessage::new(mind.id, inp.tick, MessageKind::ManeuverAnnounce(m)));
    }
    apply_output(mind, &mut out, inp.tick, &mut events);
    (out, events)
}

fn adopt_replica(mind: &mut VehicleMind, inp: &ManageInputs) {
    if mind.role == Role::Leader {
        return;
    }
    let leader = mind.platoon.as_ref().and_then(PlatoonInfo::leader).or_else(|| {
        mind.instance
            .as_ref()
            .and_then(|i| i.instruction.as_ref())
            .map(|i| i.leader)
    });
    let Some(leader) = leader else { return };
    if let Some(view) = inp.payload.peers.get(&leader) {
        if view.zeroed {
            return;
        }
        if let Some(p) = &view.platoon {
            if mind.role == Role::Follower || p.contains(mind.id) {
                mind.platoon = Some(p.clone());
            }
        }
    }
}

fn fault_candidates(mind: &VehicleMind, inp: &ManageInputs) -> Vec<(VehicleId, FaultKind)> {
    let mut out: Vec<(VehicleId, FaultKind)> = inp.own_faults.iter().map(|&k| (mind.id, k)).collect();
    let members = mind.platoon.as_ref();
    if mind.role == Role::FreeVehicle || members.is_none() {
        return out;
    }
    let members = members.unwrap();
    for msg in inp.inbox {
        if let MessageKind::FaultFlag(kind) = msg.kind {
            if members.contains(msg.sender) {
                out.push((msg.sender, kind));
            }
        }
    }
    if !inp.own_faults.contains(&FaultKind::V2VFail) {
        for &id in &inp.payload.silent {
            if members.contains(id) {
                out.push((id, FaultKind::V2VFail));
            }
        }
    }
    out
}

fn apply_output(mind: &mut VehicleMind, out: &mut StrategyOutput, tick: u64, events: &mut Vec<MindEvent>) {
    if let Some(p) = out.platoon_update.clone() {
        events.push(MindEvent::PlatoonUpdated {
            series: p.id_series.clone(),
        });
        mind.platoon = Some(p);
    }
    if out.takeover_requested && !mind.taken_over {
        mind.taken_over = true;
        events.push(MindEvent::TakeoverRequested);
    }
    if let Some(to) = out.role_change {
        let cause = if mind.maneuver == Maneuver::HardwareFailures {
            Some(RoleCause::TakeoverCompleted)
        } else {
            RoleCause::for_maneuver(&mind.maneuver)
        };
        let allowed = match cause {
            Some(cause) if !(mind.taken_over && to == Role::Follower) => {
                role_transition(mind.role, cause).map_err(|e| e.to_string())
            }
            Some(_) => Err("a vehicle that was taken over cannot rejoin".into()),
            None => Err(format!("{} does not change roles", mind.maneuver)),
        };
        match allowed {
            Ok(r) if r == to => {
                events.push(MindEvent::RoleChanged { from: mind.role, to });
                mind.role = to;
            }
            Ok(r) => events.push(MindEvent::IllegalTransition {
                reason: format!("requested role {to}, selection gives {r}"),
            }),
            Err(reason) => {
                events.push(MindEvent::IllegalTransition { reason });
                out.role_change = None;
            }
        }
    }
    if let Some(plan) = out.driver_plan {
        mind.driver_plan = Some(plan);
    }
    if out.maneuver_done {
        match maneuver_transition(&mind.maneuver, &ManeuverTrigger::Completed) {
            Ok(next) => {
                events.push(MindEvent::ManeuverCompleted {
                    maneuver: mind.maneuver.clone(),
                });
                mind.maneuver = next;
                mind.instance = None;
                mind.progress = StrategyProgress::new(tick);
            }
            Err(e) => events.push(MindEvent::IllegalTransition {
                reason: e.to_string(),
            }),
        }
    }
    if mind.role == Role::FreeVehicle && mind.maneuver.is_platooning() {
        mind.platoon = None;
    }
    mind.controller = out.controller;
}
