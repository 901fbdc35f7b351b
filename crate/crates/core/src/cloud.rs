//! Cloud decision layer: replays the scripted events of a scenario and
//! answers rejoin requests. It sees the whole road and its instructions
//! never get lost.

use std::collections::{BTreeMap, VecDeque};

use crate::management::Instruction;
use crate::scenario::{EventSpec, ScenarioSpec};
use crate::types::{FaultKind, Maneuver, PlatoonInfo, VehicleId};

/// What the cloud wants to happen at this tick.
#[derive(Debug, Clone, PartialEq)]
pub enum CloudAction {
    Instruct(Instruction),
    CutIn(EventSpec),
    Fault { target: VehicleId, kind: FaultKind },
}

#[derive(Debug, Clone, PartialEq)]
enum Request {
    Join { target: VehicleId, position: Option<usize> },
    Leave { target: VehicleId },
    Extension { name: String, target: VehicleId },
}

impl Request {
    fn target(&self) -> VehicleId {
        match self {
            Request::Join { target, .. } | Request::Leave { target } | Request::Extension { target, .. } => *target,
        }
    }
}

/// Platoon state the cloud observes before issuing.
#[derive(Debug, Clone, Copy)]
pub struct CloudView<'a> {
    pub leader: VehicleId,
    pub platoon: &'a PlatoonInfo,
    pub maneuvers: &'a BTreeMap<VehicleId, Maneuver>,
}

#[derive(Debug, Clone, Default)]
pub struct CloudState {
    next_event: usize,
    /// JoinRequests waiting out the service delay, with their due tick.
    requests: VecDeque<(u64, VehicleId)>,
    /// Instructions waiting for the platoon to be free, in arrival order.
    pending: VecDeque<Request>,
    outstanding_join: Option<(VehicleId, u64)>,
    pub issued: Vec<(u64, Instruction)>,
    answered: Vec<(VehicleId, u64)>,
}

impl CloudState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers JoinRequests received at `tick`. Each request is answered
    /// once, after the service delay.
    pub fn receive_requests(&mut self, spec: &ScenarioSpec, senders: &[VehicleId], tick: u64) {
        let delay = spec.run.tick_of(spec.parameters.cloud.join_service_delay);
        for &s in senders {
            if !self.answered.contains(&(s, tick)) {
                self.answered.push((s, tick));
                self.requests.push_back((tick + delay, s));
            }
        }
    }
}

/// Actions due at `tick`, in scripted order.
pub fn cloud_tick(state: &mut CloudState, spec: &ScenarioSpec, view: &CloudView, tick: u64) -> Vec<CloudAction> {
    let mut out = Vec::new();
    while let Some(event) = spec.events.get(state.next_event) {
        if spec.run.tick_of(event.t()) > tick {
            break;
        }
        state.next_event += 1;
        match event {
            EventSpec::Join { target, position, .. } => state.pending.push_back(Request::Join {
                target: *target,
                position: *position,
            }),
            EventSpec::Leave { target, .. } => state.pending.push_back(Request::Leave { target: *target }),
            EventSpec::Extension { name, target, .. } => state.pending.push_back(Request::Extension {
                name: name.clone(),
                target: *target,
            }),
            EventSpec::CutIn { .. } => out.push(CloudAction::CutIn(event.clone())),
            EventSpec::Fault { target, fault, .. } => out.push(CloudAction::Fault {
                target: *target,
                kind: *fault,
            }),
        }
    }
    while state.requests.front().is_some_and(|(due, _)| *due <= tick) {
        let (_, target) = state.requests.pop_front().unwrap();
        state.pending.push_back(Request::Join { target, position: None });
    }

    if let Some((joiner, since)) = state.outstanding_join {
        let settled = tick > since && view.maneuvers.get(&joiner).is_none_or(|m| m.is_platooning());
        if settled {
            state.outstanding_join = None;
        }
    }
    if let Some(req) = state.pending.front() {
        if let Some(instr) = build(req, view) {
            let is_join = matches!(req, Request::Join { .. });
            let idle = instr
                .recipients()
                .iter()
                .all(|id| view.maneuvers.get(id).is_none_or(|m| m.is_platooning()));
            if idle && !(is_join && state.outstanding_join.is_some()) {
                if is_join {
                    state.outstanding_join = Some((instr.target, tick));
                }
                state.pending.pop_front();
                state.issued.push((tick, instr.clone()));
                out.push(CloudAction::Instruct(instr));
            }
        } else {
            // Already in the requested state (e.g. leaving a vehicle that is
            // no longer a member); nothing to instruct.
            state.pending.pop_front();
        }
    }
    out
}

/// Resolves a request against the current membership.
fn build(req: &Request, view: &CloudView) -> Option<Instruction> {
    let series = &view.platoon.id_series;
    let mut instr = Instruction {
        maneuver: Maneuver::JoinTail,
        target: req.target(),
        leader: view.leader,
        before: None,
        front: None,
        behind: None,
    };
    match req {
        Request::Join { target, position } => {
            if view.platoon.contains(*target) {
                return None;
            }
            if let Some(k) = position.filter(|&k| k >= 2 && k <= series.len()) {
                instr.maneuver = Maneuver::JoinMiddle;
                instr.before = Some(series[k - 1]);
                instr.front = Some(series[k - 2]);
            }
        }
        Request::Leave { target } => {
            if !view.platoon.contains(*target) || *target == view.leader {
                return None;
            }
            if view.platoon.tail() == Some(*target) {
                instr.maneuver = Maneuver::LeaveTail;
            } else {
                instr.maneuver = Maneuver::LeaveMiddle;
                instr.behind = view.platoon.successor(*target);
            }
        }
        Request::Extension { name, .. } => {
            instr.maneuver = Maneuver::Extension(name.clone());
        }
    }
    Some(instr)
}
