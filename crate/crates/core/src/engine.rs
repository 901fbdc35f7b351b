//! Fixed-step simulation loop.

use std::collections::BTreeMap;
use std::fmt;

use crate::cloud::{cloud_tick, CloudAction, CloudState, CloudView};
use crate::comms::{radar_sense, v2v_payload, Bus, FaultBoard, PayloadView, PeerTable, RadarReading, Receiver};
use crate::controllers::{aeb, acc, cacc, cc, driver, DriverProfile, PeerKinematics, PidState};
use crate::dynamics::{detect_collisions, step_lateral, step_longitudinal, LaneGeometry};
use crate::management::{
    default_registry, tick_manage, DriverPlan, Instruction, ManageInputs, MindEvent, StrategyRegistry, VehicleMind,
};
use crate::scenario::{EventSpec, ScenarioSpec, SpecError};
use crate::trace::{RunReport, Trace, TraceRow, VehicleRow};
use crate::types::{
    ControllerKind, FaultKind, Heartbeat, Lateral, Longitudinal, Maneuver, MessageKind, PlatoonInfo, Role,
    V2VMessage, VehicleId, VehicleState,
};

/// One line of the event log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub tick: u64,
    pub time: f64,
    pub vehicle: Option<VehicleId>,
    pub text: String,
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.vehicle {
            Some(v) => write!(f, "{:>9.2} {:<5} {}", self.time, v.to_string(), self.text),
            None => write!(f, "{:>9.2} {:<5} {}", self.time, "cloud", self.text),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub report: RunReport,
    pub events: Vec<LogEntry>,
}

impl RunOutput {
    pub fn collided(&self) -> bool {
        self.report.summary.collided
    }

    pub fn events_log(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }
}

struct Agent {
    state: VehicleState,
    mind: VehicleMind,
    peers: PeerTable,
    pid: PidState,
    applied: Option<Longitudinal>,
    /// Last "no strategy" key reported, so a stuck cell is logged once.
    missing: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum IntruderPhase {
    Entering,
    Holding { since: u64 },
    Leaving,
    Gone,
}

impl IntruderPhase {
    fn name(&self) -> &'static str {
        match self {
            IntruderPhase::Entering => "Entering",
            IntruderPhase::Holding { .. } => "Holding",
            IntruderPhase::Leaving => "Leaving",
            IntruderPhase::Gone => "Gone",
        }
    }
}

struct Intruder {
    state: VehicleState,
    v_des: f64,
    origin_lane: u32,
    cut_lane: u32,
    hold_ticks: u64,
    phase: IntruderPhase,
}

impl Intruder {
    fn lateral(&self) -> Lateral {
        match self.phase {
            IntruderPhase::Entering => Lateral::LaneChange {
                target_lane: self.cut_lane,
            },
            IntruderPhase::Leaving => Lateral::LaneChange {
                target_lane: self.origin_lane,
            },
            _ => Lateral::LaneCenter,
        }
    }

    fn advance(&mut self, tick: u64) {
        let centered = self.state.lateral_offset == 0.0;
        self.phase = match self.phase {
            IntruderPhase::Entering if centered && self.state.lane == self.cut_lane => {
                IntruderPhase::Holding { since: tick }
            }
            IntruderPhase::Holding { since } if tick.saturating_sub(since) >= self.hold_ticks => IntruderPhase::Leaving,
            IntruderPhase::Leaving if centered && self.state.lane == self.origin_lane => IntruderPhase::Gone,
            p => p,
        };
    }
}

/// Mutable world of one run.
struct World<'a> {
    spec: &'a ScenarioSpec,
    registry: &'a StrategyRegistry,
    agents: BTreeMap<VehicleId, Agent>,
    intruders: BTreeMap<VehicleId, Intruder>,
    next_intruder: u32,
    bus: Bus,
    faults: FaultBoard,
    cloud: CloudState,
    log: Vec<LogEntry>,
    trace: Trace,
}

pub fn run(spec: &ScenarioSpec) -> Result<RunOutput, SpecError> {
    run_with_registry(spec, &default_registry())
}

/// Runs a scenario with a caller-supplied strategy registry.
pub fn run_with_registry(spec: &ScenarioSpec, registry: &StrategyRegistry) -> Result<RunOutput, SpecError> {
    spec.validate()?;
    let mut world = World::new(spec, registry);
    let ticks = spec.run.ticks();
    for tick in 0..ticks {
        let collided = world.step(tick);
        if collided && spec.run.halt_on_collision {
            break;
        }
    }
    let report = RunReport::from_trace(&world.trace, &spec.parameters.geometry, spec.platoon.leader);
    Ok(RunOutput {
        trace: world.trace,
        report,
        events: world.log,
    })
}

fn initial_mind(spec: &ScenarioSpec, vs: &crate::scenario::VehicleSpec) -> VehicleMind {
    let p = &spec.platoon;
    let mgmt = &spec.parameters.management;
    let mut mind = VehicleMind::free(
        vs.id,
        ControllerKind::longitudinal(Longitudinal::Driver { v_des: vs.v }),
        DriverPlan::cruise(vs.v),
    );
    if let Some(rank) = p.members.iter().position(|&m| m == vs.id) {
        mind.platoon = Some(PlatoonInfo::new(p.members.clone()));
        mind.driver_plan = None;
        if rank == 0 {
            mind.role = Role::Leader;
            mind.controller = ControllerKind::longitudinal(Longitudinal::Cc {
                v_set: mgmt.platoon_speed,
            });
        } else {
            mind.role = Role::Follower;
            mind.controller = ControllerKind::longitudinal(Longitudinal::Cacc {
                front: p.members[rank - 1],
                virtual_gap: false,
            });
        }
    }
    mind
}

impl<'a> World<'a> {
    fn new(spec: &'a ScenarioSpec, registry: &'a StrategyRegistry) -> Self {
        let geom = &spec.parameters.geometry;
        let mut agents = BTreeMap::new();
        for vs in &spec.vehicles {
            let state = VehicleState::new(vs.id, vs.s, vs.lane, vs.v, geom.vehicle_length);
            agents.insert(
                vs.id,
                Agent {
                    state,
                    mind: initial_mind(spec, vs),
                    peers: PeerTable::default(),
                    pid: PidState::default(),
                    applied: None,
                    missing: None,
                },
            );
        }
        // Everybody starts with a fresh heartbeat of everybody else.
        let hello: Vec<V2VMessage> = agents.values().map(|a| heartbeat(a, 0)).collect();
        for a in agents.values_mut() {
            a.peers.ingest(&hello);
        }
        let n = spec.vehicle_count() as u32;
        let mut columns: Vec<VehicleId> = agents.keys().copied().collect();
        columns.extend((1..=spec.cut_in_count() as u32).map(|k| VehicleId(n + k)));
        let mut world = Self {
            spec,
            registry,
            agents,
            intruders: BTreeMap::new(),
            next_intruder: n + 1,
            bus: Bus::new(spec.parameters.bus),
            faults: FaultBoard::new(),
            cloud: CloudState::new(),
            log: Vec::new(),
            trace: Trace::new(spec.spec_hash(), columns),
        };
        world.record(0);
        world
    }

    fn time(&self, tick: u64) -> f64 {
        tick as f64 * self.spec.run.dt
    }

    fn note(&mut self, tick: u64, vehicle: Option<VehicleId>, text: String) {
        let time = self.time(tick);
        self.log.push(LogEntry {
            tick,
            time,
            vehicle,
            text,
        });
    }

    fn all_states(&self) -> Vec<VehicleState> {
        self.agents
            .values()
            .map(|a| a.state)
            .chain(self.intruders.values().map(|i| i.state))
            .collect()
    }

    fn sense(&self, ego: &VehicleState, others: &[VehicleState], tick: u64) -> RadarReading {
        let p = &self.spec.parameters;
        let failed = self.faults.active(ego.id, FaultKind::RadarFail, tick);
        if failed && !self.spec.modes.degradation_enabled {
            // Without diagnosis the dead sensor reports an empty road.
            return RadarReading::empty(p.radar.max_range);
        }
        radar_sense(ego, others, failed, &p.radar, p.geometry.lane_width, p.geometry.vehicle_width)
    }

    /// Advances the world from `tick` to `tick + 1`. Returns true on contact.
    fn step(&mut self, tick: u64) -> bool {
        let spec = self.spec;
        let p = &spec.parameters;
        let dt = spec.run.dt;
        let degradation = spec.modes.degradation_enabled;

        // (1) cloud
        let instructions = self.cloud_phase(tick);

        // (2) sensing snapshot
        let states = self.all_states();
        let readings: BTreeMap<VehicleId, RadarReading> =
            states.iter().map(|s| (s.id, self.sense(s, &states, tick))).collect();

        // (3) bus
        let receivers: Vec<Receiver> = self
            .agents
            .values()
            .map(|a| Receiver {
                id: a.state.id,
                s: a.state.s,
            })
            .collect();
        let inboxes = self.bus.deliver(tick, &receivers, &self.faults);
        for (id, inbox) in &inboxes {
            if let Some(a) = self.agents.get_mut(id) {
                a.peers.ingest(inbox);
            }
        }

        // (4) management
        let ids: Vec<VehicleId> = self.agents.keys().copied().collect();
        let mut payloads: BTreeMap<VehicleId, PayloadView> = BTreeMap::new();
        let mut outgoing: Vec<V2VMessage> = Vec::new();
        let mut join_requests = Vec::new();
        let empty = Vec::new();
        for &id in &ids {
            let clear = self.clear_lanes(id, &states);
            let agent = self.agents.get_mut(&id).expect("agent exists");
            let watched: Vec<VehicleId> = match (&agent.mind.platoon, agent.mind.role) {
                (Some(pl), r) if r != Role::FreeVehicle => pl.id_series.clone(),
                _ => Vec::new(),
            };
            let payload = v2v_payload(
                id,
                &agent.peers,
                &watched,
                tick,
                p.management.heartbeat_timeout_ticks,
                degradation,
            );
            let own_faults = if degradation {
                self.faults.kinds(id, tick)
            } else {
                Vec::new()
            };
            let inputs = ManageInputs {
                tick,
                dt,
                ego: agent.state,
                radar: readings[&id],
                payload: &payload,
                inbox: inboxes.get(&id).unwrap_or(&empty),
                instructions: instructions.get(&id).map_or(&[][..], Vec::as_slice),
                own_faults: &own_faults,
                clear_lanes: &clear,
                lane_count: p.geometry.lane_count,
                degradation_enabled: degradation,
                params: &p.management,
                spacing: &p.spacing,
                ttc: &p.ttc,
            };
            let (out, events) = tick_manage(self.registry, &mut agent.mind, &inputs);
            for m in out.messages_out {
                if matches!(m.kind, MessageKind::JoinRequest) {
                    join_requests.push(m.sender);
                } else {
                    outgoing.push(m);
                }
            }
            outgoing.push(heartbeat(agent, tick));
            payloads.insert(id, payload);
            let time = tick as f64 * dt;
            let mut missing = None;
            for e in events {
                if let MindEvent::NoStrategy { key } = &e {
                    missing = Some(key.clone());
                    if agent.missing.as_ref() == Some(key) {
                        continue;
                    }
                }
                self.log.push(LogEntry {
                    tick,
                    time,
                    vehicle: Some(id),
                    text: e.to_string(),
                });
            }
            agent.missing = missing;
        }
        for m in &outgoing {
            if !matches!(m.kind, MessageKind::Heartbeat(_)) && !self.faults.active(m.sender, FaultKind::V2VFail, tick) {
                self.note(tick, Some(m.sender), format!("sends {}", m.kind.label()));
            }
        }
        self.bus.send(outgoing);
        if !join_requests.is_empty() {
            for s in &join_requests {
                self.note(tick, Some(*s), "asks the cloud to rejoin".into());
            }
            self.cloud.receive_requests(spec, &join_requests, tick);
        }

        // (5) controllers and (6) dynamics
        let mut lateral_errors = Vec::new();
        for &id in &ids {
            let reading = readings[&id];
            let agent = self.agents.get_mut(&id).expect("agent exists");
            let law = agent.mind.controller.longitudinal;
            if !agent.applied.is_some_and(|prev| prev.same_law(&law)) {
                agent.pid.reset();
            }
            agent.applied = Some(law);
            let a_cmd = command(agent, law, &reading, &payloads[&id], spec);
            let next = step_longitudinal(&agent.state, a_cmd, &p.dynamics, dt);
            let lateral = agent.mind.controller.lateral;
            agent.state = match step_lateral(&next, lateral, &p.geometry, dt) {
                Ok(s) => s,
                Err(e) => {
                    let fallback = step_lateral(&next, Lateral::LaneCenter, &p.geometry, dt).expect("centering never fails");
                    lateral_errors.push((id, e));
                    fallback
                }
            };
        }
        for (id, e) in lateral_errors {
            self.note(tick, Some(id), format!("{e}; keeping lane"));
        }
        let intruder_geom = LaneGeometry {
            lane_change_duration: p.intruder.lane_change_duration,
            ..p.geometry
        };
        let profile = DriverProfile::intruder();
        for (id, intr) in self.intruders.iter_mut() {
            let a_cmd = driver(&readings[id], intr.state.v, intr.v_des, &profile);
            let next = step_longitudinal(&intr.state, a_cmd, &p.dynamics, dt);
            intr.state = step_lateral(&next, intr.lateral(), &intruder_geom, dt).unwrap_or(next);
            intr.advance(tick + 1);
        }

        // (7) contacts and trace
        let states = self.all_states();
        let contacts = detect_collisions(&states, p.geometry.lane_width, p.geometry.vehicle_width);
        for (a, b) in &contacts {
            self.note(tick + 1, None, format!("collision between {a} and {b}"));
        }
        self.record(tick + 1);
        !contacts.is_empty()
    }

    fn cloud_phase(&mut self, tick: u64) -> BTreeMap<VehicleId, Vec<Instruction>> {
        let leader = self.spec.platoon.leader;
        let maneuvers: BTreeMap<VehicleId, Maneuver> =
            self.agents.iter().map(|(&id, a)| (id, a.mind.maneuver.clone())).collect();
        let platoon = self.agents[&leader]
            .mind
            .platoon
            .clone()
            .unwrap_or_else(|| PlatoonInfo::solo(leader));
        let view = CloudView {
            leader,
            platoon: &platoon,
            maneuvers: &maneuvers,
        };
        let actions = cloud_tick(&mut self.cloud, self.spec, &view, tick);
        let mut out: BTreeMap<VehicleId, Vec<Instruction>> = BTreeMap::new();
        for action in actions {
            match action {
                CloudAction::Instruct(instr) => {
                    self.note(tick, None, format!("instructs {} for {}", instr.maneuver, instr.target));
                    for r in instr.recipients() {
                        out.entry(r).or_default().push(instr.clone());
                    }
                }
                CloudAction::Fault { target, kind } => {
                    self.faults.inject(target, kind, tick);
                    self.note(tick, Some(target), format!("{kind} injected"));
                }
                CloudAction::CutIn(event) => self.spawn_intruder(&event, tick),
            }
        }
        out
    }

    fn spawn_intruder(&mut self, event: &EventSpec, tick: u64) {
        let EventSpec::CutIn {
            target,
            lane,
            s_offset,
            duration,
            ttc_satisfying,
            ..
        } = *event
        else {
            return;
        };
        let p = &self.spec.parameters;
        let dt = self.spec.run.dt;
        let t = self.agents[&target].state;
        if lane.abs_diff(t.lane) != 1 || t.lateral_offset != 0.0 {
            self.note(tick, None, format!("cut-in from lane {lane} skipped: {target} is not in the next lane"));
            return;
        }
        let closing = if ttc_satisfying {
            s_offset / (p.ttc.ttc_threshold / 2.0)
        } else {
            0.0
        };
        // Ticks until the intruder is inside the target's radar corridor.
        let rate = p.geometry.lane_width / p.intruder.lane_change_duration * dt;
        let mut n = 0u64;
        while p.geometry.lane_width - n as f64 * rate >= p.geometry.vehicle_width / 2.0 {
            n += 1;
        }
        let g0 = s_offset + closing * n as f64 * dt;
        let id = VehicleId(self.next_intruder);
        self.next_intruder += 1;
        let v = (t.v - closing).max(0.0);
        let state = VehicleState::new(id, t.s + g0 + p.geometry.vehicle_length, lane, v, p.geometry.vehicle_length);
        self.note(
            tick,
            Some(id),
            format!("cuts in from lane {lane} ahead of {target} at {v:.1} m/s"),
        );
        self.intruders.insert(
            id,
            Intruder {
                state,
                v_des: v,
                origin_lane: lane,
                cut_lane: t.lane,
                hold_ticks: self.spec.run.tick_of(duration),
                phase: IntruderPhase::Entering,
            },
        );
    }

    /// Adjacent lanes with no vehicle next to `id` within the clearance margin.
    fn clear_lanes(&self, id: VehicleId, states: &[VehicleState]) -> Vec<u32> {
        let g = &self.spec.parameters.geometry;
        let margin = self.spec.parameters.management.lane_clear_margin;
        let ego = self.agents[&id].state;
        let mut lanes = Vec::new();
        if ego.lane > 0 {
            lanes.push(ego.lane - 1);
        }
        if ego.lane + 1 < g.lane_count {
            lanes.push(ego.lane + 1);
        }
        lanes.retain(|&lane| {
            let center = lane as f64 * g.lane_width;
            !states.iter().any(|o| {
                o.id != id
                    && (o.lateral_position(g.lane_width) - center).abs() < 0.75 * g.lane_width
                    && o.rear() < ego.s + margin
                    && o.s > ego.rear() - margin
            })
        });
        lanes
    }

    fn record(&mut self, tick: u64) {
        let states = self.all_states();
        let g = &self.spec.parameters.geometry;
        let cells = self
            .trace
            .vehicles
            .iter()
            .map(|id| {
                if let Some(a) = self.agents.get(id) {
                    let reading = self.sense(&a.state, &states, tick);
                    let law = a.mind.controller.longitudinal;
                    Some(
                        VehicleRow {
                            s: a.state.s,
                            lane: a.state.lane,
                            y: a.state.lateral_position(g.lane_width),
                            v: a.state.v,
                            a: a.state.a,
                            ctrl: law.name().into(),
                            vset: law.setpoint(),
                            maneuver: a.mind.maneuver.name().into(),
                            role: a.mind.role.as_str().into(),
                            gap: reading.valid.then_some(reading.gap),
                            target: reading.target,
                            size: a.mind.platoon.as_ref().map_or(0, |p| p.size),
                            takeover: a.mind.taken_over,
                        }
                        .quantized(),
                    )
                } else {
                    self.intruders.get(id).map(|i| {
                        let reading = self.sense(&i.state, &states, tick);
                        VehicleRow {
                            s: i.state.s,
                            lane: i.state.lane,
                            y: i.state.lateral_position(g.lane_width),
                            v: i.state.v,
                            a: i.state.a,
                            ctrl: "Driver".into(),
                            vset: Some(i.v_des),
                            maneuver: i.phase.name().into(),
                            role: "Intruder".into(),
                            gap: reading.valid.then_some(reading.gap),
                            target: reading.target,
                            size: 0,
                            takeover: false,
                        }
                        .quantized()
                    })
                }
            })
            .collect();
        let time = crate::trace::quantize(self.time(tick));
        self.trace.rows.push(TraceRow { tick, time, cells });
    }
}

fn heartbeat(agent: &Agent, tick: u64) -> V2VMessage {
    V2VMessage::new(
        agent.state.id,
        tick,
        MessageKind::Heartbeat(Heartbeat {
            state: agent.state,
            role: agent.mind.role,
            platoon: agent.mind.platoon.clone(),
        }),
    )
}

/// Evaluates the selected longitudinal law. Gap laws fall back to radar-only
/// control, and that to holding speed, when their inputs are unusable.
fn command(agent: &mut Agent, law: Longitudinal, reading: &RadarReading, payload: &PayloadView, spec: &ScenarioSpec) -> f64 {
    let p = &spec.parameters;
    let dt = spec.run.dt;
    let v = agent.state.v;
    let ceiling = p.gains.kv * (p.speed_limit - v);
    let radar_only = |pid: &mut PidState| {
        acc(reading, v, &p.spacing, &p.gains, pid, dt)
            .map(|a| a.min(ceiling))
            .unwrap_or(0.0)
    };
    match law {
        Longitudinal::Cc { v_set } => cc(v, v_set, &p.gains),
        Longitudinal::Acc => radar_only(&mut agent.pid),
        Longitudinal::Cacc { front, virtual_gap } => {
            let Some(peer) = payload.peers.get(&front) else {
                return radar_only(&mut agent.pid);
            };
            let kin = PeerKinematics {
                v: peer.state.v,
                a: peer.state.a,
                age_ticks: peer.age_ticks,
            };
            let synthetic;
            let used = if virtual_gap {
                let s_front = peer.state.s + peer.state.v * peer.age_ticks as f64 * dt;
                synthetic = RadarReading {
                    valid: true,
                    gap: s_front - peer.state.length - agent.state.s,
                    rel_speed: peer.state.v - v,
                    max_range: reading.max_range,
                    target: Some(front),
                };
                &synthetic
            } else {
                reading
            };
            let timeout = if spec.modes.degradation_enabled {
                p.management.heartbeat_timeout_ticks
            } else {
                u64::MAX
            };
            match cacc(used, &kin, v, &p.spacing, &p.gains, &mut agent.pid, dt, timeout) {
                Ok(a) => a.min(ceiling),
                Err(_) => radar_only(&mut agent.pid),
            }
        }
        Longitudinal::Aeb => aeb(v, p.dynamics.d_max),
        Longitudinal::Driver { v_des } => driver(reading, v, v_des, &p.driver),
    }
}
