//! Scenario files: a TOML document describing the vehicles, the scripted
//! events and any parameter overrides.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::comms::{BusConfig, RadarConfig};
use crate::controllers::{DriverProfile, GainSet, SpacingPolicy, TtcConfig};
use crate::dynamics::{DynamicsLimits, LaneGeometry};
use crate::management::ManagementParams;
use crate::types::{FaultKind, VehicleId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("event at t={t} references undeclared vehicle {id}")]
    UnknownTarget { t: f64, id: VehicleId },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dt: f64,
    pub duration: f64,
    /// Reserved for seeded noise; the built-in models are noise free.
    pub seed: u64,
    pub halt_on_collision: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            duration: 60.0,
            seed: 0,
            halt_on_collision: false,
        }
    }
}

impl RunConfig {
    pub fn ticks(&self) -> u64 {
        (self.duration / self.dt).round() as u64
    }

    pub fn tick_of(&self, t: f64) -> u64 {
        (t / self.dt).round() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Modes {
    pub degradation_enabled: bool,
}

impl Default for Modes {
    fn default() -> Self {
        Self {
            degradation_enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatoonSpec {
    pub leader: VehicleId,
    /// Initial series, front to back, leader first.
    pub members: Vec<VehicleId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub id: VehicleId,
    pub s: f64,
    pub lane: u32,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventSpec {
    /// Join `target`; with `position` it lands at that 1-based rank, otherwise
    /// at the tail.
    Join {
        t: f64,
        target: VehicleId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        position: Option<usize>,
    },
    Leave { t: f64, target: VehicleId },
    /// An intruder appears in the adjacent `lane` and cuts in ahead of
    /// `target`, first seen by its radar at `s_offset` metres.
    CutIn {
        t: f64,
        target: VehicleId,
        lane: u32,
        s_offset: f64,
        /// Time spent in the platoon lane before cutting out (s).
        duration: f64,
        ttc_satisfying: bool,
    },
    Fault { t: f64, target: VehicleId, fault: FaultKind },
    /// Cloud instruction for a maneuver provided by an extension strategy.
    Extension { t: f64, name: String, target: VehicleId },
}

impl EventSpec {
    pub fn t(&self) -> f64 {
        match self {
            EventSpec::Join { t, .. }
            | EventSpec::Leave { t, .. }
            | EventSpec::CutIn { t, .. }
            | EventSpec::Fault { t, .. }
            | EventSpec::Extension { t, .. } => *t,
        }
    }

    pub fn target(&self) -> VehicleId {
        match self {
            EventSpec::Join { target, .. }
            | EventSpec::Leave { target, .. }
            | EventSpec::CutIn { target, .. }
            | EventSpec::Fault { target, .. }
            | EventSpec::Extension { target, .. } => *target,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CloudParams {
    /// Time between a JoinRequest and the resulting instruction (s).
    pub join_service_delay: f64,
}

impl Default for CloudParams {
    fn default() -> Self {
        Self {
            join_service_delay: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntruderParams {
    pub lane_change_duration: f64,
}

impl Default for IntruderParams {
    fn default() -> Self {
        Self {
            lane_change_duration: 1.5,
        }
    }
}

/// Every tunable of the stack. Any subset may be overridden in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Parameters {
    /// Speed cap applied on top of the gap controllers (m/s).
    pub speed_limit: f64,
    pub dynamics: DynamicsLimits,
    pub geometry: LaneGeometry,
    pub spacing: SpacingPolicy,
    pub gains: GainSet,
    pub ttc: TtcConfig,
    pub bus: BusConfig,
    pub radar: RadarConfig,
    pub management: ManagementParams,
    pub driver: DriverProfile,
    pub cloud: CloudParams,
    pub intruder: IntruderParams,
}

impl Default for Parameters {
    fn default() -> Self {
        Self {
            speed_limit: 25.0,
            dynamics: DynamicsLimits::default(),
            geometry: LaneGeometry::default(),
            spacing: SpacingPolicy::default(),
            gains: GainSet::default(),
            ttc: TtcConfig::default(),
            bus: BusConfig::default(),
            radar: RadarConfig::default(),
            management: ManagementParams::default(),
            driver: DriverProfile::default(),
            cloud: CloudParams::default(),
            intruder: IntruderParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub modes: Modes,
    pub platoon: PlatoonSpec,
    pub vehicles: Vec<VehicleSpec>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
    #[serde(default)]
    pub parameters: Parameters,
}

impl ScenarioSpec {
    /// Parses and validates a scenario document.
    pub fn from_toml(text: &str) -> Result<Self, SpecError> {
        let spec: ScenarioSpec = toml::from_str(text).map_err(|e| SpecError::Parse(e.message().to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Hash of the canonical document, ignoring the seed.
    pub fn spec_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.run.seed = 0;
        hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
    }

    pub fn vehicle_count(&self) -> usize {
        self.vehicles.len()
    }

    pub fn cut_in_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, EventSpec::CutIn { .. }))
            .count()
    }

    pub fn has_fault(&self) -> bool {
        self.events.iter().any(|e| matches!(e, EventSpec::Fault { .. }))
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let invalid = |m: String| Err(SpecError::Invalid(m));
        let run = &self.run;
        if !(run.dt > 0.0 && run.dt.is_finite()) {
            return invalid(format!("dt must be positive, got {}", run.dt));
        }
        if !(run.duration > 0.0 && run.duration.is_finite()) {
            return invalid(format!("duration must be positive, got {}", run.duration));
        }
        let steps = run.duration / run.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return invalid(format!("duration {} is not a multiple of dt {}", run.duration, run.dt));
        }
        let geom = &self.parameters.geometry;
        if geom.lane_count == 0 || geom.vehicle_length <= 0.0 || geom.lane_width <= 0.0 {
            return invalid("lane geometry must be positive".into());
        }
        if self.vehicles.is_empty() {
            return invalid("no vehicles declared".into());
        }
        let mut ids: Vec<u32> = self.vehicles.iter().map(|v| v.id.0).collect();
        ids.sort_unstable();
        if ids != (1..=ids.len() as u32).collect::<Vec<_>>() {
            return invalid("vehicle ids must be 1..N without gaps or repeats".into());
        }
        for v in &self.vehicles {
            if v.lane >= geom.lane_count {
                return invalid(format!("{} starts in lane {} of {}", v.id, v.lane, geom.lane_count));
            }
            if !(v.v >= 0.0 && v.v.is_finite() && v.s.is_finite()) {
                return invalid(format!("{} has an invalid initial state", v.id));
            }
        }
        for (i, a) in self.vehicles.iter().enumerate() {
            for b in &self.vehicles[i + 1..] {
                if a.lane == b.lane && (a.s - b.s).abs() < geom.vehicle_length {
                    return invalid(format!("{} and {} overlap at start", a.id, b.id));
                }
            }
        }
        let declared: BTreeSet<VehicleId> = self.vehicles.iter().map(|v| v.id).collect();
        let p = &self.platoon;
        if p.members.first() != Some(&p.leader) {
            return invalid("platoon members must start with the leader".into());
        }
        let mut seen = BTreeSet::new();
        for m in &p.members {
            if !declared.contains(m) || !seen.insert(*m) {
                return invalid(format!("platoon member {m} is undeclared or repeated"));
            }
        }
        let state = |id: VehicleId| self.vehicles.iter().find(|v| v.id == id).copied().unwrap();
        for w in p.members.windows(2) {
            let (front, back) = (state(w[0]), state(w[1]));
            if front.lane != back.lane || front.s <= back.s {
                return invalid(format!("platoon members {} and {} are not lined up front to back in one lane", w[0], w[1]));
            }
        }
        let mut last_t = 0.0;
        for e in &self.events {
            let t = e.t();
            if !(t >= 0.0 && t <= run.duration) {
                return invalid(format!("event time {t} outside the run"));
            }
            if t < last_t {
                return invalid("events must be sorted by time".into());
            }
            last_t = t;
            if !declared.contains(&e.target()) {
                return Err(SpecError::UnknownTarget { t, id: e.target() });
            }
            match e {
                EventSpec::Join { position: Some(k), .. } if *k < 2 => {
                    return invalid(format!("join position {k} would displace the leader"));
                }
                EventSpec::Leave { target, .. } if *target == p.leader => {
                    return invalid("the leader cannot leave".into());
                }
                EventSpec::CutIn {
                    target,
                    lane,
                    s_offset,
                    duration,
                    ttc_satisfying,
                    ..
                } => {
                    // Adjacency to the target is checked at spawn.
                    if *lane >= geom.lane_count {
                        return invalid(format!("cut-in lane {lane} for {target} does not exist"));
                    }
                    if !(*s_offset > 0.0 && *duration > 0.0) {
                        return invalid("cut-in offset and duration must be positive".into());
                    }
                    if !ttc_satisfying && *s_offset <= self.parameters.ttc.min_gap_trigger {
                        return invalid(format!(
                            "cut-in offset {s_offset} would trip emergency braking; it must exceed {}",
                            self.parameters.ttc.min_gap_trigger
                        ));
                    }
                }
                EventSpec::Extension { name, .. } if name.is_empty() => {
                    return invalid("extension name is empty".into());
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[run]
dt = 0.05
duration = 10.0

[platoon]
leader = 1
members = [1, 2]

[[vehicles]]
id = 1
s = 100.0
lane = 1
v = 20.0

[[vehicles]]
id = 2
s = 82.0
lane = 1
v = 20.0
"#;

    #[test]
    fn parses_minimal_document() {
        let spec = ScenarioSpec::from_toml(BASE).unwrap();
        assert_eq!(spec.run.ticks(), 200);
        assert!(spec.modes.degradation_enabled);
        assert_eq!(spec.parameters, Parameters::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{BASE}\n[parameters.gains]\nkp = 0.5\nkq = 1.0\n");
        assert!(matches!(ScenarioSpec::from_toml(&text), Err(SpecError::Parse(_))));
        let text = BASE.replace("halt", "x").replace("[run]", "[run]\nbogus = 1");
        assert!(ScenarioSpec::from_toml(&text).is_err());
    }

    #[test]
    fn overrides_apply() {
        let text = format!("{BASE}\n[parameters.gains]\nkp = 0.5\n");
        let spec = ScenarioSpec::from_toml(&text).unwrap();
        assert_eq!(spec.parameters.gains.kp, 0.5);
        assert_eq!(spec.parameters.gains.kv, GainSet::default().kv);
    }

    #[test]
    fn events_are_tagged_by_kind() {
        let text = format!(
            "{BASE}\n[[events]]\nkind = \"fault\"\nt = 2.0\ntarget = 2\nfault = \"RadarFail\"\n\n[[events]]\nkind = \"join\"\nt = 3.0\ntarget = 2\nposition = 2\n"
        );
        let spec = ScenarioSpec::from_toml(&text).unwrap();
        assert_eq!(
            spec.events[0],
            EventSpec::Fault {
                t: 2.0,
                target: VehicleId(2),
                fault: FaultKind::RadarFail
            }
        );
        assert!(spec.has_fault());
    }

    #[test]
    fn validation_errors() {
        let undeclared = format!("{BASE}\n[[events]]\nkind = \"leave\"\nt = 1.0\ntarget = 9\n");
        assert!(matches!(
            ScenarioSpec::from_toml(&undeclared),
            Err(SpecError::UnknownTarget { .. })
        ));
        let unsorted = format!(
            "{BASE}\n[[events]]\nkind = \"leave\"\nt = 2.0\ntarget = 2\n\n[[events]]\nkind = \"leave\"\nt = 1.0\ntarget = 2\n"
        );
        assert!(matches!(ScenarioSpec::from_toml(&unsorted), Err(SpecError::Invalid(_))));
        let bad_dt = BASE.replace("dt = 0.05", "dt = 0.0");
        assert!(ScenarioSpec::from_toml(&bad_dt).is_err());
        let ragged = BASE.replace("duration = 10.0", "duration = 10.01");
        assert!(ScenarioSpec::from_toml(&ragged).is_err());
        let shallow = format!(
            "{BASE}\n[[events]]\nkind = \"cut_in\"\nt = 1.0\ntarget = 2\nlane = 2\ns_offset = 4.0\nduration = 5.0\nttc_satisfying = false\n"
        );
        assert!(ScenarioSpec::from_toml(&shallow).is_err());
    }

    #[test]
    fn hash_ignores_seed_but_not_dt() {
        let a = ScenarioSpec::from_toml(BASE).unwrap();
        let mut b = a.clone();
        b.run.seed = 42;
        assert_eq!(a.spec_hash(), b.spec_hash());
        b.run.dt = 0.1;
        assert_ne!(a.spec_hash(), b.spec_hash());
    }

    #[test]
    fn round_trips_through_toml() {
        let text = format!(
            "{BASE}\n[[events]]\nkind = \"cut_in\"\nt = 1.0\ntarget = 2\nlane = 2\ns_offset = 6.0\nduration = 5.0\nttc_satisfying = false\n"
        );
        let a = ScenarioSpec::from_toml(&text).unwrap();
        let b = ScenarioSpec::from_toml(&a.to_toml()).unwrap();
        assert_eq!(a, b);
    }
}
