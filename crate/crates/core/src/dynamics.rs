//! Physical layer: point-mass longitudinal motion and kinematic lane changes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Lateral, VehicleId, VehicleState};

pub const G: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsLimits {
    /// Maximum acceleration (m/s²).
    pub a_max: f64,
    /// Maximum deceleration, positive (m/s²).
    pub d_max: f64,
    /// Maximum jerk (m/s³). `None` means unlimited.
    pub jerk_max: Option<f64>,
}

impl Default for DynamicsLimits {
    fn default() -> Self {
        Self {
            a_max: 0.30 * G,
            d_max: 1.00 * G,
            jerk_max: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaneGeometry {
    pub lane_count: u32,
    pub lane_width: f64,
    pub lane_change_duration: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
}

impl Default for LaneGeometry {
    fn default() -> Self {
        Self {
            lane_count: 3,
            lane_width: 3.5,
            lane_change_duration: 3.0,
            vehicle_length: 5.0,
            vehicle_width: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("invalid lane change from lane {from} to lane {to}")]
    InvalidLane { from: u32, to: u32 },
}

/// Advances speed and position by one step under the commanded acceleration.
/// The command is clamped to the limits; a vehicle reaching zero speed stops
/// there instead of reversing.
pub fn step_longitudinal(
    state: &VehicleState,
    a_cmd: f64,
    limits: &DynamicsLimits,
    dt: f64,
) -> VehicleState {
    let mut a = a_cmd.clamp(-limits.d_max, limits.a_max);
    if let Some(jerk) = limits.jerk_max {
        let da = jerk * dt;
        a = a.clamp(state.a - da, state.a + da);
    }
    let mut next = *state;
    let v_end = state.v + a * dt;
    if v_end < 0.0 {
        // Stops inside the step.
        next.s = state.s + state.v * state.v / (2.0 * -a);
        next.v = 0.0;
        next.a = if state.v > 0.0 { a } else { 0.0 };
    } else {
        next.s = state.s + state.v * dt + 0.5 * a * dt * dt;
        next.v = v_end;
        next.a = a;
    }
    next
}

/// Advances the lateral motion by one step.
pub fn step_lateral(
    state: &VehicleState,
    lateral: Lateral,
    geom: &LaneGeometry,
    dt: f64,
) -> Result<VehicleState, DynamicsError> {
    let rate = geom.lane_width / geom.lane_change_duration * dt;
    let mut next = *state;
    match lateral {
        Lateral::LaneCenter => {
            let off = state.lateral_offset;
            next.lateral_offset = if off.abs() <= rate {
                0.0
            } else {
                off - rate * off.signum()
            };
        }
        Lateral::LaneChange { target_lane } => {
            let adjacent = target_lane.abs_diff(state.lane) == 1;
            if !adjacent || target_lane >= geom.lane_count {
                return Err(DynamicsError::InvalidLane {
                    from: state.lane,
                    to: target_lane,
                });
            }
            let dir = if target_lane > state.lane { 1.0 } else { -1.0 };
            let off = state.lateral_offset + dir * rate;
            if off * dir >= geom.lane_width - 1e-9 {
                next.lane = target_lane;
                next.lateral_offset = 0.0;
            } else {
                next.lateral_offset = off;
            }
        }
    }
    Ok(next)
}

/// True when two vehicles overlap longitudinally and laterally by more than
/// half a vehicle width.
pub fn in_contact(a: &VehicleState, b: &VehicleState, lane_width: f64, vehicle_width: f64) -> bool {
    let longitudinal = a.rear() < b.s && b.rear() < a.s;
    let dy = (a.lateral_position(lane_width) - b.lateral_position(lane_width)).abs();
    longitudinal && dy < vehicle_width / 2.0
}

/// Every pair of vehicles in contact, as (lower id, higher id), sorted.
pub fn detect_collisions(
    states: &[VehicleState],
    lane_width: f64,
    vehicle_width: f64,
) -> Vec<(VehicleId, VehicleId)> {
    let mut out = Vec::new();
    for (i, a) in states.iter().enumerate() {
        for b in &states[i + 1..] {
            if in_contact(a, b, lane_width, vehicle_width) {
                out.push(if a.id < b.id { (a.id, b.id) } else { (b.id, a.id) });
            }
        }
    }
    out.sort();
    out.dedup();
    out
}
