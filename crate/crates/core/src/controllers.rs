//! Control layer. Every law returns one acceleration command per tick; the
//! physical layer clamps it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comms::RadarReading;
use crate::types::VehicleId;

/// Constant-plus-headway spacing: `d0 + h·v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpacingPolicy {
    /// Standstill distance (m).
    pub d0: f64,
    pub h_base: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Headway sensitivity to relative speed (s²/m).
    pub k_h: f64,
}

impl Default for SpacingPolicy {
    fn default() -> Self {
        Self {
            d0: 3.0,
            h_base: 0.5,
            h_min: 0.25,
            h_max: 0.75,
            k_h: 0.05,
        }
    }
}

impl SpacingPolicy {
    /// Headway grows while closing in on the vehicle ahead and shrinks while
    /// falling back, always inside `[h_min, h_max]`.
    pub fn variable_headway(&self, rel_speed: f64) -> f64 {
        (self.h_base - self.k_h * rel_speed).clamp(self.h_min, self.h_max)
    }

    pub fn desired_gap(&self, headway: f64, v: f64) -> f64 {
        self.d0 + headway * v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainSet {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Relative-speed gain; also the speed-error gain of cruise control.
    pub kv: f64,
    /// Feed-forward gain on the preceding vehicle's broadcast acceleration.
    pub ka: f64,
    /// Bound on the integral contribution (m/s²).
    pub integral_clamp: f64,
}

impl Default for GainSet {
    fn default() -> Self {
        Self {
            kp: 0.45,
            ki: 0.02,
            kd: 0.1,
            kv: 0.6,
            ka: 0.3,
            integral_clamp: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TtcConfig {
    pub ttc_threshold: f64,
    pub min_gap_trigger: f64,
}

impl Default for TtcConfig {
    fn default() -> Self {
        Self {
            ttc_threshold: 2.0,
            min_gap_trigger: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ControlError {
    #[error("radar reading is not valid")]
    InvalidReading,
    #[error("preceding vehicle data is {age_ticks} ticks old")]
    StaleData { age_ticks: u64 },
}

/// PID memory for the gap loop of one vehicle.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PidState {
    integral: f64,
    prev_error: Option<f64>,
}

impl PidState {
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    fn update(&mut self, error: f64, gains: &GainSet, dt: f64) -> f64 {
        self.integral = (self.integral + gains.ki * error * dt)
            .clamp(-gains.integral_clamp, gains.integral_clamp);
        let derivative = self.prev_error.map_or(0.0, |prev| (error - prev) / dt);
        self.prev_error = Some(error);
        gains.kp * error + self.integral + gains.kd * derivative
    }
}

/// Speed and acceleration of the preceding vehicle as received over V2V.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeerKinematics {
    pub v: f64,
    pub a: f64,
    pub age_ticks: u64,
}

/// Cruise control.
pub fn cc(ego_v: f64, v_set: f64, gains: &GainSet) -> f64 {
    gains.kv * (v_set - ego_v)
}

/// Radar-only gap control at the maximum headway.
pub fn acc(
    reading: &RadarReading,
    ego_v: f64,
    policy: &SpacingPolicy,
    gains: &GainSet,
    pid: &mut PidState,
    dt: f64,
) -> Result<f64, ControlError> {
    if !reading.valid {
        return Err(ControlError::InvalidReading);
    }
    let error = reading.gap - policy.desired_gap(policy.h_max, ego_v);
    Ok(pid.update(error, gains, dt) + gains.kv * reading.rel_speed)
}

/// Cooperative gap control: radar gap, relative speed and acceleration feed
/// forward from the preceding vehicle's broadcast.
#[allow(clippy::too_many_arguments)]
pub fn cacc(
    reading: &RadarReading,
    peer: &PeerKinematics,
    ego_v: f64,
    policy: &SpacingPolicy,
    gains: &GainSet,
    pid: &mut PidState,
    dt: f64,
    timeout_ticks: u64,
) -> Result<f64, ControlError> {
    if !reading.valid {
        return Err(ControlError::InvalidReading);
    }
    if peer.age_ticks > timeout_ticks {
        return Err(ControlError::StaleData {
            age_ticks: peer.age_ticks,
        });
    }
    let rel_speed = peer.v - ego_v;
    let headway = policy.variable_headway(rel_speed);
    let error = reading.gap - policy.desired_gap(headway, ego_v);
    Ok(pid.update(error, gains, dt) + gains.kv * rel_speed + gains.ka * peer.a)
}

/// Emergency braking at full deceleration until standstill.
pub fn aeb(ego_v: f64, d_max: f64) -> f64 {
    if ego_v > 0.0 {
        -d_max
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TtcOutcome {
    None,
    CutIn,
    AebTrigger,
}

/// Classifies a newly appeared in-lane target. A target counts as new when
/// its track id differs from `previous_target`.
pub fn ttc_trigger(
    reading: &RadarReading,
    previous_target: Option<VehicleId>,
    cfg: &TtcConfig,
) -> TtcOutcome {
    if !reading.valid || reading.target.is_none() || reading.target == previous_target {
        return TtcOutcome::None;
    }
    let closing = -reading.rel_speed;
    let ttc_hit = closing > 0.0 && reading.gap / closing <= cfg.ttc_threshold;
    if ttc_hit || reading.gap <= cfg.min_gap_trigger {
        TtcOutcome::AebTrigger
    } else {
        TtcOutcome::CutIn
    }
}

/// Simulated human driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriverProfile {
    /// Speed-error gain.
    pub speed_gain: f64,
    /// Keeps `d0 + headway·v` behind the vehicle ahead when true.
    pub follows: bool,
    pub d0: f64,
    pub headway: f64,
    pub kp: f64,
    pub kv: f64,
    /// Bumper distance kept when braking to match a slower vehicle (m).
    pub brake_margin: f64,
}

impl Default for DriverProfile {
    fn default() -> Self {
        Self {
            speed_gain: 0.5,
            follows: true,
            d0: 3.0,
            headway: 1.0,
            kp: 0.3,
            kv: 1.0,
            brake_margin: 1.0,
        }
    }
}

impl DriverProfile {
    /// Intruders hold their speed and only brake to avoid hitting the car ahead.
    pub fn intruder() -> Self {
        Self {
            follows: false,
            ..Self::default()
        }
    }
}

/// Driver law: the most cautious of speed holding, following and
/// closing-speed braking. Without a usable reading only the speed term acts.
pub fn driver(reading: &RadarReading, ego_v: f64, v_des: f64, profile: &DriverProfile) -> f64 {
    let mut a = profile.speed_gain * (v_des - ego_v);
    if reading.valid && reading.target.is_some() {
        if profile.follows {
            let follow = profile.kp * (reading.gap - profile.d0 - profile.headway * ego_v)
                + profile.kv * reading.rel_speed;
            a = a.min(follow);
        }
        let closing = -reading.rel_speed;
        if closing > 0.0 {
            let room = (reading.gap - profile.brake_margin).max(0.1);
            a = a.min(-closing * closing / (2.0 * room));
        }
    }
    a
}
