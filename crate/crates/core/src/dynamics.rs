//! Simulated multirotor plant.
//!
//! A point mass driven by a collective thrust vector whose direction follows
//! roll and pitch. Attitude tracks the commanded angles through a first-order
//! lag, which stands in for the inner attitude loop. Yaw is fixed at zero, so
//! the gravity-aligned frame shares its heading with the world frame.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{SVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("simulation diverged at t = {t:.3}s: {reason}")]
    Divergence { t: f64, reason: String },
    #[error("invalid plant parameters: {0}")]
    InvalidParams(String),
    #[error("invalid disturbance: {0}")]
    InvalidDisturbance(String),
}

/// World axis selector shared by disturbances and the oscillation monitor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Translational state in the world frame plus roll/pitch in the yaw-fixed frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub position_w: Vector3<f64>,
    pub velocity_w: Vector3<f64>,
    pub roll_i: f64,
    pub pitch_i: f64,
}

impl VehicleState {
    pub fn at_rest(position_w: Vector3<f64>) -> Self {
        Self { position_w, velocity_w: Vector3::zeros(), roll_i: 0.0, pitch_i: 0.0 }
    }

    /// Stacks the state as `[p, v, roll, pitch]`, the controller's ordering.
    pub fn to_vector(&self) -> SVector<f64, 8> {
        let p = &self.position_w;
        let v = &self.velocity_w;
        SVector::<f64, 8>::from_column_slice(&[p.x, p.y, p.z, v.x, v.y, v.z, self.roll_i, self.pitch_i])
    }

    pub fn is_valid(&self) -> bool {
        self.position_w.iter().all(|x| x.is_finite())
            && self.velocity_w.iter().all(|x| x.is_finite())
            && self.roll_i.is_finite()
            && self.pitch_i.is_finite()
            && self.roll_i.abs() < FRAC_PI_2
            && self.pitch_i.abs() < FRAC_PI_2
    }
}

/// Attitude and thrust command.
///
/// `thrust_delta` is relative to `hover_thrust`, the hover force the
/// controller believes in. The plant applies their sum, so a controller built
/// with the wrong mass produces a thrust bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlCommand {
    pub roll_cmd: f64,
    pub pitch_cmd: f64,
    pub thrust_delta: f64,
    pub hover_thrust: f64,
}

impl ControlCommand {
    pub fn hover(hover_thrust: f64) -> Self {
        Self { roll_cmd: 0.0, pitch_cmd: 0.0, thrust_delta: 0.0, hover_thrust }
    }

    /// Motors idle: level attitude, zero collective thrust.
    pub fn disarmed(hover_thrust: f64) -> Self {
        Self { roll_cmd: 0.0, pitch_cmd: 0.0, thrust_delta: -hover_thrust, hover_thrust }
    }

    pub fn collective_thrust(&self) -> f64 {
        self.hover_thrust + self.thrust_delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantParams {
    pub true_mass: f64,
    pub gravity: f64,
    pub attitude_tau: f64,
    pub thrust_min: f64,
    pub thrust_max: f64,
    pub max_tilt: f64,
    pub linear_drag: f64,
    /// Altitude of a flat ground plane; `None` lets the vehicle fall forever.
    pub ground_level: Option<f64>,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            true_mass: 1.0,
            gravity: 9.81,
            attitude_tau: 0.15,
            thrust_min: 0.0,
            thrust_max: 25.0,
            max_tilt: 0.35,
            linear_drag: 0.0,
            ground_level: Some(0.0),
        }
    }
}

impl PlantParams {
    pub fn hover_thrust(&self) -> f64 {
        self.true_mass * self.gravity
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidParams(m.to_string()));
        if !(self.true_mass > 0.0) {
            return bad("true_mass must be positive");
        }
        if !(self.gravity > 0.0) {
            return bad("gravity must be positive");
        }
        if !(self.attitude_tau > 0.0) {
            return bad("attitude_tau must be positive");
        }
        let weight = self.hover_thrust();
        if !(self.thrust_min < weight && weight < self.thrust_max) {
            return bad("hover thrust must lie strictly between thrust_min and thrust_max");
        }
        if !(self.max_tilt > 0.0 && self.max_tilt < FRAC_PI_2) {
            return bad("max_tilt must lie in (0, pi/2)");
        }
        if !(self.linear_drag >= 0.0) {
            return bad("linear_drag must be nonnegative");
        }
        Ok(())
    }
}

/// Sinusoidal force along one world axis, active on `[t_start, t_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPull {
    pub axis: Axis,
    pub force_amplitude: f64,
    pub frequency: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl PeriodicPull {
    pub fn force_at(&self, t: f64) -> Vector3<f64> {
        let mut f = Vector3::zeros();
        if t >= self.t_start && t < self.t_end {
            let phase = 2.0 * PI * self.frequency * (t - self.t_start);
            f[self.axis.index()] = self.force_amplitude * phase.sin();
        }
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DisturbanceSpec {
    pub constant_force_w: [f64; 3],
    /// Steady roll/pitch offset left over by the attitude loop, in radians.
    pub attitude_bias: [f64; 2],
    pub added_mass: f64,
    pub periodic_pull: Option<PeriodicPull>,
}

impl DisturbanceSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.added_mass >= 0.0) {
            return Err(SimError::InvalidDisturbance("added_mass must be nonnegative".into()));
        }
        if let Some(pull) = &self.periodic_pull {
            if !(pull.frequency > 0.0) {
                return Err(SimError::InvalidDisturbance("pull frequency must be positive".into()));
            }
            if !(pull.t_start < pull.t_end) {
                return Err(SimError::InvalidDisturbance("pull window must satisfy t_start < t_end".into()));
            }
        }
        Ok(())
    }

    pub fn external_force(&self, t: f64) -> Vector3<f64> {
        let mut f = Vector3::from(self.constant_force_w);
        if let Some(pull) = &self.periodic_pull {
            f += pull.force_at(t);
        }
        f
    }
}

/// Unit thrust direction in the world frame for the given roll and pitch (yaw = 0).
pub fn thrust_direction(roll: f64, pitch: f64) -> Vector3<f64> {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    Vector3::new(cr * sp, -sr, cr * cp)
}

/// Advances the plant by one step of `dt` seconds.
///
/// Attitude uses the exact discretization of the first-order lag; translation
/// uses semi-implicit Euler (velocity first, then position with the new velocity).
pub fn step_plant(
    state: &VehicleState,
    cmd: &ControlCommand,
    params: &PlantParams,
    dist: &DisturbanceSpec,
    t: f64,
    dt: f64,
) -> Result<VehicleState, SimError> {
    if !(dt > 0.0) {
        return Err(SimError::Divergence { t, reason: format!("non-positive step {dt}") });
    }

    let decay = (-dt / params.attitude_tau).exp();
    let roll_target = cmd.roll_cmd + dist.attitude_bias[0];
    let pitch_target = cmd.pitch_cmd + dist.attitude_bias[1];
    let roll = roll_target + (state.roll_i - roll_target) * decay;
    let pitch = pitch_target + (state.pitch_i - pitch_target) * decay;

    let mass = params.true_mass + dist.added_mass;
    let thrust = cmd.collective_thrust();
    let accel = thrust_direction(state.roll_i, state.pitch_i) * (thrust / mass)
        - Vector3::new(0.0, 0.0, params.gravity)
        + dist.external_force(t) / mass
        - state.velocity_w * params.linear_drag;

    let mut velocity = state.velocity_w + accel * dt;
    let mut position = state.position_w + velocity * dt;

    if let Some(ground) = params.ground_level {
        if position.z <= ground {
            position.z = ground;
            velocity = Vector3::zeros();
        }
    }

    let next = VehicleState { position_w: position, velocity_w: velocity, roll_i: roll, pitch_i: pitch };
    if !next.is_valid() {
        return Err(SimError::Divergence { t: t + dt, reason: format!("state left the valid envelope: {next:?}") });
    }
    Ok(next)
}
