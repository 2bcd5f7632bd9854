//! Mission state machine and reference generation.
//!
//! Phases advance on timers (`Idle -> Takeoff -> FollowTrajectory -> Hover ->
//! Land -> Done`). An emergency request moves any phase except `Done` into
//! `EmergencyLanding`, which descends straight down and ends in `Done` once
//! the vehicle is on the ground.
//!
//! Every phase is anchored at the reference position it inherited from the
//! previous phase, so the reference never jumps at a transition.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::VehicleState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid mission plan: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhaseKind {
    Idle,
    Takeoff,
    FollowTrajectory,
    Hover,
    Land,
    EmergencyLanding,
    Done,
}

impl PhaseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseKind::Idle => "Idle",
            PhaseKind::Takeoff => "Takeoff",
            PhaseKind::FollowTrajectory => "FollowTrajectory",
            PhaseKind::Hover => "Hover",
            PhaseKind::Land => "Land",
            PhaseKind::EmergencyLanding => "EmergencyLanding",
            PhaseKind::Done => "Done",
        }
    }

    /// Motors are spinning and the controller is in charge.
    pub fn is_armed(self) -> bool {
        !matches!(self, PhaseKind::Idle | PhaseKind::Done)
    }
}

impl std::fmt::Display for PhaseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissionPhase {
    pub kind: PhaseKind,
    pub entered_at: f64,
    /// Reference position at the moment this phase was entered.
    pub anchor: Vector3<f64>,
}

impl MissionPhase {
    pub fn start(state: &VehicleState, t: f64) -> Self {
        Self { kind: PhaseKind::Idle, entered_at: t, anchor: state.position_w }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    HoverSetpoint,
    FigureEight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub center: [f64; 3],
    pub semi_axis_a: f64,
    pub semi_axis_b: f64,
    pub average_speed: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            kind: TrajectoryKind::FigureEight,
            center: [0.0, 0.0, 1.0],
            semi_axis_a: 1.0,
            semi_axis_b: 0.5,
            average_speed: 0.25,
        }
    }
}

impl TrajectorySpec {
    /// Arc length of one lap of `(a sin s, b sin 2s)`, by composite Simpson.
    pub fn lap_length(&self) -> f64 {
        const INTERVALS: usize = 256;
        let (a, b) = (self.semi_axis_a, self.semi_axis_b);
        let speed = |s: f64| {
            let dx = a * s.cos();
            let dy = 2.0 * b * (2.0 * s).cos();
            dx.hypot(dy)
        };
        let h = 2.0 * PI / INTERVALS as f64;
        let mut acc = speed(0.0) + speed(2.0 * PI);
        for i in 1..INTERVALS {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * speed(i as f64 * h);
        }
        acc * h / 3.0
    }

    /// Parameter rate `ds/dt` that makes the time-averaged speed equal `average_speed`.
    pub fn angular_rate(&self) -> f64 {
        2.0 * PI * self.average_speed / self.lap_length()
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.angular_rate()
    }

    pub fn sample(&self, elapsed: f64) -> ReferencePoint {
        let center = Vector3::from(self.center);
        match self.kind {
            TrajectoryKind::HoverSetpoint => ReferencePoint::hold(center),
            TrajectoryKind::FigureEight => {
                let w = self.angular_rate();
                let s = w * elapsed;
                let (a, b) = (self.semi_axis_a, self.semi_axis_b);
                ReferencePoint {
                    position_ref: center + Vector3::new(a * s.sin(), b * (2.0 * s).sin(), 0.0),
                    velocity_ref: Vector3::new(a * w * s.cos(), 2.0 * b * w * (2.0 * s).cos(), 0.0),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseDurations {
    pub idle: f64,
    pub takeoff: f64,
    pub follow_trajectory: f64,
    pub hover: f64,
}

impl Default for PhaseDurations {
    fn default() -> Self {
        Self { idle: 2.0, takeoff: 5.0, follow_trajectory: 100.0, hover: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionPlan {
    pub takeoff_altitude: f64,
    pub ascent_rate: f64,
    pub descent_rate: f64,
    pub emergency_descent_rate: f64,
    /// Altitude at or below which the vehicle counts as landed.
    pub ground_threshold: f64,
    /// Landing references aim this far below the ground so touchdown is certain.
    pub touchdown_margin: f64,
    pub durations: PhaseDurations,
    pub trajectory: TrajectorySpec,
}

impl Default for MissionPlan {
    fn default() -> Self {
        Self {
            takeoff_altitude: 1.0,
            ascent_rate: 0.3,
            descent_rate: 0.3,
            emergency_descent_rate: 0.3,
            ground_threshold: 0.05,
            touchdown_margin: 0.1,
            durations: PhaseDurations::default(),
            trajectory: TrajectorySpec::default(),
        }
    }
}

impl MissionPlan {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: &str| Err(PlanError::Invalid(m.to_string()));
        let d = &self.durations;
        if [d.idle, d.takeoff, d.follow_trajectory, d.hover].iter().any(|x| !(*x > 0.0)) {
            return bad("phase durations must be positive");
        }
        if [self.ascent_rate, self.descent_rate, self.emergency_descent_rate].iter().any(|x| !(*x > 0.0)) {
            return bad("ascent and descent rates must be positive");
        }
        if !(self.takeoff_altitude > self.ground_threshold) {
            return bad("takeoff altitude must be above the ground threshold");
        }
        if !(self.touchdown_margin >= 0.0) {
            return bad("touchdown margin must be nonnegative");
        }
        let tr = &self.trajectory;
        if !(tr.semi_axis_a > 0.0 && tr.semi_axis_b > 0.0 && tr.average_speed > 0.0) {
            return bad("trajectory semi-axes and speed must be positive");
        }
        if (tr.center[2] - self.takeoff_altitude).abs() > 1e-9 {
            return bad("trajectory center altitude must equal the takeoff altitude");
        }
        Ok(())
    }

    /// Where takeoff climbs to: the trajectory start point.
    pub fn takeoff_target(&self) -> Vector3<f64> {
        let c = self.trajectory.center;
        Vector3::new(c[0], c[1], self.takeoff_altitude)
    }

    fn landing_floor(&self) -> f64 {
        -self.touchdown_margin
    }
}

/// Position and velocity the controller tracks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePoint {
    pub position_ref: Vector3<f64>,
    pub velocity_ref: Vector3<f64>,
}

impl ReferencePoint {
    pub fn hold(position: Vector3<f64>) -> Self {
        Self { position_ref: position, velocity_ref: Vector3::zeros() }
    }

    pub fn is_finite(&self) -> bool {
        self.position_ref.iter().chain(self.velocity_ref.iter()).all(|x| x.is_finite())
    }
}

fn ramp_toward(from: Vector3<f64>, to: Vector3<f64>, rate: f64, elapsed: f64) -> ReferencePoint {
    let delta = to - from;
    let dist = delta.norm();
    let travelled = rate * elapsed.max(0.0);
    if dist == 0.0 || travelled >= dist {
        return ReferencePoint::hold(to);
    }
    let dir = delta / dist;
    ReferencePoint { position_ref: from + dir * travelled, velocity_ref: dir * rate }
}

fn descend(anchor: Vector3<f64>, floor: f64, rate: f64, elapsed: f64) -> ReferencePoint {
    if anchor.z <= floor {
        return ReferencePoint::hold(anchor);
    }
    let target = Vector3::new(anchor.x, anchor.y, floor);
    ramp_toward(anchor, target, rate, elapsed)
}

/// Reference for `phase` at time `t`. Pure in its arguments.
pub fn generate_reference(phase: &MissionPhase, plan: &MissionPlan, t: f64) -> ReferencePoint {
    let elapsed = t - phase.entered_at;
    match phase.kind {
        PhaseKind::Idle | PhaseKind::Hover | PhaseKind::Done => ReferencePoint::hold(phase.anchor),
        PhaseKind::Takeoff => ramp_toward(phase.anchor, plan.takeoff_target(), plan.ascent_rate, elapsed),
        PhaseKind::FollowTrajectory => plan.trajectory.sample(elapsed),
        PhaseKind::Land => descend(phase.anchor, plan.landing_floor(), plan.descent_rate, elapsed),
        PhaseKind::EmergencyLanding => {
            descend(phase.anchor, plan.landing_floor(), plan.emergency_descent_rate, elapsed)
        }
    }
}

fn enter(kind: PhaseKind, from: &MissionPhase, plan: &MissionPlan, t: f64) -> MissionPhase {
    let anchor = generate_reference(from, plan, t).position_ref;
    MissionPhase { kind, entered_at: t, anchor }
}

/// Advances the state machine by one evaluation at time `t`.
pub fn fsm_step(
    phase: &MissionPhase,
    plan: &MissionPlan,
    t: f64,
    state: &VehicleState,
    emergency: bool,
) -> MissionPhase {
    use PhaseKind::*;
    if phase.kind == Done {
        return *phase;
    }
    if emergency && phase.kind != EmergencyLanding {
        return enter(EmergencyLanding, phase, plan, t);
    }
    let elapsed = t - phase.entered_at;
    let d = &plan.durations;
    let landed = state.position_w.z <= plan.ground_threshold;
    let next = match phase.kind {
        Idle if elapsed >= d.idle => Takeoff,
        Takeoff if elapsed >= d.takeoff => FollowTrajectory,
        FollowTrajectory if elapsed >= d.follow_trajectory => Hover,
        Hover if elapsed >= d.hover => Land,
        Land | EmergencyLanding if landed => Done,
        other => other,
    };
    if next == phase.kind {
        *phase
    } else {
        enter(next, phase, plan, t)
    }
}
