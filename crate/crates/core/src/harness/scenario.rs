//! Scenario description and the built-in presets.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advisor::PromptConfig;
use crate::controller::CostWeights;
use crate::dynamics::{Axis, DisturbanceSpec, PlantParams};
use crate::executor::ActionEffects;
use crate::llm_client::ClientConfig;
use crate::mission::{MissionPlan, TrajectoryKind};
use crate::monitor::{OscillationConfig, Thresholds};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse scenario file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Payload hung off the vehicle frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmMass {
    pub mass: f64,
    /// Steady (roll, pitch) tilt the attitude loop leaves behind.
    pub attitude_bias: [f64; 2],
}

/// Sinusoidal pull on a tether. Give either `force_amplitude` directly or a
/// `target_amplitude` in meters, which the harness converts to a force by a
/// calibration run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RopePull {
    pub axis: Axis,
    pub frequency: f64,
    pub t_start: f64,
    pub t_end: f64,
    #[serde(default)]
    pub force_amplitude: Option<f64>,
    #[serde(default)]
    pub target_amplitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub name: String,
    pub description: String,
    /// Controller mass as a fraction of the true mass.
    pub controller_mass_fraction: f64,
    pub plant: PlantParams,
    pub disturbance: DisturbanceSpec,
    pub arm_mass: Option<ArmMass>,
    pub rope_pull: Option<RopePull>,
    pub plan: MissionPlan,
    pub thresholds: Thresholds,
    pub prompt: PromptConfig,
    /// `rule`, `replay:<file>`, `remote` or `noop`.
    pub policy: String,
    /// Seconds between queries.
    pub decision_period: f64,
    /// Simulated reply delay for in-process policies.
    pub decision_latency_ticks: u64,
    /// Controller update rate in Hz.
    pub control_rate: f64,
    pub dt: f64,
    pub duration: f64,
    /// Recorded with the run. Every built-in source of variation is deterministic.
    pub seed: u64,
    pub weights: CostWeights,
    /// `None` derives steps and bounds from the controller's hover force.
    pub effects: Option<ActionEffects>,
    pub oscillation: OscillationConfig,
    pub client: ClientConfig,
    pub history_budget_tokens: usize,
    /// Consecutive transport failures tolerated before landing.
    pub max_policy_failures: u32,
    /// Length of the tail over which steady-state metrics are taken.
    pub steady_window: f64,
    /// Pace remote runs to wall-clock time.
    pub realtime: bool,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            description: String::new(),
            controller_mass_fraction: 1.0,
            plant: PlantParams::default(),
            disturbance: DisturbanceSpec::default(),
            arm_mass: None,
            rope_pull: None,
            plan: MissionPlan::default(),
            thresholds: Thresholds::default(),
            prompt: PromptConfig::default(),
            policy: "rule".into(),
            decision_period: 2.0,
            decision_latency_ticks: 0,
            control_rate: 100.0,
            dt: 0.01,
            duration: 100.0,
            seed: 0,
            weights: CostWeights::default(),
            effects: None,
            oscillation: OscillationConfig::default(),
            client: ClientConfig::default(),
            history_budget_tokens: 6000,
            max_policy_failures: 3,
            steady_window: 20.0,
            realtime: true,
        }
    }
}

/// Names of the built-in presets.
pub const PRESETS: [&str; 6] =
    ["nominal", "mass_mismatch", "mass_mismatch_with_tuning", "arm_mass", "oscillation_abort", "mass_mismatch_15pct"];

fn near_integer(x: f64) -> Option<u64> {
    let r = x.round();
    ((x - r).abs() < 1e-6 && r >= 1.0).then_some(r as u64)
}

impl ScenarioSpec {
    pub fn preset(name: &str) -> Result<Self, ScenarioError> {
        let base = ScenarioSpec { name: name.to_string(), ..Default::default() };
        let spec = match name {
            "nominal" => ScenarioSpec { description: "no faults; the policy should stay idle".into(), ..base },
            "mass_mismatch" => ScenarioSpec {
                description: "controller mass 15% low, tuning actions not offered".into(),
                controller_mass_fraction: 0.85,
                prompt: PromptConfig { include_tuning_apis: false, ..Default::default() },
                ..base
            },
            "mass_mismatch_with_tuning" => ScenarioSpec {
                description: "controller mass 15% low, tuning actions offered".into(),
                controller_mass_fraction: 0.85,
                ..base
            },
            "mass_mismatch_15pct" => ScenarioSpec {
                description: "controller mass at 15% of the true mass".into(),
                controller_mass_fraction: 0.15,
                prompt: PromptConfig { include_tuning_apis: false, ..Default::default() },
                ..base
            },
            "arm_mass" => ScenarioSpec {
                description: "210 g payload on one arm: extra weight plus a steady tilt".into(),
                arm_mass: Some(ArmMass { mass: 0.210, attitude_bias: [-ARM_MASS_TILT, ARM_MASS_TILT] }),
                ..base
            },
            "oscillation_abort" => {
                let mut plan = MissionPlan::default();
                plan.trajectory.kind = TrajectoryKind::HoverSetpoint;
                ScenarioSpec {
                    description: "hover with a mass mismatch until a tether starts pulling at 0.67 Hz".into(),
                    controller_mass_fraction: 0.85,
                    plan,
                    rope_pull: Some(RopePull {
                        axis: Axis::Y,
                        frequency: 0.67,
                        t_start: 40.0,
                        t_end: 1e9,
                        force_amplitude: None,
                        target_amplitude: Some(0.19),
                    }),
                    duration: 120.0,
                    ..base
                }
            }
            other => return Err(ScenarioError::UnknownPreset(other.to_string())),
        };
        Ok(spec)
    }

    /// A preset name or a path to a JSON scenario file.
    pub fn resolve(name_or_path: &str) -> Result<Self, ScenarioError> {
        if PRESETS.contains(&name_or_path) {
            return Self::preset(name_or_path);
        }
        let path = Path::new(name_or_path);
        if path.exists() {
            let text = std::fs::read_to_string(path)?;
            let spec: ScenarioSpec = serde_json::from_str(&text)?;
            return Ok(spec);
        }
        Err(ScenarioError::UnknownPreset(name_or_path.to_string()))
    }

    pub fn controller_mass(&self) -> f64 {
        self.controller_mass_fraction * self.plant.true_mass
    }

    /// Plant ticks per controller update.
    pub fn control_period_ticks(&self) -> u64 {
        near_integer(1.0 / (self.control_rate * self.dt)).unwrap_or(1)
    }

    pub fn decision_period_ticks(&self) -> u64 {
        near_integer(self.decision_period / self.dt).unwrap_or(1)
    }

    pub fn oscillation_sample_ticks(&self) -> u64 {
        near_integer(self.oscillation.sample_dt / self.dt).unwrap_or(1)
    }

    pub fn total_ticks(&self) -> u64 {
        (self.duration / self.dt).round() as u64
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if !(self.controller_mass_fraction > 0.0 && self.controller_mass_fraction <= 2.0) {
            return bad("controller_mass_fraction must lie in (0, 2]".into());
        }
        if !(self.dt > 0.0 && self.duration > 0.0) {
            return bad("dt and duration must be positive".into());
        }
        if near_integer(self.duration / self.dt).is_none() {
            return bad("duration must be a whole number of steps".into());
        }
        if !(self.control_rate > 0.0) || near_integer(1.0 / (self.control_rate * self.dt)).is_none() {
            return bad(format!(
                "control_rate {} Hz is not a whole fraction of the {} s step",
                self.control_rate, self.dt
            ));
        }
        if !(1.0..=10.0).contains(&self.decision_period) {
            return bad(format!("decision_period {} s outside [1, 10] s", self.decision_period));
        }
        if near_integer(self.decision_period / self.dt).is_none() {
            return bad("decision_period must be a whole number of steps".into());
        }
        let osc = &self.oscillation;
        if near_integer(osc.sample_dt / self.dt).is_none() {
            return bad("oscillation sample_dt must be a whole number of steps".into());
        }
        if !osc.window.is_power_of_two() || osc.window < 16 {
            return bad("oscillation window must be a power of two of at least 16".into());
        }
        if !(self.steady_window > 0.0 && self.steady_window <= self.duration) {
            return bad("steady_window must lie in (0, duration]".into());
        }
        if !(self.thresholds.x > 0.0 && self.thresholds.y > 0.0 && self.thresholds.z > 0.0) {
            return bad("thresholds must be positive".into());
        }
        if let Some(arm) = &self.arm_mass {
            if !(arm.mass >= 0.0) {
                return bad("arm mass must be nonnegative".into());
            }
        }
        if let Some(pull) = &self.rope_pull {
            if !(pull.frequency > 0.0 && pull.t_start < pull.t_end) {
                return bad("rope pull needs a positive frequency and t_start < t_end".into());
            }
            if pull.force_amplitude.is_none() && pull.target_amplitude.is_none() {
                return bad("rope pull needs force_amplitude or target_amplitude".into());
            }
        }
        if let Some(e) = &self.effects {
            e.validate().map_err(ScenarioError::Invalid)?;
        }
        self.plan.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        self.plant.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        self.disturbance.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        self.weights.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        Ok(())
    }
}

/// Steady tilt of the arm-mass preset, in radians.
pub const ARM_MASS_TILT: f64 = 0.05;
