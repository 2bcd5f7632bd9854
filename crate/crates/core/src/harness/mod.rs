//! Closed-loop experiment runner.
//!
//! One tick of `dt` seconds does, in order: advance the mission FSM, build
//! the reference, submit a query on decision ticks, apply any reply that has
//! arrived, re-solve the gain if the weights changed, compute the control,
//! sample the oscillation window, record telemetry, and step the plant.

pub mod mailbox;
pub mod metrics;
pub mod output;
pub mod scenario;

use thiserror::Error;

use crate::advisor::replay::{ConversationEntry, EntryKind};
use crate::advisor::{
    build_initial_prompt, render_oscillation_message, ActionName, DecisionPolicy, PolicyContext, PolicyDriver,
    PolicyError, PolicyRegistry, QueryRecord,
};
use crate::controller::{
    build_hover_model, compute_control, AdaptiveState, CommandLimits, DareError, GainCell, GainSet, HoverCommand,
    ModelError,
};
use crate::dynamics::{step_plant, ControlCommand, DisturbanceSpec, PeriodicPull, SimError, VehicleState};
use crate::executor::{apply_actions, ActionEffects};
use crate::mission::{fsm_step, generate_reference, MissionPhase, ReferencePoint};
use crate::monitor::oscillation::spectral_peak;
use crate::monitor::{check_failures, detect_oscillation, SampleRing};

use mailbox::{Mailbox, SimulatedMailbox, ThreadedMailbox};
use metrics::{empty_action_counts, is_flight_phase, settling_time, window_stats, RunMetrics, TelemetryRow};
pub use scenario::{ArmMass, RopePull, ScenarioError, ScenarioSpec, PRESETS};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("simulation diverged: {0}")]
    Sim(#[from] SimError),
    #[error("gain synthesis failed: {0}")]
    Gain(#[from] DareError),
    #[error("controller model: {0}")]
    Model(#[from] ModelError),
    #[error("decision policy: {0}")]
    Policy(#[from] PolicyError),
    #[error("rope pull calibration failed: {0}")]
    Calibration(String),
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// The scenario as run, with any calibrated pull force filled in.
    pub spec: ScenarioSpec,
    pub initial_prompt: String,
    pub telemetry: Vec<TelemetryRow>,
    pub conversation: Vec<ConversationEntry>,
    pub metrics: RunMetrics,
}

/// Controller pieces shared by the run and the pull calibration.
struct ControlSetup {
    hover: HoverCommand,
    limits: CommandLimits,
    gains: GainSet,
}

fn control_setup(spec: &ScenarioSpec) -> Result<ControlSetup, RunError> {
    let mass = spec.controller_mass();
    let control_dt = spec.control_period_ticks() as f64 * spec.dt;
    let model = build_hover_model(mass, spec.plant.gravity, spec.plant.attitude_tau, control_dt)?;
    Ok(ControlSetup {
        hover: HoverCommand::from_mass(mass, spec.plant.gravity),
        limits: CommandLimits {
            max_tilt: spec.plant.max_tilt,
            thrust_min: spec.plant.thrust_min,
            thrust_max: spec.plant.thrust_max,
        },
        gains: GainSet::synthesize(model, spec.weights)?,
    })
}

/// Plant disturbance with the arm mass folded in. The pull is added separately.
fn static_disturbance(spec: &ScenarioSpec) -> DisturbanceSpec {
    let mut dist = spec.disturbance;
    if let Some(arm) = &spec.arm_mass {
        dist.added_mass += arm.mass;
        dist.attitude_bias[0] += arm.attitude_bias[0];
        dist.attitude_bias[1] += arm.attitude_bias[1];
    }
    dist
}

/// Error amplitude, in meters, that a 1 N pull produces while hovering under
/// the scenario's controller.
pub fn unit_pull_response(spec: &ScenarioSpec, pull: &RopePull) -> Result<f64, RunError> {
    let setup = control_setup(spec)?;
    let mut dist = static_disturbance(spec);
    dist.periodic_pull = Some(PeriodicPull {
        axis: pull.axis,
        force_amplitude: 1.0,
        frequency: pull.frequency,
        t_start: 0.0,
        t_end: f64::INFINITY,
    });
    let reference = ReferencePoint::hold(spec.plan.takeoff_target());
    let mut state = VehicleState::at_rest(reference.position_ref);
    let settle = 20.0f64.max(5.0 / pull.frequency);
    let window = spec.oscillation.window;
    let sample_ticks = spec.oscillation_sample_ticks();
    let first_sample = (settle / spec.dt).round() as u64;
    let last_tick = first_sample + window as u64 * sample_ticks;
    let ctrl_ticks = spec.control_period_ticks();
    let adapt = AdaptiveState::default();

    let mut samples = Vec::with_capacity(window);
    let mut cmd = ControlCommand::hover(setup.hover.f_hover);
    for k in 0..last_tick {
        let t = k as f64 * spec.dt;
        if k % ctrl_ticks == 0 {
            cmd = compute_control(&state, &reference, &setup.gains.gain, &setup.hover, &adapt, &setup.limits);
        }
        if k >= first_sample && (k - first_sample).is_multiple_of(sample_ticks) {
            samples.push(state.position_w[pull.axis.index()] - reference.position_ref[pull.axis.index()]);
        }
        state = step_plant(&state, &cmd, &spec.plant, &dist, t, spec.dt)?;
    }
    let band = (0.5 * pull.frequency, 1.5 * pull.frequency);
    spectral_peak(&samples, spec.oscillation.sample_dt, band)
        .map(|p| p.amplitude)
        .filter(|a| *a > 0.0)
        .ok_or_else(|| RunError::Calibration(format!("no response at {} Hz", pull.frequency)))
}

/// Fills in the pull force from its target amplitude when needed.
pub fn resolve_pull(spec: &ScenarioSpec) -> Result<Option<PeriodicPull>, RunError> {
    let Some(pull) = &spec.rope_pull else { return Ok(None) };
    let force = match (pull.force_amplitude, pull.target_amplitude) {
        (Some(f), _) => f,
        (None, Some(target)) => {
            let per_newton = unit_pull_response(spec, pull)?;
            let force = target / per_newton;
            log::info!("rope pull calibrated: {per_newton:.4} m/N, {force:.3} N for {target} m");
            force
        }
        (None, None) => return Err(RunError::Calibration("no pull force or target amplitude".into())),
    };
    Ok(Some(PeriodicPull {
        axis: pull.axis,
        force_amplitude: force,
        frequency: pull.frequency,
        t_start: pull.t_start,
        t_end: pull.t_end,
    }))
}

pub fn policy_context(spec: &ScenarioSpec) -> PolicyContext {
    PolicyContext {
        prompt: spec.prompt.clone(),
        client: spec.client.clone(),
        history_budget_tokens: spec.history_budget_tokens,
    }
}

/// Runs `spec` with the policy named in `spec.policy` from the built-in registry.
pub fn run_experiment(spec: &ScenarioSpec) -> Result<RunOutput, RunError> {
    run_with_registry(spec, &PolicyRegistry::with_builtin())
}

pub fn run_with_registry(spec: &ScenarioSpec, registry: &PolicyRegistry) -> Result<RunOutput, RunError> {
    spec.validate()?;
    let policy = registry.create(&spec.policy, &policy_context(spec))?;
    run_with_policy(spec, policy)
}

pub fn run_with_policy(spec: &ScenarioSpec, policy: Box<dyn DecisionPolicy>) -> Result<RunOutput, RunError> {
    spec.validate()?;
    let setup = control_setup(spec)?;
    let effects = spec.effects.unwrap_or_else(|| ActionEffects::for_hover(setup.hover.f_hover));
    let valid_actions = spec.prompt.available_actions();

    let mut resolved = spec.clone();
    let mut dist = static_disturbance(spec);
    dist.periodic_pull = resolve_pull(spec)?;
    if let (Some(pull), Some(p)) = (resolved.rope_pull.as_mut(), &dist.periodic_pull) {
        pull.force_amplitude = Some(p.force_amplitude);
    }

    let remote = policy.is_remote();
    let policy_name = policy.name().to_string();
    let driver = PolicyDriver::new(policy);
    let mut mailbox: Box<dyn Mailbox> = if remote {
        Box::new(ThreadedMailbox::spawn(driver))
    } else {
        Box::new(SimulatedMailbox::new(driver, spec.decision_latency_ticks))
    };

    let gains = GainCell::new(setup.gains.clone());
    let mut weights = spec.weights;
    let mut adapt = AdaptiveState::default();
    let mut emergency = false;

    let total = spec.total_ticks();
    let ctrl_ticks = spec.control_period_ticks();
    let decision_ticks = spec.decision_period_ticks();
    let sample_ticks = spec.oscillation_sample_ticks();
    let osc = spec.oscillation;

    let mut state = VehicleState::at_rest(nalgebra::Vector3::new(
        spec.plan.trajectory.center[0],
        spec.plan.trajectory.center[1],
        spec.plant.ground_level.unwrap_or(0.0),
    ));
    let mut phase = MissionPhase::start(&state, 0.0);
    let mut ring = SampleRing::new(osc.window);
    let mut cmd = ControlCommand::disarmed(setup.hover.f_hover);

    let mut telemetry = Vec::with_capacity(total as usize + 1);
    let mut conversation = Vec::new();
    let mut action_counts = empty_action_counts();
    let mut decisions_issued = 0usize;
    let mut actions_issued = 0usize;
    let mut consecutive_failures = 0u32;
    let mut policy_failures = 0usize;
    let mut gain_updates = 0usize;
    let mut last_latency = 0.0;
    let mut first_dangerous = None;
    let mut emergency_time = None;

    let wall_start = std::time::Instant::now();

    for k in 0..=total {
        let t = k as f64 * spec.dt;
        if remote && spec.realtime {
            let ahead = t - wall_start.elapsed().as_secs_f64();
            if ahead > 0.0 {
                std::thread::sleep(std::time::Duration::from_secs_f64(ahead));
            }
        }

        let next_phase = fsm_step(&phase, &spec.plan, t, &state, emergency);
        if next_phase.kind != phase.kind {
            log::info!("t = {t:.2}s: {} -> {}", phase.kind, next_phase.kind);
            ring.clear();
        }
        phase = next_phase;
        let reference = generate_reference(&phase, &spec.plan, t);

        if k % decision_ticks == 0 && is_flight_phase(phase.kind) && !emergency && !mailbox.in_flight() {
            let extra = if ring.is_full() {
                detect_oscillation(&ring.snapshot(), osc.sample_dt, osc.band, osc.amp_threshold)
                    .map(|r| render_oscillation_message(&r))
            } else {
                None
            };
            let report = check_failures(&state, &reference, &spec.thresholds, extra.as_deref());
            if first_dangerous.is_none() && report.info.contains("DANGEROUS") {
                first_dangerous = Some(t);
            }
            let query = QueryRecord::new(t, report);
            conversation.push(ConversationEntry {
                t,
                kind: EntryKind::Prompt,
                text: query.rendered.clone(),
                actions: vec![],
            });
            mailbox.submit(query, k);
        }

        if let Some((query, result)) = mailbox.poll(k) {
            let decision = match result {
                Ok(d) => {
                    consecutive_failures = 0;
                    Some(d)
                }
                Err(e @ (PolicyError::ReplayExhausted(_) | PolicyError::Io(_) | PolicyError::BadArgument(_))) => {
                    return Err(e.into());
                }
                Err(PolicyError::Parse(e)) => {
                    log::warn!("t = {t:.2}s: unparseable reply ({e}); doing nothing");
                    None
                }
                Err(e) => {
                    consecutive_failures += 1;
                    policy_failures += 1;
                    log::warn!("t = {t:.2}s: policy failure {consecutive_failures}: {e}");
                    if consecutive_failures >= spec.max_policy_failures && !emergency {
                        log::warn!("t = {t:.2}s: too many policy failures, landing");
                        emergency = true;
                        emergency_time = Some(t);
                    }
                    None
                }
            };
            last_latency = if query.t.is_finite() { t - query.t } else { 0.0 };
            let actions = match &decision {
                Some(d) => {
                    conversation.push(ConversationEntry {
                        t,
                        kind: EntryKind::Response,
                        text: d.raw.clone(),
                        actions: d.actions.clone(),
                    });
                    d.actions.clone()
                }
                None => vec![ActionName::DoNothing],
            };
            decisions_issued += 1;
            for a in &actions {
                *action_counts.entry(a.as_str().to_string()).or_default() += 1;
                actions_issued += 1;
            }
            debug_assert!(actions.iter().all(|a| valid_actions.contains(a)));

            if !emergency {
                let out = apply_actions(&actions, adapt, weights, emergency, &effects);
                adapt = out.adapt;
                if out.emergency {
                    emergency = true;
                    emergency_time = Some(t);
                }
                if out.needs_resolve {
                    match gains.load().retuned(out.weights) {
                        Ok(set) => {
                            weights = out.weights;
                            gains.store(set);
                            gain_updates += 1;
                        }
                        Err(e) => log::warn!("t = {t:.2}s: keeping previous gain, re-solve failed: {e}"),
                    }
                }
            }
        }

        if k % ctrl_ticks == 0 {
            cmd = if phase.kind.is_armed() {
                let set = gains.load();
                compute_control(&state, &reference, &set.gain, &setup.hover, &adapt, &setup.limits)
            } else {
                ControlCommand::disarmed(setup.hover.f_hover)
            };
        }

        let error = state.position_w - reference.position_ref;
        if is_flight_phase(phase.kind) && k % sample_ticks == 0 {
            ring.push(error);
        }

        let codes = check_failures(&state, &reference, &spec.thresholds, None).codes;
        let codes: Vec<String> = codes.iter().map(|c| c.value().to_string()).collect();
        telemetry.push(TelemetryRow {
            t,
            pos_x: state.position_w.x,
            pos_y: state.position_w.y,
            pos_z: state.position_w.z,
            ref_x: reference.position_ref.x,
            ref_y: reference.position_ref.y,
            ref_z: reference.position_ref.z,
            err_x: error.x,
            err_y: error.y,
            err_z: error.z,
            roll_cmd: cmd.roll_cmd,
            pitch_cmd: cmd.pitch_cmd,
            thrust_delta: cmd.thrust_delta,
            thrust_offset: adapt.thrust_offset,
            roll_offset: adapt.roll_offset,
            pitch_offset: adapt.pitch_offset,
            failure_codes: codes.join(";"),
            phase: phase.kind,
            decision_latency: last_latency,
        });

        if k < total {
            state = step_plant(&state, &cmd, &spec.plant, &dist, t, spec.dt)?;
        }
    }

    let steady_start = spec.duration - spec.steady_window;
    let (rms, max_abs) = window_stats(&telemetry, steady_start);
    let last = telemetry.last().expect("at least one tick");
    let metrics = RunMetrics {
        scenario: spec.name.clone(),
        policy: policy_name,
        seed: spec.seed,
        duration: spec.duration,
        steady_window_start: steady_start,
        steady_rms_error: rms,
        steady_max_abs_error: max_abs,
        final_altitude_error: last.err_z,
        time_to_ez_below_0_30: settling_time(&telemetry, 0.30),
        time_to_ez_below_0_10: settling_time(&telemetry, 0.10),
        first_dangerous_time: first_dangerous,
        emergency_time,
        final_phase: last.phase,
        final_altitude: last.pos_z,
        decisions_issued,
        actions_issued,
        action_counts,
        policy_failures,
        gain_updates,
    };

    Ok(RunOutput {
        spec: resolved,
        initial_prompt: build_initial_prompt(&spec.prompt),
        telemetry,
        conversation,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::advisor::NoopPolicy;
    use crate::mission::PhaseKind;

    fn short(name: &str, duration: f64) -> ScenarioSpec {
        let mut spec = ScenarioSpec::preset(name).unwrap();
        spec.duration = duration;
        spec.steady_window = duration.min(5.0);
        spec
    }

    #[test]
    fn nominal_run_has_one_row_per_tick_and_stays_quiet() {
        let out = run_experiment(&short("nominal", 30.0)).unwrap();
        assert_eq!(out.telemetry.len(), 3001);
        assert!(out.telemetry.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(out.metrics.action_counts["do_nothing"], out.metrics.actions_issued);
        assert!(out.metrics.decisions_issued > 0);
        assert!(out.conversation[0].text == "([0], '')");
    }

    #[test]
    fn full_nominal_mission_lands() {
        let mut spec = ScenarioSpec::preset("nominal").unwrap();
        spec.plan.durations.follow_trajectory = 20.0;
        spec.duration = 40.0;
        let out = run_experiment(&spec).unwrap();
        assert_eq!(out.metrics.final_phase, PhaseKind::Done);
        assert!(out.metrics.final_altitude <= 0.05);
        let mut seen = vec![];
        for r in &out.telemetry {
            if seen.last() != Some(&r.phase) {
                seen.push(r.phase);
            }
        }
        use PhaseKind::*;
        assert_eq!(seen, vec![Idle, Takeoff, FollowTrajectory, Hover, Land, Done]);
    }

    #[test]
    fn noop_policy_never_corrects() {
        let out = run_with_policy(&short("mass_mismatch", 30.0), Box::new(NoopPolicy)).unwrap();
        assert!(out.telemetry.iter().all(|r| r.thrust_offset == 0.0));
        assert_eq!(out.metrics.gain_updates, 0);
    }

    #[test]
    fn policy_failures_trigger_landing() {
        struct Broken;
        impl DecisionPolicy for Broken {
            fn name(&self) -> &str {
                "broken"
            }
            fn decide(
                &mut self,
                _: &QueryRecord,
                _: &[crate::advisor::Exchange],
            ) -> Result<crate::advisor::Decision, PolicyError> {
                Err(PolicyError::Transport(crate::llm_client::ClientError::Timeout))
            }
        }
        let out = run_with_policy(&short("nominal", 30.0), Box::new(Broken)).unwrap();
        assert_eq!(out.metrics.policy_failures, 3);
        assert!(out.metrics.emergency_time.is_some());
        assert_eq!(out.metrics.final_phase, PhaseKind::Done);
    }

    #[test]
    fn calibrated_pull_scales_linearly() {
        let spec = ScenarioSpec::preset("oscillation_abort").unwrap();
        let pull = spec.rope_pull.unwrap();
        let per_newton = unit_pull_response(&spec, &pull).unwrap();
        let resolved = resolve_pull(&spec).unwrap().unwrap();
        assert!((resolved.force_amplitude * per_newton - 0.19).abs() < 1e-9);
    }
}
