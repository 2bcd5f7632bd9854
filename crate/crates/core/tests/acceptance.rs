//! Acceptance suite. Prints one `criterion N: PASS|FAIL` line per criterion
//! and exits non-zero if any of them fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Vector3};
use rand::SeedableRng;
use sha2::{Digest, Sha256};

use common::{check_transcript, random_controllable_pair, CONVERSATION_1, CONVERSATION_2};
use uav_adapt::advisor::replay::EntryKind;
use uav_adapt::advisor::{build_initial_prompt, ActionName, NoopPolicy};
use uav_adapt::controller::{
    build_hover_model, compute_control, control_law, dare_residual, solve_dare_dense, spectral_radius, AdaptiveState,
    CommandLimits, CostWeights, GainSet, HoverCommand,
};
use uav_adapt::dynamics::{Axis, VehicleState};
use uav_adapt::harness::metrics::TelemetryRow;
use uav_adapt::harness::output::{emit_outputs, write_telemetry, CONVERSATION_RECORD};
use uav_adapt::harness::{run_experiment, run_with_policy, RunOutput, ScenarioSpec, PRESETS};
use uav_adapt::mission::{MissionPlan, PhaseKind, ReferencePoint};
use uav_adapt::monitor::{detect_oscillation, OscillationConfig};

const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;
const SCALAR_TOL: f64 = 1e-9;
const SCALAR_BUDGET: Duration = Duration::from_millis(1);
const RANDOM_SYSTEMS: usize = 100;
const RESIDUAL_LIMIT: f64 = 1e-8;
const RANDOM_BUDGET: Duration = Duration::from_secs(5);
const ALTITUDE_BAND: f64 = 0.30;
const TUNED_ALTITUDE_BAND: f64 = 0.10;
const HOLD_WINDOW: f64 = 20.0;
const MISSION_BUDGET: Duration = Duration::from_secs(10);
const RMS_IMPROVEMENT: f64 = 2.0;
const TONE_FREQUENCY: f64 = 0.67;
const TONE_AMPLITUDE: f64 = 0.19;
const FREQUENCY_TOL: f64 = 0.1;
const AMPLITUDE_REL_TOL: f64 = 0.10;
const ABORT_PERIODS: f64 = 2.0;
const LANDED_ALTITUDE: f64 = 0.05;

type Outcome = Result<String, String>;

fn preset(name: &str) -> ScenarioSpec {
    ScenarioSpec::preset(name).expect("built-in preset")
}

fn run(spec: &ScenarioSpec) -> Result<RunOutput, String> {
    run_experiment(spec).map_err(|e| format!("{}: {e}", spec.name))
}

/// Largest |e_z| over the last `window` seconds.
fn tail_max_ez(out: &RunOutput, window: f64) -> f64 {
    let t_end = out.telemetry.last().map_or(0.0, |r| r.t);
    out.telemetry.iter().filter(|r| r.t >= t_end - window).map(|r| r.err_z.abs()).fold(0.0, f64::max)
}

fn tail_rms(out: &RunOutput, window: f64) -> [f64; 3] {
    let t_end = out.telemetry.last().map_or(0.0, |r| r.t);
    let rows: Vec<&TelemetryRow> = out.telemetry.iter().filter(|r| r.t >= t_end - window).collect();
    let n = rows.len().max(1) as f64;
    let rms = |pick: fn(&TelemetryRow) -> f64| (rows.iter().map(|r| pick(r).powi(2)).sum::<f64>() / n).sqrt();
    [rms(|r| r.err_x), rms(|r| r.err_y), rms(|r| r.err_z)]
}

fn csv_digest(out: &RunOutput) -> String {
    let mut buf = Vec::new();
    write_telemetry(&out.telemetry, &mut buf).expect("in-memory write");
    hex::encode(Sha256::digest(&buf))
}

fn criterion_1() -> Outcome {
    let one = DMatrix::from_element(1, 1, 1.0);
    let start = Instant::now();
    let sol = solve_dare_dense(&one, &one, &one, &one, 1e-12, 200).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let p = sol.p[(0, 0)];
    let detail = format!(
        "p = {p:.10}, |p - golden| = {:.1e} (tol {SCALAR_TOL:.0e}), {elapsed:?} (budget {SCALAR_BUDGET:?})",
        (p - GOLDEN_RATIO).abs()
    );
    if (p - GOLDEN_RATIO).abs() < SCALAR_TOL && elapsed < SCALAR_BUDGET {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_2() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(2024);
    let systems: Vec<_> = (0..RANDOM_SYSTEMS).map(|_| random_controllable_pair(&mut rng)).collect();
    let q = DMatrix::identity(8, 8);
    let r = DMatrix::identity(3, 3);
    let start = Instant::now();
    let (mut worst_residual, mut worst_radius) = (0.0f64, 0.0f64);
    for (i, (a, b)) in systems.iter().enumerate() {
        let sol = solve_dare_dense(a, b, &q, &r, 1e-12, 200).map_err(|e| format!("system {i}: {e}"))?;
        worst_residual = worst_residual.max(dare_residual(a, b, &q, &r, &sol.p));
        worst_radius = worst_radius.max(spectral_radius(&(a + b * &sol.k)));
    }
    let elapsed = start.elapsed();
    let unstable = systems.iter().filter(|(a, _)| spectral_radius(a) > 1.0).count();
    let detail = format!(
        "{RANDOM_SYSTEMS} systems ({unstable} open-loop unstable): max residual {worst_residual:.1e} (limit {RESIDUAL_LIMIT:.0e}), \
         max radius {worst_radius:.4}, {elapsed:?} (budget {RANDOM_BUDGET:?})"
    );
    if worst_residual < RESIDUAL_LIMIT && worst_radius < 1.0 && elapsed < RANDOM_BUDGET {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_3() -> Outcome {
    let limits = CommandLimits { max_tilt: 0.35, thrust_min: 0.0, thrust_max: 25.0 };
    let plan = MissionPlan::default();
    let references = [
        ReferencePoint::hold(Vector3::new(0.0, 0.0, 1.0)),
        ReferencePoint::hold(Vector3::new(-2.5, 3.25, 7.0)),
        plan.trajectory.sample(1.7),
        plan.trajectory.sample(13.1),
    ];
    let mut checked = 0;
    for mass in [1.0, 0.85, 1.21] {
        let model = build_hover_model(mass, 9.81, 0.15, 0.01).map_err(|e| e.to_string())?;
        let set = GainSet::synthesize(model, CostWeights::default()).map_err(|e| e.to_string())?;
        let hover = HoverCommand::from_mass(mass, 9.81);
        for r in &references {
            let state =
                VehicleState { position_w: r.position_ref, velocity_w: r.velocity_ref, roll_i: 0.0, pitch_i: 0.0 };
            let u = control_law(&state, r, &set.gain, &hover, &AdaptiveState::default());
            let cmd = compute_control(&state, r, &set.gain, &hover, &AdaptiveState::default(), &limits);
            let exact = u == hover.as_input()
                && cmd.roll_cmd.to_bits() == 0f64.to_bits()
                && cmd.pitch_cmd.to_bits() == 0f64.to_bits()
                && cmd.thrust_delta.to_bits() == 0f64.to_bits()
                && cmd.hover_thrust.to_bits() == hover.f_hover.to_bits();
            if !exact {
                return Err(format!("mass {mass}, reference {:?}: u = {:?}", r.position_ref, u.as_slice()));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} equilibria return u_safe bit-exactly"))
}

fn criterion_4() -> Outcome {
    let spec = preset("mass_mismatch");
    let start = Instant::now();
    let out = run(&spec)?;
    let elapsed = start.elapsed();
    let worst = tail_max_ez(&out, HOLD_WINDOW);
    let detail = format!(
        "max |e_z| over final {HOLD_WINDOW} s = {worst:.3} m (limit {ALTITUDE_BAND}), decision period {} s, duration {} s, {elapsed:.2?} (budget {MISSION_BUDGET:?})",
        spec.decision_period, spec.duration
    );
    if worst < ALTITUDE_BAND && elapsed < MISSION_BUDGET {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_5() -> Outcome {
    let out = run(&preset("mass_mismatch_with_tuning"))?;
    let worst = tail_max_ez(&out, HOLD_WINDOW);
    let tunings: usize =
        ActionName::ALL.iter().filter(|a| a.is_tuning()).map(|a| out.metrics.action_counts[a.as_str()]).sum();
    let detail = format!(
        "max |e_z| over final {HOLD_WINDOW} s = {worst:.3} m (limit {TUNED_ALTITUDE_BAND}), {tunings} tuning actions"
    );
    if worst < TUNED_ALTITUDE_BAND && tunings > 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_6() -> Outcome {
    let spec = preset("arm_mass");
    let adapted = run(&spec)?;
    let idle = run_with_policy(&spec, Box::new(NoopPolicy)).map_err(|e| e.to_string())?;
    let a = tail_rms(&adapted, HOLD_WINDOW);
    let b = tail_rms(&idle, HOLD_WINDOW);
    let ratios: Vec<f64> = (0..3).map(|i| b[i] / a[i]).collect();
    let detail = format!(
        "RMS x/y/z rule {:.3}/{:.3}/{:.3} vs do-nothing {:.3}/{:.3}/{:.3}, ratios {:.1}/{:.1}/{:.1} (need >= {RMS_IMPROVEMENT})",
        a[0], a[1], a[2], b[0], b[1], b[2], ratios[0], ratios[1], ratios[2]
    );
    if ratios.iter().all(|&r| r >= RMS_IMPROVEMENT) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_7() -> Outcome {
    let cfg = OscillationConfig::default();
    let buffer: Vec<Vector3<f64>> = (0..cfg.window)
        .map(|i| {
            let t = i as f64 * cfg.sample_dt;
            Vector3::new(0.0, TONE_AMPLITUDE * (2.0 * std::f64::consts::PI * TONE_FREQUENCY * t).sin(), 1.0)
        })
        .collect();
    let report =
        detect_oscillation(&buffer, cfg.sample_dt, cfg.band, cfg.amp_threshold).ok_or("no oscillation reported")?;
    let df = (report.frequency - TONE_FREQUENCY).abs();
    let da = (report.amplitude - TONE_AMPLITUDE).abs() / TONE_AMPLITUDE;
    let detail = format!(
        "{} samples at {} Hz: axis {}, {:.3} Hz (tol {FREQUENCY_TOL}), {:.4} m ({:.1}% off, tol {:.0}%)",
        cfg.window,
        1.0 / cfg.sample_dt,
        report.axis,
        report.frequency,
        report.amplitude,
        100.0 * da,
        100.0 * AMPLITUDE_REL_TOL
    );
    if report.axis == Axis::Y && df <= FREQUENCY_TOL && da <= AMPLITUDE_REL_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_8() -> Outcome {
    let spec = preset("oscillation_abort");
    let out = run(&spec)?;
    let first_danger = out
        .conversation
        .iter()
        .find(|e| e.kind == EntryKind::Prompt && e.text.contains("DANGEROUS"))
        .map(|e| e.t)
        .ok_or("no DANGEROUS message was sent")?;
    let abort = out
        .conversation
        .iter()
        .find(|e| e.kind == EntryKind::Response && e.actions.contains(&ActionName::EmergencyLanding))
        .map(|e| e.t)
        .ok_or("emergency_landing never issued")?;
    let m = &out.metrics;
    let delay = abort - first_danger;
    let detail = format!(
        "first DANGEROUS at {first_danger:.2} s, emergency_landing at {abort:.2} s (limit {:.1} s later), final phase {} at {:.3} m (limit {LANDED_ALTITUDE})",
        ABORT_PERIODS * spec.decision_period,
        m.final_phase,
        m.final_altitude
    );
    if (0.0..=ABORT_PERIODS * spec.decision_period).contains(&delay)
        && m.final_phase == PhaseKind::Done
        && m.final_altitude <= LANDED_ALTITUDE
    {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_9() -> Outcome {
    let a = check_transcript("conversation_1.log", &CONVERSATION_1)?;
    let b = check_transcript("conversation_2.log", &CONVERSATION_2)?;
    Ok(format!("{} transcript lines reproduced byte-exactly and parsed", a + b))
}

fn criterion_10() -> Outcome {
    let mut prompt_cfg = preset("nominal").prompt;
    prompt_cfg.include_tuning_apis = false;
    if build_initial_prompt(&prompt_cfg).contains("tune_controller_by") {
        return Err("ablated prompt still lists tuning functions".into());
    }
    let mut decisions = 0;
    for name in PRESETS {
        let mut spec = preset(name);
        spec.prompt.include_tuning_apis = false;
        spec.policy = "rule".into();
        let out = run(&spec)?;
        let tuning: Vec<_> = out.conversation.iter().flat_map(|e| &e.actions).filter(|a| a.is_tuning()).collect();
        if !tuning.is_empty() {
            return Err(format!("{name}: rule policy emitted {tuning:?}"));
        }
        decisions += out.metrics.decisions_issued;
    }
    Ok(format!("prompt has no tuning functions; {decisions} decisions over {} presets, none tuning", PRESETS.len()))
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for name in PRESETS {
        let spec = preset(name);
        let first = run(&spec)?;
        let second = run(&spec)?;
        let (h1, h2) = (csv_digest(&first), csv_digest(&second));
        if h1 != h2 {
            return Err(format!("{name}: rule runs differ ({h1} vs {h2})"));
        }
        let out_dir = dir.path().join(name);
        emit_outputs(&first, &out_dir, false).map_err(|e| e.to_string())?;
        let replay = ScenarioSpec { policy: format!("replay:{}", out_dir.join(CONVERSATION_RECORD).display()), ..spec };
        let replays = [run(&replay)?, run(&replay)?];
        for r in &replays {
            if csv_digest(r) != h1 {
                return Err(format!("{name}: replay run differs from the recorded rule run"));
            }
        }
    }
    Ok(format!("{} presets: rule, rule, replay, replay telemetry SHA-256 equal", PRESETS.len()))
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 11] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let mut failed = 0;
    for (n, check) in criteria {
        match check() {
            Ok(detail) => println!("criterion {n}: PASS {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
