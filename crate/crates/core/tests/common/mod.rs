#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::Vector3;
use uav_adapt::advisor::{format_query, parse_decision, render_oscillation_message, ActionName};
use uav_adapt::dynamics::{Axis, VehicleState};
use uav_adapt::mission::ReferencePoint;
use uav_adapt::monitor::{check_failures, OscillationReport, Thresholds};

use ActionName::*;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

/// One `t = ...s: Prompt|Response ...` line.
#[derive(Debug, Clone)]
pub struct LogLine {
    pub t: String,
    pub is_prompt: bool,
    pub text: String,
}

pub fn read_log(name: &str) -> Vec<LogLine> {
    let text = std::fs::read_to_string(fixture(name)).expect("fixture exists");
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let rest = l.strip_prefix("t = ").expect("line starts with time");
            let (t, body) = rest.split_once("s: ").expect("time separator");
            if let Some(p) = body.strip_prefix("Prompt ") {
                LogLine { t: t.to_string(), is_prompt: true, text: p.to_string() }
            } else {
                let r = body.strip_prefix("Response ").expect("prompt or response");
                LogLine { t: t.to_string(), is_prompt: false, text: r.to_string() }
            }
        })
        .collect()
}

/// A vehicle displaced from a reference at 1 m altitude by `(ex, ey, ez)`.
pub fn displaced(ex: f64, ey: f64, ez: f64) -> (VehicleState, ReferencePoint) {
    let reference = ReferencePoint::hold(Vector3::new(0.0, 0.0, 1.0));
    let state = VehicleState::at_rest(reference.position_ref + Vector3::new(ex, ey, ez));
    (state, reference)
}

/// Random 8x3 pair `(A, B)` that passes a controllability rank test, so it is
/// stabilizable. Entries are uniform and scaled so that a fair share of the
/// draws is open-loop unstable.
pub fn random_controllable_pair(rng: &mut impl rand::Rng) -> (nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>) {
    use rand::RngExt;
    loop {
        let scale = 1.6 / 8f64.sqrt();
        let a = nalgebra::DMatrix::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0) * scale);
        let b = nalgebra::DMatrix::from_fn(8, 3, |_, _| rng.random_range(-1.0..1.0));
        if controllability_rank(&a, &b) == 8 {
            return (a, b);
        }
    }
}

pub fn controllability_rank(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> usize {
    let n = a.nrows();
    let m = b.ncols();
    let mut c = nalgebra::DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        c.view_mut((0, i * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    c.rank(1e-9 * c.norm())
}

/// (time label, error x/y/z, oscillation on y, actions in the recorded reply)
pub type Case = (&'static str, [f64; 3], bool, &'static [ActionName]);

pub const CONVERSATION_1: [Case; 4] = [
    ("3.92", [0.0, 0.0, 0.0], false, &[DoNothing]),
    ("8.47", [0.03, -0.44, -0.14], false, &[IncreaseThrust, AccelPositiveY]),
    (
        "14.03",
        [0.0, -1.18, -0.63],
        false,
        &[IncreaseThrust, AccelPositiveY, TuneControllerByIncreasingPenaltyOnPositionErrors],
    ),
    ("19.0", [0.12, 0.15, -0.30], false, &[IncreaseThrust, AccelNegativeY, AccelNegativeX]),
];

pub const CONVERSATION_2: [Case; 3] = [
    ("6.07", [0.0, 0.0, 0.0], false, &[DoNothing]),
    (
        "13.95",
        [-0.40, -0.62, -0.69],
        false,
        &[IncreaseThrust, TuneControllerByDecreasingTheCostOfActuationUsage, AccelPositiveY, AccelPositiveX],
    ),
    ("57.48", [-0.28, -0.65, 0.02], true, &[EmergencyLanding]),
];

/// Rebuilds every prompt of a recorded log from its error triple and parses
/// every reply. Returns the number of lines checked.
pub fn check_transcript(log: &str, cases: &[Case]) -> Result<usize, String> {
    let lines = read_log(log);
    if lines.len() != 2 * cases.len() {
        return Err(format!("{log}: {} lines, expected {}", lines.len(), 2 * cases.len()));
    }
    for (pair, (t, e, oscillating, actions)) in lines.chunks(2).zip(cases) {
        let (prompt, response) = (&pair[0], &pair[1]);
        if !prompt.is_prompt || response.is_prompt || prompt.t != *t {
            return Err(format!("{log}: unexpected line order at t = {t}"));
        }
        let (state, reference) = displaced(e[0], e[1], e[2]);
        let extra = oscillating.then(|| {
            render_oscillation_message(&OscillationReport { axis: Axis::Y, frequency: 0.67, amplitude: 0.19 })
        });
        let report = check_failures(&state, &reference, &Thresholds::default(), extra.as_deref());
        let rebuilt = format_query(&report);
        if rebuilt != prompt.text {
            return Err(format!("{log}: prompt at t = {t}: {rebuilt:?} != {:?}", prompt.text));
        }
        let decision = parse_decision(&response.text, &ActionName::ALL).map_err(|e| format!("{log}: t = {t}: {e}"))?;
        if decision.actions != *actions || decision.has_warnings() {
            return Err(format!("{log}: response at t = {t} parsed to {:?}", decision.actions));
        }
    }
    Ok(lines.len())
}
