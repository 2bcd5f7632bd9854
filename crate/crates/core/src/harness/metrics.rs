//! Per-tick telemetry and run summary statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::advisor::ActionName;
use crate::mission::PhaseKind;

/// One control tick. Field names double as the CSV header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRow {
    pub t: f64,
    pub pos_x: f64,
    pub pos_y: f64,
    pub pos_z: f64,
    pub ref_x: f64,
    pub ref_y: f64,
    pub ref_z: f64,
    pub err_x: f64,
    pub err_y: f64,
    pub err_z: f64,
    pub roll_cmd: f64,
    pub pitch_cmd: f64,
    pub thrust_delta: f64,
    pub thrust_offset: f64,
    pub roll_offset: f64,
    pub pitch_offset: f64,
    /// Active failure codes joined with `;`.
    pub failure_codes: String,
    pub phase: PhaseKind,
    /// Latency of the most recent decision, seconds.
    pub decision_latency: f64,
}

impl TelemetryRow {
    pub fn error(&self) -> [f64; 3] {
        [self.err_x, self.err_y, self.err_z]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub scenario: String,
    pub policy: String,
    pub seed: u64,
    pub duration: f64,
    /// Start of the tail the steady statistics cover.
    pub steady_window_start: f64,
    pub steady_rms_error: [f64; 3],
    pub steady_max_abs_error: [f64; 3],
    pub final_altitude_error: f64,
    /// First time after which `|e_z|` stays below 0.30 m for the rest of the flight.
    pub time_to_ez_below_0_30: Option<f64>,
    pub time_to_ez_below_0_10: Option<f64>,
    pub first_dangerous_time: Option<f64>,
    /// When an emergency landing was requested.
    pub emergency_time: Option<f64>,
    pub final_phase: PhaseKind,
    pub final_altitude: f64,
    pub decisions_issued: usize,
    pub actions_issued: usize,
    pub action_counts: BTreeMap<String, usize>,
    pub policy_failures: usize,
    pub gain_updates: usize,
}

/// Phases during which the vehicle is meant to be tracking in the air.
pub fn is_flight_phase(phase: PhaseKind) -> bool {
    matches!(phase, PhaseKind::Takeoff | PhaseKind::FollowTrajectory | PhaseKind::Hover)
}

/// Earliest flight time from which `|e_z| < limit` holds up to the last
/// flight tick. `None` when the last flight tick violates it or there was no
/// flight at all.
pub fn settling_time(rows: &[TelemetryRow], limit: f64) -> Option<f64> {
    let flight: Vec<&TelemetryRow> = rows.iter().filter(|r| is_flight_phase(r.phase)).collect();
    let last_bad = flight.iter().rposition(|r| r.err_z.abs() >= limit);
    match last_bad {
        None => flight.first().map(|r| r.t),
        Some(i) => flight.get(i + 1).map(|r| r.t),
    }
}

/// Root-mean-square and max-abs error per axis over rows with `t >= start`.
pub fn window_stats(rows: &[TelemetryRow], start: f64) -> ([f64; 3], [f64; 3]) {
    let mut sq = [0.0; 3];
    let mut max = [0.0f64; 3];
    let mut n = 0usize;
    for r in rows.iter().filter(|r| r.t >= start - 1e-9) {
        for (i, e) in r.error().iter().enumerate() {
            sq[i] += e * e;
            max[i] = max[i].max(e.abs());
        }
        n += 1;
    }
    if n == 0 {
        return ([0.0; 3], [0.0; 3]);
    }
    (sq.map(|s| (s / n as f64).sqrt()), max)
}

pub fn empty_action_counts() -> BTreeMap<String, usize> {
    ActionName::ALL.iter().map(|a| (a.as_str().to_string(), 0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, err_z: f64, phase: PhaseKind) -> TelemetryRow {
        TelemetryRow {
            t,
            pos_x: 0.0,
            pos_y: 0.0,
            pos_z: 0.0,
            ref_x: 0.0,
            ref_y: 0.0,
            ref_z: 0.0,
            err_x: 0.0,
            err_y: 0.0,
            err_z,
            roll_cmd: 0.0,
            pitch_cmd: 0.0,
            thrust_delta: 0.0,
            thrust_offset: 0.0,
            roll_offset: 0.0,
            pitch_offset: 0.0,
            failure_codes: "0".into(),
            phase,
            decision_latency: 0.0,
        }
    }

    #[test]
    fn settling_ignores_ground_phases() {
        use PhaseKind::*;
        let rows = vec![
            row(0.0, 0.0, Idle),
            row(1.0, -0.5, Takeoff),
            row(2.0, -0.2, FollowTrajectory),
            row(3.0, -0.35, FollowTrajectory),
            row(4.0, -0.25, FollowTrajectory),
            row(5.0, -0.9, Land),
        ];
        assert_eq!(settling_time(&rows, 0.30), Some(4.0));
        assert_eq!(settling_time(&rows, 1.0), Some(1.0));
        assert_eq!(settling_time(&rows, 0.1), None);
        assert_eq!(settling_time(&rows[..1], 0.1), None);
    }

    #[test]
    fn rms_over_tail() {
        let rows: Vec<TelemetryRow> =
            (0..10).map(|i| row(i as f64, if i >= 6 { 2.0 } else { 100.0 }, PhaseKind::Hover)).collect();
        let (rms, max) = window_stats(&rows, 6.0);
        assert_eq!(rms[2], 2.0);
        assert_eq!(max[2], 2.0);
        assert_eq!(rms[0], 0.0);
    }

    #[test]
    fn action_counts_start_at_zero_for_every_action() {
        let c = empty_action_counts();
        assert_eq!(c.len(), 12);
        assert!(c.values().all(|&n| n == 0));
    }
}
