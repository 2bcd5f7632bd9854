//! Turns tracking errors into failure codes and short text reports.

pub mod fft;
pub mod oscillation;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleState;
use crate::mission::ReferencePoint;

pub use oscillation::{detect_oscillation, OscillationConfig, OscillationReport, SampleRing};

/// Failure codes as numbered in the decision prompt. 1 and 2 are never emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum FailureCode {
    NoIssue = 0,
    FlyingTooHigh = 3,
    FlyingTooLow = 4,
    PosErrPosY = 5,
    PosErrNegY = 6,
    PosErrPosX = 7,
    PosErrNegX = 8,
}

impl FailureCode {
    pub fn value(self) -> u8 {
        self as u8
    }

    pub fn from_value(v: u8) -> Option<Self> {
        use FailureCode::*;
        Some(match v {
            0 => NoIssue,
            3 => FlyingTooHigh,
            4 => FlyingTooLow,
            5 => PosErrPosY,
            6 => PosErrNegY,
            7 => PosErrPosX,
            8 => PosErrNegX,
            _ => return None,
        })
    }

    /// Axis letter the code refers to, if any.
    pub fn axis_letter(self) -> Option<char> {
        use FailureCode::*;
        match self {
            NoIssue => None,
            FlyingTooHigh | FlyingTooLow => Some('z'),
            PosErrPosY | PosErrNegY => Some('y'),
            PosErrPosX | PosErrNegX => Some('x'),
        }
    }

    pub fn slug(self) -> &'static str {
        use FailureCode::*;
        match self {
            NoIssue => "no_issue",
            FlyingTooHigh => "flying_too_high",
            FlyingTooLow => "flying_too_low",
            PosErrPosY => "positive_y_position_error",
            PosErrNegY => "negative_y_position_error",
            PosErrPosX => "positive_x_position_error",
            PosErrNegX => "negative_x_position_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureReport {
    pub codes: Vec<FailureCode>,
    pub info: String,
}

impl FailureReport {
    pub fn is_nominal(&self) -> bool {
        self.codes == [FailureCode::NoIssue]
    }

    pub fn contains(&self, code: FailureCode) -> bool {
        self.codes.contains(&code)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { x: 0.10, y: 0.10, z: 0.10 }
    }
}

/// Compares the position error `p - p_ref` against per-axis thresholds.
///
/// The info string lists every triggered axis in the order z, y, x as
/// `"{axis} error is {e:.2}, "`, then `extra` verbatim.
pub fn check_failures(
    state: &VehicleState,
    reference: &ReferencePoint,
    thresholds: &Thresholds,
    extra: Option<&str>,
) -> FailureReport {
    let e = state.position_w - reference.position_ref;
    let mut codes = Vec::new();
    let mut info = String::new();

    let axes = [
        ('z', e.z, thresholds.z, FailureCode::FlyingTooHigh, FailureCode::FlyingTooLow),
        ('y', e.y, thresholds.y, FailureCode::PosErrPosY, FailureCode::PosErrNegY),
        ('x', e.x, thresholds.x, FailureCode::PosErrPosX, FailureCode::PosErrNegX),
    ];
    for (letter, err, thr, above, below) in axes {
        let code = if err > thr {
            above
        } else if err < -thr {
            below
        } else {
            continue;
        };
        codes.push(code);
        let _ = write!(info, "{letter} error is {err:.2}, ");
    }
    if let Some(extra) = extra {
        info.push_str(extra);
    }
    if codes.is_empty() {
        codes.push(FailureCode::NoIssue);
    }
    codes.sort();
    FailureReport { codes, info }
}
