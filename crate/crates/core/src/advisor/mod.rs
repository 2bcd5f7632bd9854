//! The text protocol between the vehicle and its decision policy.
//!
//! Each decision cycle renders a [`FailureReport`] as a query such as
//! `([4, 6], 'z error is -0.14, y error is -0.44, ')`. A [`DecisionPolicy`]
//! answers with a list of whitelisted action names.

pub mod parse;
pub mod policy;
pub mod prompt;
pub mod remote;
pub mod replay;
pub mod rule;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::monitor::{FailureReport, OscillationReport};

pub use parse::{parse_decision, ParseError};
pub use policy::{
    DecisionPolicy, Exchange, NoopPolicy, PolicyContext, PolicyDriver, PolicyError, PolicyFactory, PolicyRegistry,
};
pub use prompt::build_initial_prompt;
pub use remote::RemotePolicy;
pub use replay::ReplayPolicy;
pub use rule::RulePolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionName {
    IncreaseThrust,
    DecreaseThrust,
    AccelPositiveX,
    AccelNegativeX,
    AccelPositiveY,
    AccelNegativeY,
    EmergencyLanding,
    DoNothing,
    TuneControllerByDecreasingTheCostOfActuationUsage,
    TuneControllerByIncreasingTheCostOfActuationUsage,
    TuneControllerByIncreasingPenaltyOnPositionErrors,
    TuneControllerByDecreasingPenaltyOnPositionErrors,
}

impl ActionName {
    pub const ALL: [ActionName; 12] = [
        ActionName::IncreaseThrust,
        ActionName::DecreaseThrust,
        ActionName::AccelPositiveX,
        ActionName::AccelNegativeX,
        ActionName::AccelPositiveY,
        ActionName::AccelNegativeY,
        ActionName::EmergencyLanding,
        ActionName::DoNothing,
        ActionName::TuneControllerByDecreasingTheCostOfActuationUsage,
        ActionName::TuneControllerByIncreasingTheCostOfActuationUsage,
        ActionName::TuneControllerByIncreasingPenaltyOnPositionErrors,
        ActionName::TuneControllerByDecreasingPenaltyOnPositionErrors,
    ];

    pub fn as_str(self) -> &'static str {
        use ActionName::*;
        match self {
            IncreaseThrust => "increase_thrust",
            DecreaseThrust => "decrease_thrust",
            AccelPositiveX => "accel_positive_x",
            AccelNegativeX => "accel_negative_x",
            AccelPositiveY => "accel_positive_y",
            AccelNegativeY => "accel_negative_y",
            EmergencyLanding => "emergency_landing",
            DoNothing => "do_nothing",
            TuneControllerByDecreasingTheCostOfActuationUsage => {
                "tune_controller_by_decreasing_the_cost_of_actuation_usage"
            }
            TuneControllerByIncreasingTheCostOfActuationUsage => {
                "tune_controller_by_increasing_the_cost_of_actuation_usage"
            }
            TuneControllerByIncreasingPenaltyOnPositionErrors => {
                "tune_controller_by_increasing_penalty_on_position_errors"
            }
            TuneControllerByDecreasingPenaltyOnPositionErrors => {
                "tune_controller_by_decreasing_penalty_on_position_errors"
            }
        }
    }

    pub fn is_tuning(self) -> bool {
        use ActionName::*;
        matches!(
            self,
            TuneControllerByDecreasingTheCostOfActuationUsage
                | TuneControllerByIncreasingTheCostOfActuationUsage
                | TuneControllerByIncreasingPenaltyOnPositionErrors
                | TuneControllerByDecreasingPenaltyOnPositionErrors
        )
    }
}

impl fmt::Display for ActionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActionName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionName::ALL.iter().copied().find(|a| a.as_str() == s).ok_or_else(|| format!("unknown action `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskEmphasis {
    #[default]
    Normal,
    Strong,
}

impl FromStr for RiskEmphasis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" => Ok(RiskEmphasis::Normal),
            "strong" => Ok(RiskEmphasis::Strong),
            other => Err(format!("unknown risk emphasis `{other}` (expected normal|strong)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptConfig {
    pub include_tuning_apis: bool,
    pub risk_emphasis: RiskEmphasis,
    pub platform: String,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self { include_tuning_apis: true, risk_emphasis: RiskEmphasis::Normal, platform: "multirotor".into() }
    }
}

impl PromptConfig {
    /// Actions advertised by the prompt built from this config.
    pub fn available_actions(&self) -> Vec<ActionName> {
        ActionName::ALL.iter().copied().filter(|a| self.include_tuning_apis || !a.is_tuning()).collect()
    }
}

/// A validated answer from a policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub actions: Vec<ActionName>,
    pub short_label: Option<String>,
    pub explanation: String,
    pub raw: String,
    /// Seconds between query and answer.
    pub latency: f64,
    /// Identifiers in the reply that were not whitelisted.
    pub dropped: Vec<String>,
}

impl Decision {
    pub fn do_nothing(raw: impl Into<String>) -> Self {
        Self {
            actions: vec![ActionName::DoNothing],
            short_label: None,
            explanation: String::new(),
            raw: raw.into(),
            latency: 0.0,
            dropped: Vec::new(),
        }
    }

    pub fn has_warnings(&self) -> bool {
        !self.dropped.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub t: f64,
    pub report: FailureReport,
    pub rendered: String,
}

impl QueryRecord {
    pub fn new(t: f64, report: FailureReport) -> Self {
        let rendered = format_query(&report);
        Self { t, report, rendered }
    }
}

/// Renders a report as `([c1, c2], '{info}')`.
pub fn format_query(report: &FailureReport) -> String {
    let codes: Vec<String> = report.codes.iter().map(|c| c.value().to_string()).collect();
    format!("([{}], '{}')", codes.join(", "), report.info)
}

pub fn render_oscillation_message(report: &OscillationReport) -> String {
    format!(
        "VERY DANGEROUS oscillations on {}-axis. Frequency is {:.2} [Hz], amplitude is {:.2} [m].",
        report.axis, report.frequency, report.amplitude
    )
}

/// Renders a reply in the answer style the prompt asks for.
pub fn render_response(actions: &[ActionName], label: &str, explanation: &str) -> String {
    let names: Vec<String> = actions.iter().map(|a| format!("\"{a}\"")).collect();
    format!("list_of_function_names_to_be_executed_right_now: [{}], \"{label}\", \"{explanation}\"", names.join(", "))
}
