//! Deterministic stand-in for the language model.

use super::policy::{DecisionPolicy, Exchange, PolicyError};
use super::{render_response, ActionName, Decision, QueryRecord};
use crate::monitor::FailureCode;

/// Consecutive decisions a code must persist before the rule asks for a
/// stiffer position loop.
pub const PERSISTENCE_FOR_TUNING: usize = 3;

fn corrective_action(code: FailureCode) -> Option<ActionName> {
    use FailureCode::*;
    Some(match code {
        NoIssue => return None,
        FlyingTooLow => ActionName::IncreaseThrust,
        FlyingTooHigh => ActionName::DecreaseThrust,
        PosErrPosY => ActionName::AccelNegativeY,
        PosErrNegY => ActionName::AccelPositiveY,
        PosErrPosX => ActionName::AccelNegativeX,
        PosErrNegX => ActionName::AccelPositiveX,
    })
}

/// Maps failure codes to corrective actions, aborts on any DANGEROUS
/// message, and escalates to tuning when a code will not go away.
#[derive(Debug, Clone, Copy)]
pub struct RulePolicy {
    tuning_enabled: bool,
}

impl RulePolicy {
    pub fn new(tuning_enabled: bool) -> Self {
        Self { tuning_enabled }
    }

    /// Number of consecutive queries, ending with `query`, that carried `code`.
    fn streak(code: FailureCode, query: &QueryRecord, history: &[Exchange]) -> usize {
        if !query.report.contains(code) {
            return 0;
        }
        1 + history.iter().rev().take_while(|ex| ex.query.report.contains(code)).count()
    }

    pub fn actions_for(&self, query: &QueryRecord, history: &[Exchange]) -> Vec<ActionName> {
        if query.report.info.contains("DANGEROUS") {
            return vec![ActionName::EmergencyLanding];
        }
        let mut actions: Vec<ActionName> = query.report.codes.iter().filter_map(|&c| corrective_action(c)).collect();
        if actions.is_empty() {
            return vec![ActionName::DoNothing];
        }
        let persistent = query.report.codes.iter().any(|&c| Self::streak(c, query, history) >= PERSISTENCE_FOR_TUNING);
        if self.tuning_enabled && persistent {
            actions.push(ActionName::TuneControllerByIncreasingPenaltyOnPositionErrors);
        }
        actions
    }
}

impl DecisionPolicy for RulePolicy {
    fn name(&self) -> &str {
        "rule"
    }

    fn decide(&mut self, query: &QueryRecord, history: &[Exchange]) -> Result<Decision, PolicyError> {
        let actions = self.actions_for(query, history);
        let (label, explanation) = if actions == [ActionName::EmergencyLanding] {
            (
                "dangerous_oscillation".to_string(),
                "the vehicle reports dangerous behaviour, landing is the safe choice".to_string(),
            )
        } else if actions == [ActionName::DoNothing] {
            ("no_issue".to_string(), "tracking errors are within bounds".to_string())
        } else {
            let slugs: Vec<&str> = query.report.codes.iter().map(|c| c.slug()).collect();
            (slugs.join("_and_"), "counteracting the reported position errors".to_string())
        };
        let raw = render_response(&actions, &label, &explanation);
        Ok(Decision { actions, short_label: Some(label), explanation, raw, latency: 0.0, dropped: Vec::new() })
    }
}
