//! Applies validated decisions to the adaptive offsets, the LQR weights and
//! the emergency latch.

use serde::{Deserialize, Serialize};

use crate::advisor::ActionName;
use crate::controller::{AdaptiveState, CostWeights, OffsetLimits, WeightBlock};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionEffects {
    /// Newtons per thrust action.
    pub thrust_step: f64,
    /// Radians per accel action.
    pub tilt_step: f64,
    pub tune_factor: f64,
    pub limits: OffsetLimits,
}

impl ActionEffects {
    /// Defaults scaled to the controller's believed hover force.
    pub fn for_hover(f_hover: f64) -> Self {
        Self {
            thrust_step: 0.02 * f_hover,
            tilt_step: 0.0175,
            tune_factor: 2.0,
            limits: OffsetLimits::for_hover(f_hover),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.thrust_step > 0.0 && self.tilt_step > 0.0) {
            return Err("action steps must be positive".into());
        }
        if !(self.tune_factor > 1.0 && self.tune_factor.is_finite()) {
            return Err("tune_factor must be finite and greater than 1".into());
        }
        if !(self.limits.thrust > 0.0 && self.limits.tilt > 0.0) {
            return Err("offset limits must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecutionOutcome {
    pub adapt: AdaptiveState,
    pub weights: CostWeights,
    pub emergency: bool,
    pub needs_resolve: bool,
}

/// Applies `actions` in order. `emergency` is the current latch; it can be
/// set here but never cleared.
pub fn apply_actions(
    actions: &[ActionName],
    adapt: AdaptiveState,
    weights: CostWeights,
    emergency: bool,
    effects: &ActionEffects,
) -> ExecutionOutcome {
    let mut out = ExecutionOutcome { adapt, weights, emergency, needs_resolve: false };
    for &action in actions {
        let a = &mut out.adapt;
        match action {
            ActionName::IncreaseThrust => a.thrust_offset += effects.thrust_step,
            ActionName::DecreaseThrust => a.thrust_offset -= effects.thrust_step,
            ActionName::AccelPositiveX => a.pitch_offset += effects.tilt_step,
            ActionName::AccelNegativeX => a.pitch_offset -= effects.tilt_step,
            // positive roll accelerates towards -y
            ActionName::AccelPositiveY => a.roll_offset -= effects.tilt_step,
            ActionName::AccelNegativeY => a.roll_offset += effects.tilt_step,
            ActionName::EmergencyLanding => out.emergency = true,
            ActionName::DoNothing => {}
            ActionName::TuneControllerByIncreasingPenaltyOnPositionErrors => {
                out.weights = retune(&out.weights, WeightBlock::QPosition, effects.tune_factor);
                out.needs_resolve = true;
            }
            ActionName::TuneControllerByDecreasingPenaltyOnPositionErrors => {
                out.weights = retune(&out.weights, WeightBlock::QPosition, 1.0 / effects.tune_factor);
                out.needs_resolve = true;
            }
            ActionName::TuneControllerByIncreasingTheCostOfActuationUsage => {
                out.weights = retune(&out.weights, WeightBlock::RAll, effects.tune_factor);
                out.needs_resolve = true;
            }
            ActionName::TuneControllerByDecreasingTheCostOfActuationUsage => {
                out.weights = retune(&out.weights, WeightBlock::RAll, 1.0 / effects.tune_factor);
                out.needs_resolve = true;
            }
        }
        let (clamped, hit) = out.adapt.clamped(&effects.limits);
        if hit {
            log::info!("adaptive offset clamped after {action}");
        }
        out.adapt = clamped;
    }
    out
}

fn retune(weights: &CostWeights, block: WeightBlock, factor: f64) -> CostWeights {
    // factor is positive by ActionEffects::validate
    weights.retune(block, factor).expect("positive retune factor")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn effects() -> ActionEffects {
        ActionEffects::for_hover(0.85 * 9.81)
    }

    fn apply(actions: &[ActionName]) -> ExecutionOutcome {
        apply_actions(actions, AdaptiveState::default(), CostWeights::default(), false, &effects())
    }

    #[test]
    fn do_nothing_is_identity() {
        let out = apply(&[ActionName::DoNothing]);
        assert_eq!(out.adapt, AdaptiveState::default());
        assert_eq!(out.weights, CostWeights::default());
        assert!(!out.emergency && !out.needs_resolve);
    }

    #[test]
    fn transcript_action_list() {
        let out = apply(&[
            ActionName::IncreaseThrust,
            ActionName::AccelPositiveY,
            ActionName::TuneControllerByIncreasingPenaltyOnPositionErrors,
        ]);
        let e = effects();
        assert_eq!(out.adapt.thrust_offset, e.thrust_step);
        assert_eq!(out.adapt.roll_offset, -e.tilt_step);
        assert_eq!(out.adapt.pitch_offset, 0.0);
        assert_eq!(out.weights.position, CostWeights::default().position.map(|q| 2.0 * q));
        assert!(out.needs_resolve);
    }

    #[test]
    fn x_actions_move_pitch() {
        let e = effects();
        assert_eq!(apply(&[ActionName::AccelPositiveX]).adapt.pitch_offset, e.tilt_step);
        assert_eq!(apply(&[ActionName::AccelNegativeX]).adapt.pitch_offset, -e.tilt_step);
        assert_eq!(apply(&[ActionName::AccelNegativeY]).adapt.roll_offset, e.tilt_step);
    }

    #[test]
    fn actuation_cost_tuning_scales_r() {
        let out = apply(&[ActionName::TuneControllerByDecreasingTheCostOfActuationUsage]);
        assert_eq!(out.weights.thrust, 0.5 * CostWeights::default().thrust);
        assert_eq!(out.weights.attitude_cmd, CostWeights::default().attitude_cmd.map(|r| 0.5 * r));
    }

    #[test]
    fn emergency_latches() {
        let out = apply(&[ActionName::EmergencyLanding, ActionName::DoNothing]);
        assert!(out.emergency);
        let later = apply_actions(&[ActionName::DoNothing], out.adapt, out.weights, out.emergency, &effects());
        assert!(later.emergency);
    }

    fn any_action() -> impl Strategy<Value = ActionName> {
        (0usize..12).prop_map(|i| ActionName::ALL[i])
    }

    fn adjust_action() -> impl Strategy<Value = ActionName> {
        (0usize..6).prop_map(|i| ActionName::ALL[i])
    }

    proptest! {
        #[test]
        fn offsets_stay_within_limits(seq in proptest::collection::vec(any_action(), 0..200)) {
            let out = apply(&seq);
            prop_assert!(out.adapt.within(&effects().limits));
            prop_assert!(out.weights.validate().is_ok());
            prop_assert_eq!(out.needs_resolve, seq.iter().any(|a| a.is_tuning()));
        }

        #[test]
        fn inverse_pairs_cancel(n in 0usize..10) {
            let mut seq = vec![ActionName::IncreaseThrust; n];
            seq.extend(vec![ActionName::DecreaseThrust; n]);
            let out = apply(&seq);
            prop_assert!(out.adapt.thrust_offset.abs() < 1e-12);
        }

        #[test]
        fn thrust_and_tilt_commute(a in adjust_action(), b in adjust_action()) {
            let ab = apply(&[a, b]).adapt;
            let ba = apply(&[b, a]).adapt;
            prop_assert!((ab.thrust_offset - ba.thrust_offset).abs() < 1e-15);
            prop_assert!((ab.roll_offset - ba.roll_offset).abs() < 1e-15);
            prop_assert!((ab.pitch_offset - ba.pitch_offset).abs() < 1e-15);
        }

        #[test]
        fn q_and_r_tuning_commute(i in 8usize..12, j in 8usize..12) {
            let (a, b) = (ActionName::ALL[i], ActionName::ALL[j]);
            prop_assert_eq!(apply(&[a, b]).weights, apply(&[b, a]).weights);
        }
    }
}
