//! LQR position control about hover with an additive adaptive offset.
//!
//! The control law is `u = u_hover + K (x - x_ref) + du`, where `K` comes
//! from the DARE on the hover-linearized model and `du` is adjusted by the
//! decision layer through [`crate::executor`].

pub mod dare;
pub mod model;
pub mod weights;

use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlCommand, VehicleState};
use crate::mission::ReferencePoint;

pub use dare::{dare_residual, solve_dare_dense, spectral_radius, DareError, DareSolution};
pub use model::{
    build_hover_model, GainMatrix, InputVector, LinearModel, ModelError, StateMatrix, StateVector, INPUT_DIM, STATE_DIM,
};
pub use weights::{CostWeights, WeightBlock, WeightError, WEIGHT_MAX, WEIGHT_MIN};

pub const DARE_TOL: f64 = 1e-12;
pub const DARE_MAX_ITER: usize = 200;
pub const RESIDUAL_LIMIT: f64 = 1e-8;

/// Riccati solution and pre-negated feedback gain for the 8-state model.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSolution {
    pub p: StateMatrix,
    pub k: GainMatrix,
    pub residual: f64,
}

impl GainSolution {
    pub fn closed_loop(&self, model: &LinearModel) -> StateMatrix {
        model.a + model.b * self.k
    }
}

/// Solves the DARE for `model` and `weights` and checks the result.
///
/// Fails when the iteration does not converge, when the residual is above
/// [`RESIDUAL_LIMIT`], or when `A + BK` is not Schur stable.
pub fn solve_dare(
    model: &LinearModel,
    weights: &CostWeights,
    tol: f64,
    max_iter: usize,
) -> Result<GainSolution, DareError> {
    weights.validate().map_err(|e| DareError::Weights(e.to_string()))?;
    let a = DMatrix::from_column_slice(STATE_DIM, STATE_DIM, model.a.as_slice());
    let b = DMatrix::from_column_slice(STATE_DIM, INPUT_DIM, model.b.as_slice());
    let sol = solve_dare_dense(&a, &b, &weights.q_matrix(), &weights.r_matrix(), tol, max_iter)?;
    if !(sol.residual < RESIDUAL_LIMIT) {
        return Err(DareError::Residual { residual: sol.residual, limit: RESIDUAL_LIMIT });
    }
    let p = StateMatrix::from_column_slice(sol.p.as_slice());
    let k = GainMatrix::from_column_slice(sol.k.as_slice());
    let rho = spectral_radius(&(a + b * &sol.k));
    if !(rho < 1.0) {
        return Err(DareError::Unstable(rho));
    }
    Ok(GainSolution { p, k, residual: sol.residual })
}

/// Nominal hover command `u_safe`: level attitude and the believed hover force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoverCommand {
    pub f_hover: f64,
}

impl HoverCommand {
    pub fn from_mass(mass_param: f64, gravity: f64) -> Self {
        Self { f_hover: mass_param * gravity }
    }

    pub fn as_input(&self) -> InputVector {
        InputVector::new(0.0, 0.0, self.f_hover)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AdaptiveState {
    pub thrust_offset: f64,
    pub roll_offset: f64,
    pub pitch_offset: f64,
}

impl AdaptiveState {
    /// Offsets stacked in input order (roll, pitch, thrust).
    pub fn as_input(&self) -> InputVector {
        InputVector::new(self.roll_offset, self.pitch_offset, self.thrust_offset)
    }

    pub fn clamped(&self, limits: &OffsetLimits) -> (AdaptiveState, bool) {
        let out = AdaptiveState {
            thrust_offset: self.thrust_offset.clamp(-limits.thrust, limits.thrust),
            roll_offset: self.roll_offset.clamp(-limits.tilt, limits.tilt),
            pitch_offset: self.pitch_offset.clamp(-limits.tilt, limits.tilt),
        };
        (out, out != *self)
    }

    pub fn within(&self, limits: &OffsetLimits) -> bool {
        self.thrust_offset.abs() <= limits.thrust
            && self.roll_offset.abs() <= limits.tilt
            && self.pitch_offset.abs() <= limits.tilt
    }
}

/// Symmetric saturation bounds for the adaptive offsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetLimits {
    pub thrust: f64,
    pub tilt: f64,
}

impl OffsetLimits {
    pub fn for_hover(f_hover: f64) -> Self {
        Self { thrust: 0.5 * f_hover, tilt: 0.2 }
    }
}

/// Actuator envelope applied to every command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandLimits {
    pub max_tilt: f64,
    pub thrust_min: f64,
    pub thrust_max: f64,
}

/// Stacks the reference into the controller state: reference attitude is zero.
pub fn reference_state(reference: &ReferencePoint) -> StateVector {
    let p = &reference.position_ref;
    let v = &reference.velocity_ref;
    StateVector::from_column_slice(&[p.x, p.y, p.z, v.x, v.y, v.z, 0.0, 0.0])
}

/// Unsaturated control law in input coordinates `(roll, pitch, total thrust)`.
pub fn control_law(
    state: &VehicleState,
    reference: &ReferencePoint,
    gain: &GainSolution,
    hover: &HoverCommand,
    adapt: &AdaptiveState,
) -> InputVector {
    let error = state.to_vector() - reference_state(reference);
    hover.as_input() + gain.k * error + adapt.as_input()
}

/// Saturated control command. Saturation is silent apart from a debug log.
pub fn compute_control(
    state: &VehicleState,
    reference: &ReferencePoint,
    gain: &GainSolution,
    hover: &HoverCommand,
    adapt: &AdaptiveState,
    limits: &CommandLimits,
) -> ControlCommand {
    let u = control_law(state, reference, gain, hover, adapt);
    let roll = u[0].clamp(-limits.max_tilt, limits.max_tilt);
    let pitch = u[1].clamp(-limits.max_tilt, limits.max_tilt);
    let thrust = u[2].clamp(limits.thrust_min, limits.thrust_max);
    if roll != u[0] || pitch != u[1] || thrust != u[2] {
        log::debug!("command saturated: raw {:?}", u.as_slice());
    }
    ControlCommand {
        roll_cmd: roll,
        pitch_cmd: pitch,
        thrust_delta: thrust - hover.f_hover,
        hover_thrust: hover.f_hover,
    }
}

/// A consistent `(model, weights, gain)` triple.
#[derive(Debug, Clone)]
pub struct GainSet {
    pub model: LinearModel,
    pub weights: CostWeights,
    pub gain: GainSolution,
}

impl GainSet {
    pub fn synthesize(model: LinearModel, weights: CostWeights) -> Result<Self, DareError> {
        let gain = solve_dare(&model, &weights, DARE_TOL, DARE_MAX_ITER)?;
        Ok(Self { model, weights, gain })
    }

    pub fn retuned(&self, weights: CostWeights) -> Result<Self, DareError> {
        Self::synthesize(self.model.clone(), weights)
    }
}

/// Holder for the live gain set. Readers take a snapshot `Arc`, writers
/// replace the whole set, so a reader never sees a half-updated triple.
#[derive(Debug)]
pub struct GainCell {
    current: Mutex<Arc<GainSet>>,
}

impl GainCell {
    pub fn new(set: GainSet) -> Self {
        Self { current: Mutex::new(Arc::new(set)) }
    }

    pub fn load(&self) -> Arc<GainSet> {
        Arc::clone(&self.current.lock().expect("gain cell poisoned"))
    }

    pub fn store(&self, set: GainSet) {
        *self.current.lock().expect("gain cell poisoned") = Arc::new(set);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn default_set() -> GainSet {
        let model = build_hover_model(1.0, 9.81, 0.15, 0.01).unwrap();
        GainSet::synthesize(model, CostWeights::default()).unwrap()
    }

    fn limits() -> CommandLimits {
        CommandLimits { max_tilt: 0.35, thrust_min: 0.0, thrust_max: 25.0 }
    }

    fn hover_ref() -> ReferencePoint {
        ReferencePoint { position_ref: Vector3::new(0.0, 0.0, 1.0), velocity_ref: Vector3::zeros() }
    }

    #[test]
    fn default_gains_are_stabilizing() {
        let set = default_set();
        assert!(set.gain.residual < RESIDUAL_LIMIT);
        assert!((set.gain.p - set.gain.p.transpose()).abs().max() < 1e-10);
        let cl = set.gain.closed_loop(&set.model);
        let cl = DMatrix::from_column_slice(8, 8, cl.as_slice());
        assert!(spectral_radius(&cl) < 1.0);
    }

    #[test]
    fn equilibrium_returns_hover_command_exactly() {
        let set = default_set();
        let hover = HoverCommand::from_mass(1.0, 9.81);
        let r = hover_ref();
        let state = VehicleState::at_rest(r.position_ref);
        let cmd = compute_control(&state, &r, &set.gain, &hover, &AdaptiveState::default(), &limits());
        assert_eq!(cmd.roll_cmd, 0.0);
        assert_eq!(cmd.pitch_cmd, 0.0);
        assert_eq!(cmd.thrust_delta, 0.0);
        assert_eq!(cmd.collective_thrust(), hover.f_hover);
    }

    #[test]
    fn thrust_offset_is_additive() {
        let set = default_set();
        let hover = HoverCommand::from_mass(1.0, 9.81);
        let r = hover_ref();
        let state = VehicleState::at_rest(r.position_ref);
        let adapt = AdaptiveState { thrust_offset: 0.2, ..Default::default() };
        let cmd = compute_control(&state, &r, &set.gain, &hover, &adapt, &limits());
        assert!((cmd.thrust_delta - 0.2).abs() < 1e-15);
    }

    #[test]
    fn vertical_error_uses_thrust_row_of_gain() {
        let set = default_set();
        let hover = HoverCommand::from_mass(1.0, 9.81);
        let r = hover_ref();
        let mut state = VehicleState::at_rest(r.position_ref);
        state.position_w.z -= 0.5;
        let cmd = compute_control(&state, &r, &set.gain, &hover, &AdaptiveState::default(), &limits());
        let expected = set.gain.k[(2, 2)] * -0.5;
        assert!((cmd.thrust_delta - expected).abs() < 1e-12);
        assert!(cmd.thrust_delta > 0.0, "low vehicle must get more thrust");
    }

    #[test]
    fn saturation_respects_envelope() {
        let set = default_set();
        let hover = HoverCommand::from_mass(1.0, 9.81);
        let r = hover_ref();
        let mut state = VehicleState::at_rest(r.position_ref);
        state.position_w += Vector3::new(50.0, -50.0, -50.0);
        let cmd = compute_control(&state, &r, &set.gain, &hover, &AdaptiveState::default(), &limits());
        assert!(cmd.roll_cmd.abs() <= 0.35 && cmd.pitch_cmd.abs() <= 0.35);
        assert_eq!(cmd.collective_thrust(), 25.0);
    }

    #[test]
    fn cheaper_actuation_raises_gain_norm() {
        let set = default_set();
        let cheaper = set.retuned(set.weights.retune(WeightBlock::RAll, 0.5).unwrap()).unwrap();
        assert!(cheaper.gain.k.norm() > set.gain.k.norm());
    }

    #[test]
    fn gain_cell_swaps_whole_sets() {
        let cell = GainCell::new(default_set());
        let before = cell.load();
        let next = before.retuned(before.weights.retune(WeightBlock::QPosition, 2.0).unwrap()).unwrap();
        cell.store(next);
        assert_eq!(before.weights.position, [10.0; 3]);
        assert_eq!(cell.load().weights.position, [20.0; 3]);
    }
}
