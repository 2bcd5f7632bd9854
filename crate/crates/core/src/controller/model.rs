use nalgebra::{SMatrix, SVector};
use thiserror::Error;

pub const STATE_DIM: usize = 8;
pub const INPUT_DIM: usize = 3;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type InputVector = SVector<f64, INPUT_DIM>;
pub type StateMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type InputMatrix = SMatrix<f64, STATE_DIM, INPUT_DIM>;
pub type GainMatrix = SMatrix<f64, INPUT_DIM, STATE_DIM>;

// State ordering: [px, py, pz, vx, vy, vz, roll, pitch]; input: [roll_cmd, pitch_cmd, thrust_delta].
pub(crate) const IDX_VEL: usize = 3;
pub(crate) const IDX_ROLL: usize = 6;
pub(crate) const IDX_PITCH: usize = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model parameter `{name}` must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// Discrete hover-linearized translational model `x' = A x + B u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: StateMatrix,
    pub b: InputMatrix,
    pub dt: f64,
    pub mass_param: f64,
}

/// Continuous-time hover model (A_c, B_c).
pub fn continuous_hover_model(mass_param: f64, gravity: f64, attitude_tau: f64) -> (StateMatrix, InputMatrix) {
    let mut a = StateMatrix::zeros();
    let mut b = InputMatrix::zeros();
    for i in 0..3 {
        a[(i, IDX_VEL + i)] = 1.0;
    }
    a[(IDX_VEL, IDX_PITCH)] = gravity;
    a[(IDX_VEL + 1, IDX_ROLL)] = -gravity;
    b[(IDX_VEL + 2, 2)] = 1.0 / mass_param;
    a[(IDX_ROLL, IDX_ROLL)] = -1.0 / attitude_tau;
    a[(IDX_PITCH, IDX_PITCH)] = -1.0 / attitude_tau;
    b[(IDX_ROLL, 0)] = 1.0 / attitude_tau;
    b[(IDX_PITCH, 1)] = 1.0 / attitude_tau;
    (a, b)
}

/// Builds the hover model and discretizes it with a zero-order hold.
///
/// The ZOH pair comes from the exponential of the augmented generator
/// `[[A_c, B_c], [0, 0]] * dt`, whose top blocks are `(A, B)`.
pub fn build_hover_model(mass_param: f64, gravity: f64, attitude_tau: f64, dt: f64) -> Result<LinearModel, ModelError> {
    for (name, value) in [("mass_param", mass_param), ("gravity", gravity), ("attitude_tau", attitude_tau), ("dt", dt)]
    {
        if !(value > 0.0 && value.is_finite()) {
            return Err(ModelError::NonPositive { name, value });
        }
    }
    let (ac, bc) = continuous_hover_model(mass_param, gravity, attitude_tau);
    let mut gen = SMatrix::<f64, 11, 11>::zeros();
    gen.fixed_view_mut::<STATE_DIM, STATE_DIM>(0, 0).copy_from(&(ac * dt));
    gen.fixed_view_mut::<STATE_DIM, INPUT_DIM>(0, STATE_DIM).copy_from(&(bc * dt));
    let phi = gen.exp();
    Ok(LinearModel {
        a: phi.fixed_view::<STATE_DIM, STATE_DIM>(0, 0).into_owned(),
        b: phi.fixed_view::<STATE_DIM, INPUT_DIM>(0, STATE_DIM).into_owned(),
        dt,
        mass_param,
    })
}
