use nalgebra::{DMatrix, SVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::{INPUT_DIM, STATE_DIM};

pub const WEIGHT_MIN: f64 = 1e-6;
pub const WEIGHT_MAX: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("retune factor must be positive and finite, got {0}")]
    BadFactor(f64),
    #[error("weight `{0}` is outside its admissible range")]
    OutOfRange(&'static str),
}

/// Which diagonal block a retune touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightBlock {
    QPosition,
    RAll,
}

/// Diagonal LQR weights grouped by role.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    /// Per-axis position penalty (x, y, z).
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    /// Roll, pitch.
    pub attitude: [f64; 2],
    /// Roll and pitch command cost.
    pub attitude_cmd: [f64; 2],
    pub thrust: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { position: [10.0; 3], velocity: [1.0; 3], attitude: [1.0; 2], attitude_cmd: [5.0; 2], thrust: 1.0 }
    }
}

impl CostWeights {
    pub fn q_diagonal(&self) -> SVector<f64, STATE_DIM> {
        let (p, v, a) = (&self.position, &self.velocity, &self.attitude);
        SVector::from_column_slice(&[p[0], p[1], p[2], v[0], v[1], v[2], a[0], a[1]])
    }

    pub fn r_diagonal(&self) -> SVector<f64, INPUT_DIM> {
        SVector::from_column_slice(&[self.attitude_cmd[0], self.attitude_cmd[1], self.thrust])
    }

    pub fn q_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(self.q_diagonal().as_slice()))
    }

    pub fn r_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(self.r_diagonal().as_slice()))
    }

    pub fn validate(&self) -> Result<(), WeightError> {
        if self.q_diagonal().iter().any(|w| !(w.is_finite() && *w >= 0.0 && *w <= WEIGHT_MAX)) {
            return Err(WeightError::OutOfRange("Q"));
        }
        if self.r_diagonal().iter().any(|w| !(w.is_finite() && *w >= WEIGHT_MIN && *w <= WEIGHT_MAX)) {
            return Err(WeightError::OutOfRange("R"));
        }
        Ok(())
    }

    /// Scales one diagonal block by `factor` and clamps it to
    /// `[WEIGHT_MIN, WEIGHT_MAX]`. The caller re-solves the DARE afterwards.
    pub fn retune(&self, block: WeightBlock, factor: f64) -> Result<CostWeights, WeightError> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(WeightError::BadFactor(factor));
        }
        let scale = |w: f64| (w * factor).clamp(WEIGHT_MIN, WEIGHT_MAX);
        let mut out = *self;
        match block {
            WeightBlock::QPosition => out.position = self.position.map(scale),
            WeightBlock::RAll => {
                out.attitude_cmd = self.attitude_cmd.map(scale);
                out.thrust = scale(self.thrust);
            }
        }
        if out != *self {
            log::debug!("retuned {block:?} by {factor}: {out:?}");
        }
        Ok(out)
    }
}
