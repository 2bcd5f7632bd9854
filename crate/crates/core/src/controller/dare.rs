//! Discrete algebraic Riccati equation
//!
//! ```text
//! A'PA - P - A'PB (R + B'PB)^-1 B'PA + Q = 0
//! ```
//!
//! solved with the structure-preserving doubling algorithm (SDA). Starting
//! from `A_0 = A`, `G_0 = B R^-1 B'`, `H_0 = Q`:
//!
//! ```text
//! W       = I + G_k H_k
//! A_{k+1} = A_k W^-1 A_k
//! G_{k+1} = G_k + A_k W^-1 G_k A_k'
//! H_{k+1} = H_k + A_k' H_k W^-1 A_k
//! ```
//!
//! `H_k` converges quadratically to the stabilizing solution `P`.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DareError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("weight matrices are not admissible: {0}")]
    Weights(String),
    #[error("doubling iteration did not converge within {max_iter} iterations (last step {last_step:e})")]
    NoConvergence { max_iter: usize, last_step: f64 },
    #[error("singular matrix encountered at iteration {0}")]
    Singular(usize),
    #[error("solution residual {residual:e} exceeds limit {limit:e}")]
    Residual { residual: f64, limit: f64 },
    #[error("closed loop is not stable: spectral radius {0}")]
    Unstable(f64),
}

/// Result of the dense solver. `k` is stored pre-negated: `u = k x`.
#[derive(Debug, Clone)]
pub struct DareSolution {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn check_dims(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<(), DareError> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n {
        return Err(DareError::Dimension("A must be square".into()));
    }
    if b.nrows() != n {
        return Err(DareError::Dimension(format!("B must have {n} rows")));
    }
    if q.shape() != (n, n) {
        return Err(DareError::Dimension(format!("Q must be {n}x{n}")));
    }
    if r.shape() != (m, m) {
        return Err(DareError::Dimension(format!("R must be {m}x{m}")));
    }
    Ok(())
}

/// Feedback gain `K = -(R + B'PB)^-1 B'PA`.
pub fn feedback_gain(a: &DMatrix<f64>, b: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let bt_p = b.transpose() * p;
    let s = r + &bt_p * b;
    let rhs = &bt_p * a;
    s.lu().solve(&rhs).map(|x| -x)
}

/// Frobenius norm of the DARE left-hand side at `p`.
pub fn dare_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    let at = a.transpose();
    let at_p = &at * p;
    let at_p_b = &at_p * b;
    let s = r + b.transpose() * p * b;
    let correction = match s.lu().solve(&at_p_b.transpose()) {
        Some(x) => &at_p_b * x,
        None => return f64::INFINITY,
    };
    (&at_p * a - p - correction + q).norm()
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Solves the DARE for `(A, B, Q, R)`.
///
/// `tol` bounds the relative Frobenius change of the `H` iterate between
/// doubling steps. The returned residual is the unnormalized Frobenius norm.
pub fn solve_dare_dense(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DareSolution, DareError> {
    check_dims(a, b, q, r)?;
    let n = a.nrows();
    if q.iter().chain(r.iter()).any(|x| !x.is_finite()) {
        return Err(DareError::Weights("non-finite entry".into()));
    }
    let r_chol = r.clone().cholesky().ok_or_else(|| DareError::Weights("R is not positive definite".into()))?;

    let ident = DMatrix::<f64>::identity(n, n);
    let mut ak = a.clone();
    let mut gk = b * r_chol.solve(&b.transpose());
    let mut hk = q.clone();
    let mut last_step = f64::INFINITY;

    for iter in 1..=max_iter {
        let w = &ident + &gk * &hk;
        let lu = w.lu();
        let w_inv_a = lu.solve(&ak).ok_or(DareError::Singular(iter))?;
        let w_inv_g = lu.solve(&gk).ok_or(DareError::Singular(iter))?;
        let at = ak.transpose();

        let a_next = &ak * &w_inv_a;
        let g_next = &gk + &ak * w_inv_g * &at;
        let h_next = &hk + &at * &hk * &w_inv_a;

        // keep the symmetric iterates symmetric
        let g_next = (&g_next + g_next.transpose()) * 0.5;
        let h_next = (&h_next + h_next.transpose()) * 0.5;

        if h_next.iter().any(|x| !x.is_finite()) {
            return Err(DareError::NoConvergence { max_iter: iter, last_step });
        }
        last_step = (&h_next - &hk).norm() / h_next.norm().max(1.0);
        ak = a_next;
        gk = g_next;
        hk = h_next;

        if last_step <= tol {
            let k = feedback_gain(a, b, r, &hk).ok_or(DareError::Singular(iter))?;
            let residual = dare_residual(a, b, q, r, &hk);
            return Ok(DareSolution { p: hk, k, residual, iterations: iter });
        }
    }
    Err(DareError::NoConvergence { max_iter, last_step })
}
