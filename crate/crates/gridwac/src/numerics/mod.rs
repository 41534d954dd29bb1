//! Dense linear-algebra and robust-control kernels.
//!
//! Everything here is a pure function over nalgebra matrices. Tolerances
//! live in [`NumericsConfig`]; the defaults are the values the rest of the
//! crate is tested against.

mod care;
mod eig;
mod hinf;
mod newton;
mod orth;
mod sign;

pub use care::{care_residual, solve_care, solve_lyapunov, CareProblem};
pub use eig::{
    eigenvalues, finite_generalized_eigenvalues, max_sym_eigenvalue, min_sym_eigenvalue, spectral_abscissa,
};
pub use hinf::{hinf_norm, sigma_max_at};
pub use newton::{fd_jacobian, newton_solve, NewtonOptions, NewtonResult};
pub use orth::orth_complement;
pub use sign::matrix_sign;

use thiserror::Error;

/// Centralized tolerances for the numerical kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericsConfig {
    /// Relative Frobenius step that ends the sign iteration.
    pub sign_tol: f64,
    /// Iteration cap for the sign iteration.
    pub sign_max_iter: usize,
    /// Relative CARE residual accepted after refinement.
    pub care_tol: f64,
    /// Newton refinement sweeps applied after the sign solve.
    pub care_refine_steps: usize,
    /// Relative bracket width at which H∞ bisection stops.
    pub hinf_rel_tol: f64,
    /// Iteration cap for the shifted-QR eigenvalue solver.
    pub qr_max_iter: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            sign_tol: 1e-12,
            sign_max_iter: 100,
            care_tol: 1e-8,
            care_refine_steps: 4,
            hinf_rel_tol: 1e-6,
            qr_max_iter: 10_000,
        }
    }
}

/// Failures of the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix is singular or has eigenvalues on the imaginary axis")]
    Singular,
    #[error("sign iteration stagnated after {0} iterations")]
    SignStagnation(usize),
    #[error("R is not positive definite")]
    IndefiniteR,
    #[error("no stabilizing CARE solution (closed-loop abscissa {0:e})")]
    NotStabilizing(f64),
    #[error("CARE residual {0:e} above tolerance")]
    CareResidual(f64),
    #[error("shifted QR did not converge")]
    QrNonConvergence,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("null space has dimension {found}, expected {expected}")]
    RankMismatch { expected: usize, found: usize },
    #[error("Lyapunov operator is not stable")]
    UnstableLyapunov,
    #[error("Newton iteration stopped with residual {0:e}")]
    NonConvergence(f64),
}

pub(crate) fn inv_logdet(m: &crate::Mat) -> Option<(crate::Mat, f64)> {
    let lu = m.clone().lu();
    let u = lu.u();
    let mut logdet = 0.0;
    for i in 0..u.nrows() {
        let d = u[(i, i)].abs();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        logdet += d.ln();
    }
    let inv = lu.try_inverse()?;
    if inv.iter().all(|v| v.is_finite()) {
        Some((inv, logdet))
    } else {
        None
    }
}

pub(crate) fn symmetrize(m: &mut crate::Mat) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
