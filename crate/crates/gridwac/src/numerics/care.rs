use super::{inv_logdet, matrix_sign, spectral_abscissa, symmetrize, NumericsConfig, NumericsError};
use crate::Mat;

/// CARE data for `AᵀP + PA + PGP − (PB + S)R⁻¹(BᵀP + Sᵀ) + Q = 0`.
#[derive(Debug, Clone)]
pub struct CareProblem {
    pub a: Mat,
    pub b: Mat,
    pub q: Mat,
    pub r: Mat,
    pub s: Mat,
    pub g: Mat,
}

impl CareProblem {
    /// Standard LQ-type problem with zero cross term and no G term.
    pub fn lq(a: Mat, b: Mat, q: Mat, r: Mat) -> Self {
        let n = a.nrows();
        let m = b.ncols();
        Self { a, b, q, r, s: Mat::zeros(n, m), g: Mat::zeros(n, n) }
    }

    fn check(&self) -> Result<(), NumericsError> {
        let n = self.a.nrows();
        let m = self.b.ncols();
        let ok = self.a.ncols() == n
            && self.b.nrows() == n
            && self.q.shape() == (n, n)
            && self.r.shape() == (m, m)
            && self.s.shape() == (n, m)
            && self.g.shape() == (n, n);
        if ok {
            Ok(())
        } else {
            Err(NumericsError::Dimension("CARE blocks have inconsistent shapes".into()))
        }
    }

    // (A0, N, Q0) of the equivalent form A0ᵀP + PA0 − PNP + Q0 = 0.
    fn reduced(&self) -> Result<(Mat, Mat, Mat, Mat), NumericsError> {
        let chol = self.r.clone().cholesky().ok_or(NumericsError::IndefiniteR)?;
        let rinv = chol.inverse();
        let a0 = &self.a - &self.b * &rinv * self.s.transpose();
        let mut nmat = &self.b * &rinv * self.b.transpose() - &self.g;
        let mut q0 = &self.q - &self.s * &rinv * self.s.transpose();
        symmetrize(&mut nmat);
        symmetrize(&mut q0);
        Ok((a0, nmat, q0, rinv))
    }

    /// Feedback gain `K = −R⁻¹(BᵀP + Sᵀ)` associated with `p`.
    pub fn gain(&self, p: &Mat) -> Result<Mat, NumericsError> {
        let chol = self.r.clone().cholesky().ok_or(NumericsError::IndefiniteR)?;
        Ok(-chol.solve(&(self.b.transpose() * p + self.s.transpose())))
    }

    /// Closed-loop matrix `A + GP + BK` whose stability defines the
    /// stabilizing solution.
    pub fn closed_loop(&self, p: &Mat) -> Result<Mat, NumericsError> {
        let k = self.gain(p)?;
        Ok(&self.a + &self.g * p + &self.b * k)
    }
}

/// Frobenius norm of the CARE residual at `p`.
pub fn care_residual(problem: &CareProblem, p: &Mat) -> f64 {
    match problem.reduced() {
        Ok((a0, nmat, q0, _)) => residual_matrix(&a0, &nmat, &q0, p).norm(),
        Err(_) => f64::INFINITY,
    }
}

fn residual_matrix(a0: &Mat, nmat: &Mat, q0: &Mat, p: &Mat) -> Mat {
    let ap = a0.transpose() * p;
    let mut r = &ap + ap.transpose() - p * nmat * p + q0;
    symmetrize(&mut r);
    r
}

/// Stabilizing solution of the CARE via the sign function of the
/// Hamiltonian, followed by Newton refinement sweeps.
pub fn solve_care(problem: &CareProblem, cfg: &NumericsConfig) -> Result<Mat, NumericsError> {
    problem.check()?;
    let n = problem.a.nrows();
    let (a0, nmat, q0, _) = problem.reduced()?;

    let mut h = Mat::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a0);
    h.view_mut((0, n), (n, n)).copy_from(&(-&nmat));
    h.view_mut((n, 0), (n, n)).copy_from(&(-&q0));
    h.view_mut((n, n), (n, n)).copy_from(&(-a0.transpose()));
    let w = matrix_sign(&h, cfg)?;

    let eye = Mat::identity(n, n);
    let mut lhs = Mat::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w.view((n, n), (n, n)) + &eye));
    let mut rhs = Mat::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w.view((0, 0), (n, n)) + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w.view((n, 0), (n, n))));
    let mut p = lhs
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|_| NumericsError::Singular)?;
    symmetrize(&mut p);

    let scale = |p: &Mat| 1.0 + p.norm();
    let mut res = residual_matrix(&a0, &nmat, &q0, &p);
    for _ in 0..cfg.care_refine_steps {
        if res.norm() <= 1e-3 * cfg.care_tol * scale(&p) {
            break;
        }
        let ac = &a0 - &nmat * &p;
        let delta = match solve_lyapunov(&ac, &res, cfg) {
            Ok(d) => d,
            Err(_) => break,
        };
        let mut cand = &p + delta;
        symmetrize(&mut cand);
        let cand_res = residual_matrix(&a0, &nmat, &q0, &cand);
        if cand_res.norm() < res.norm() {
            p = cand;
            res = cand_res;
        } else {
            break;
        }
    }

    let alpha = spectral_abscissa(&(&a0 - &nmat * &p), cfg)?;
    if !(alpha < 0.0) {
        return Err(NumericsError::NotStabilizing(alpha));
    }
    let r = res.norm();
    if !(r <= cfg.care_tol * scale(&p)) {
        return Err(NumericsError::CareResidual(r));
    }
    Ok(p)
}

/// Solves `AᵀX + XA + Q = 0` for a Hurwitz `A` using the sign iteration
/// on `[[A, 0], [Q, −Aᵀ]]`, whose limit is `[[−I, 0], [2X, I]]`.
pub fn solve_lyapunov(a: &Mat, q: &Mat, cfg: &NumericsConfig) -> Result<Mat, NumericsError> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(NumericsError::Dimension("Lyapunov blocks have inconsistent shapes".into()));
    }
    let mut ak = a.clone();
    let mut qk = q.clone();
    let eye = Mat::identity(n, n);
    let mut scale = true;
    for _ in 0..cfg.sign_max_iter {
        let (inv, logdet) = inv_logdet(&ak).ok_or(NumericsError::Singular)?;
        let c = if scale { (-logdet / n as f64).exp() } else { 1.0 };
        let a_next = (&ak * c + &inv / c) * 0.5;
        qk = (&qk * c + inv.transpose() * &qk * &inv / c) * 0.5;
        let diff = (&a_next - &ak).norm();
        let size = ak.norm();
        ak = a_next;
        if !diff.is_finite() {
            return Err(NumericsError::Singular);
        }
        if diff <= cfg.sign_tol * size {
            if (&ak + &eye).norm() > 1e-6 * (n as f64).sqrt() {
                return Err(NumericsError::UnstableLyapunov);
            }
            let mut x = qk * 0.5;
            symmetrize(&mut x);
            return Ok(x);
        }
        if diff <= 1e-2 * size {
            scale = false;
        }
    }
    Err(NumericsError::SignStagnation(cfg.sign_max_iter))
}
