use super::{NumericsConfig, NumericsError};
use crate::{Complex64, Mat};
use nalgebra::linalg::Schur;

/// Eigenvalues of a real square matrix from the real Schur form
/// (Hessenberg reduction followed by shifted QR).
pub fn eigenvalues(m: &Mat, cfg: &NumericsConfig) -> Result<Vec<Complex64>, NumericsError> {
    if m.nrows() != m.ncols() {
        return Err(NumericsError::Dimension("eigenvalues need a square matrix".into()));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(NumericsError::QrNonConvergence);
    }
    if let Some(schur) = Schur::try_new(m.clone(), f64::EPSILON, cfg.qr_max_iter) {
        return Ok(schur.complex_eigenvalues().iter().copied().collect());
    }
    let fm = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let ev = fm.eigenvalues().map_err(|_| NumericsError::QrNonConvergence)?;
    Ok(ev.into_iter().map(|z| Complex64::new(z.re, z.im)).collect())
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(m: &Mat, cfg: &NumericsConfig) -> Result<f64, NumericsError> {
    if m.nrows() == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(eigenvalues(m, cfg)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Largest eigenvalue of the symmetric part of `m`.
pub fn max_sym_eigenvalue(m: &Mat) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigen().eigenvalues.max()
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_sym_eigenvalue(m: &Mat) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigen().eigenvalues.min()
}

/// Finite eigenvalues of the pencil `(E, A)`, i.e. roots of `det(sE − A)`.
///
/// Uses the shift-invert map `μ = 1/(λ − σ)`: the finite spectrum comes
/// from the nonzero eigenvalues of `(A − σE)⁻¹E`, the infinite one maps to 0.
/// At most `rank(E)` values are returned.
pub fn finite_generalized_eigenvalues(e: &Mat, a: &Mat, cfg: &NumericsConfig) -> Result<Vec<Complex64>, NumericsError> {
    let n = a.nrows();
    if e.shape() != a.shape() || a.ncols() != n {
        return Err(NumericsError::Dimension("pencil matrices must be square and equal size".into()));
    }
    let rank = e.clone().svd(false, false).rank(1e-12 * e.amax().max(1.0));
    let scale = a.amax().max(1.0);
    let mut best: Option<Vec<Complex64>> = None;
    // Two shifts guard against σ landing on an eigenvalue.
    for sigma in [0.123_456_7 * scale, -0.765_432_1 * scale] {
        let Some(inv) = (a - e * sigma).lu().try_inverse() else { continue };
        let mut mu = eigenvalues(&(inv * e), cfg)?;
        mu.sort_by(|x, y| y.norm().total_cmp(&x.norm()));
        let top = mu.first().map_or(0.0, |z| z.norm());
        let lam: Vec<Complex64> = mu
            .into_iter()
            .take(rank)
            .filter(|z| z.norm() > 1e-13 * top)
            .map(|z| Complex64::new(sigma, 0.0) + z.inv())
            .collect();
        best = Some(lam);
        break;
    }
    best.ok_or(NumericsError::Singular)
}
