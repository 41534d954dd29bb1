use super::{eigenvalues, spectral_abscissa, NumericsConfig, NumericsError};
use crate::{Complex64, Mat};
use nalgebra::DMatrix;

/// Largest singular value of `C (jωI − A)⁻¹ B + D`.
pub fn sigma_max_at(a: &Mat, b: &Mat, c: &Mat, d: &Mat, omega: f64) -> f64 {
    let n = a.nrows();
    let to_c = |m: &Mat| m.map(|v| Complex64::new(v, 0.0));
    let g = if n == 0 {
        to_c(d)
    } else {
        let mut m: DMatrix<Complex64> = -to_c(a);
        for i in 0..n {
            m[(i, i)] += Complex64::new(0.0, omega);
        }
        match m.lu().solve(&to_c(b)) {
            Some(x) => to_c(c) * x + to_c(d),
            None => return f64::INFINITY,
        }
    };
    if g.nrows() == 0 || g.ncols() == 0 {
        return 0.0;
    }
    g.singular_values().max()
}

fn sigma_max_real(m: &Mat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        0.0
    } else {
        m.singular_values().max()
    }
}

// Frequencies where the Hamiltonian at level γ has (numerically)
// imaginary eigenvalues.
fn crossings(a: &Mat, b: &Mat, c: &Mat, d: &Mat, gamma: f64, cfg: &NumericsConfig) -> Option<Vec<f64>> {
    let n = a.nrows();
    let m = b.ncols();
    let p = c.nrows();
    let r = Mat::identity(m, m) * (gamma * gamma) - d.transpose() * d;
    let chol = r.cholesky()?;
    let rinv = chol.inverse();
    let ah = a + b * &rinv * d.transpose() * c;
    let mut h = Mat::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&ah);
    h.view_mut((0, n), (n, n)).copy_from(&(b * &rinv * b.transpose()));
    let inner = Mat::identity(p, p) + d * &rinv * d.transpose();
    h.view_mut((n, 0), (n, n)).copy_from(&(-(c.transpose() * inner * c)));
    h.view_mut((n, n), (n, n)).copy_from(&(-ah.transpose()));
    let eigs = eigenvalues(&h, cfg).ok()?;
    let scale = h.norm().max(1.0);
    let mut ws: Vec<f64> = eigs
        .iter()
        .filter(|z| z.re.abs() <= 1e-7 * (scale + z.norm()))
        .map(|z| z.im.abs())
        .collect();
    ws.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ws.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));
    Some(ws)
}

/// H∞ norm of `(A, B, C, D)` by bisection on γ with the Hamiltonian
/// imaginary-axis test. Unstable or marginal `A` gives `f64::INFINITY`.
///
/// Each positive test raises the lower bound to the largest σ found on the
/// crossing frequencies and their midpoints, so the bracket always holds
/// the true norm.
pub fn hinf_norm(a: &Mat, b: &Mat, c: &Mat, d: &Mat, cfg: &NumericsConfig) -> Result<f64, NumericsError> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || c.ncols() != n || d.shape() != (c.nrows(), b.ncols()) {
        return Err(NumericsError::Dimension("hinf_norm blocks have inconsistent shapes".into()));
    }
    let dnorm = sigma_max_real(d);
    if n == 0 {
        return Ok(dnorm);
    }
    let alpha = spectral_abscissa(a, cfg)?;
    if !(alpha < 0.0) {
        return Ok(f64::INFINITY);
    }
    let eigs = eigenvalues(a, cfg)?;
    let mut freqs: Vec<f64> = vec![0.0];
    let mut wmin = f64::INFINITY;
    let mut wmax: f64 = 0.0;
    for z in &eigs {
        freqs.push(z.im.abs());
        freqs.push(z.norm());
        wmin = wmin.min(z.norm());
        wmax = wmax.max(z.norm());
    }
    let (l0, l1) = ((wmin * 0.1).max(1e-6).log10(), (wmax * 10.0).max(1e-5).log10());
    for k in 0..=40 {
        freqs.push(10f64.powf(l0 + (l1 - l0) * k as f64 / 40.0));
    }
    let mut lo = dnorm;
    for &w in &freqs {
        lo = lo.max(sigma_max_at(a, b, c, d, w));
    }
    if lo == 0.0 {
        return Ok(0.0);
    }
    if !lo.is_finite() {
        return Ok(f64::INFINITY);
    }

    // Returns the best σ found near the crossings, if it beats gamma.
    let probe = |gamma: f64| -> Option<f64> {
        let ws = crossings(a, b, c, d, gamma, cfg)?;
        if ws.is_empty() {
            return None;
        }
        let mut cands = ws.clone();
        for pair in ws.windows(2) {
            cands.push(0.5 * (pair[0] + pair[1]));
        }
        let best = cands
            .iter()
            .map(|&w| sigma_max_at(a, b, c, d, w))
            .fold(0.0, f64::max);
        (best > gamma).then_some(best)
    };

    let mut hi = 2.0 * lo;
    for _ in 0..200 {
        match probe(hi) {
            Some(s) => {
                lo = lo.max(s);
                hi = 2.0 * lo;
            }
            None => break,
        }
    }
    for _ in 0..200 {
        if hi - lo <= cfg.hinf_rel_tol * lo {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match probe(mid) {
            Some(s) => lo = lo.max(s),
            None => hi = mid,
        }
    }
    // lo is attained on the imaginary axis, so it never overshoots.
    Ok(lo)
}
