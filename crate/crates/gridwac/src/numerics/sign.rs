use super::{inv_logdet, NumericsConfig, NumericsError};
use crate::Mat;

/// Matrix sign function by the scaled Newton iteration
/// `S <- (c S + (c S)^-1) / 2` with determinant scaling `c = |det S|^(-1/n)`.
///
/// Scaling is switched off once the iterates are close, which restores
/// quadratic convergence near the fixed point.
pub fn matrix_sign(m: &Mat, cfg: &NumericsConfig) -> Result<Mat, NumericsError> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(NumericsError::Dimension("matrix_sign needs a square matrix".into()));
    }
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let mut s = m.clone();
    let mut scale = true;
    for _ in 0..cfg.sign_max_iter {
        let (inv, logdet) = inv_logdet(&s).ok_or(NumericsError::Singular)?;
        let c = if scale { (-logdet / n as f64).exp() } else { 1.0 };
        let next = (&s * c + inv / c) * 0.5;
        let diff = (&next - &s).norm();
        let size = s.norm();
        s = next;
        if !diff.is_finite() {
            return Err(NumericsError::Singular);
        }
        if diff <= cfg.sign_tol * size {
            return Ok(s);
        }
        if diff <= 1e-2 * size {
            scale = false;
        }
    }
    Err(NumericsError::SignStagnation(cfg.sign_max_iter))
}
