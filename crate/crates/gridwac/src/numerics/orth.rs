use super::NumericsError;
use crate::Mat;

/// Orthonormal basis of the right null space of `e` (so `e · E⊥ = 0`).
///
/// A diagonal 0/1 matrix gets the canonical unit-vector basis in row
/// order; anything else goes through the SVD.
pub fn orth_complement(e: &Mat) -> Result<Mat, NumericsError> {
    let n = e.nrows();
    if e.ncols() != n {
        return Err(NumericsError::Dimension("orth_complement needs a square matrix".into()));
    }
    let diagonal01 = (0..n).all(|i| {
        (0..n).all(|j| {
            let v = e[(i, j)];
            if i == j {
                v == 0.0 || v == 1.0
            } else {
                v == 0.0
            }
        })
    });
    if diagonal01 {
        let zeros: Vec<usize> = (0..n).filter(|&i| e[(i, i)] == 0.0).collect();
        let mut perp = Mat::zeros(n, zeros.len());
        for (c, &i) in zeros.iter().enumerate() {
            perp[(i, c)] = 1.0;
        }
        return Ok(perp);
    }
    let svd = e.clone().svd(false, true);
    let v_t = svd.v_t.ok_or(NumericsError::Singular)?;
    let smax = svd.singular_values.max();
    let tol = (n as f64) * f64::EPSILON * smax.max(1.0);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    // nalgebra does not sort singular values, so pick the small ones.
    let idx: Vec<usize> = (0..n).filter(|&i| svd.singular_values[i] <= tol).collect();
    if idx.len() != n - rank {
        return Err(NumericsError::RankMismatch { expected: n - rank, found: idx.len() });
    }
    let mut perp = Mat::zeros(n, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        for r in 0..n {
            perp[(r, c)] = v_t[(i, r)];
        }
    }
    Ok(perp)
}
