use super::{DaeModel, NdaeError, OperatingPoint};
use crate::par::{map_indexed, Exec};
use crate::{Complex64, Mat, Vector};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Jacobians of the residual at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub a: Mat,
    pub b: Mat,
    pub b_w: Mat,
}

fn fd_step(v: f64) -> f64 {
    1e-6f64.max(1e-6 * v.abs())
}

/// Central-difference Jacobian of `f` with step `max(1e-6, 1e-6|x_j|)`,
/// columns evaluated under `exec`.
pub fn jacobian_fd<F>(f: F, x: &[f64], n_out: usize, exec: Exec) -> Result<Mat, NdaeError>
where
    F: Fn(&[f64]) -> Result<Vector, NdaeError> + Sync + Send,
{
    let cols = map_indexed(exec, x.len(), |j| -> Result<Vector, NdaeError> {
        let h = fd_step(x[j]);
        let mut xp = x.to_vec();
        xp[j] = x[j] + h;
        let fp = f(&xp)?;
        xp[j] = x[j] - h;
        let fm = f(&xp)?;
        Ok((fp - fm) / (2.0 * h))
    });
    let mut m = Mat::zeros(n_out, x.len());
    for (j, c) in cols.into_iter().enumerate() {
        let c = c?;
        if c.len() != n_out {
            return Err(NdaeError::Dimension(format!("column {j} has {} rows", c.len())));
        }
        m.set_column(j, &c);
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(NdaeError::NonFinite);
    }
    Ok(m)
}

/// Full-system Jacobians `∂F/∂x`, `∂F/∂u`, `∂F/∂w` at `point`.
pub fn linearize(model: &DaeModel, point: &OperatingPoint, exec: Exec) -> Result<Linearization, NdaeError> {
    let (x, u, w) = (point.x.as_slice(), point.u.as_slice(), point.w.as_slice());
    let n = model.layout.n();
    let a = jacobian_fd(|xv| model.residual(xv, u, w), x, n, exec)?;
    let b = jacobian_fd(|uv| model.residual(x, uv, w), u, n, exec)?;
    let b_w = jacobian_fd(|wv| model.residual(x, u, wv), w, n, exec)?;
    Ok(Linearization { a, b, b_w })
}

/// Descriptor system reduced onto the differential states.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub a: Mat,
    pub b: Mat,
    pub b_w: Mat,
    /// `A_da A_aa⁻¹`.
    pub gain: Mat,
    /// `A_aa⁻¹ [A_ad  B_a  B_wa]`, split by [`ReducedSystem::n_d`] etc.
    pub elim: Mat,
    pub n_d: usize,
    /// 2-norm condition number of `A_aa`.
    pub cond_aa: f64,
}

impl ReducedSystem {
    /// `C̃ = C_d − C_a A_aa⁻¹ A_ad`, `D̃ = D − C_a A_aa⁻¹ B_a`,
    /// `D̄_w = D_w − C_a A_aa⁻¹ B_wa`.
    pub fn reduce_output(&self, c: &Mat, d: &Mat, d_w: &Mat) -> (Mat, Mat, Mat) {
        let nd = self.n_d;
        let na = c.ncols() - nd;
        let (nu, nw) = (d.ncols(), d_w.ncols());
        let ca = c.columns(nd, na);
        let ct = c.columns(0, nd) - ca * self.elim.columns(0, nd);
        let dt = d - ca * self.elim.columns(nd, nu);
        let dwt = d_w - ca * self.elim.columns(nd + nu, nw);
        (ct, dt, dwt)
    }
}

/// Kron reduction of `(A, B, B_w)` with `n_d` differential states.
pub fn kron_reduce(a: &Mat, b: &Mat, b_w: &Mat, n_d: usize) -> Result<ReducedSystem, NdaeError> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b_w.nrows() != n || n_d > n {
        return Err(NdaeError::Dimension("kron_reduce: inconsistent shapes".into()));
    }
    let na = n - n_d;
    if na == 0 {
        let (nu, nw) = (b.ncols(), b_w.ncols());
        return Ok(ReducedSystem {
            a: a.clone(),
            b: b.clone(),
            b_w: b_w.clone(),
            gain: Mat::zeros(n_d, 0),
            elim: Mat::zeros(0, n_d + nu + nw),
            n_d,
            cond_aa: 1.0,
        });
    }
    let aaa = a.view((n_d, n_d), (na, na)).into_owned();
    let sv = aaa.clone().svd(false, false).singular_values;
    let cond_aa = sv.max() / sv.min();
    let mut rhs = Mat::zeros(na, n_d + b.ncols() + b_w.ncols());
    rhs.view_mut((0, 0), (na, n_d)).copy_from(&a.view((n_d, 0), (na, n_d)));
    rhs.view_mut((0, n_d), (na, b.ncols())).copy_from(&b.rows(n_d, na));
    rhs.view_mut((0, n_d + b.ncols()), (na, b_w.ncols())).copy_from(&b_w.rows(n_d, na));
    let lu = aaa.lu();
    if !cond_aa.is_finite() || cond_aa > 1e14 {
        return Err(NdaeError::SingularAlgebraic { cond: cond_aa });
    }
    let elim = lu.solve(&rhs).ok_or(NdaeError::SingularAlgebraic { cond: cond_aa })?;
    let ada = a.view((0, n_d), (n_d, na));
    let (nu, nw) = (b.ncols(), b_w.ncols());
    let ar = a.view((0, 0), (n_d, n_d)) - ada * elim.columns(0, n_d);
    let br = b.rows(0, n_d) - ada * elim.columns(n_d, nu);
    let bwr = b_w.rows(0, n_d) - ada * elim.columns(n_d + nu, nw);
    let gain = ada * lu.try_inverse().ok_or(NdaeError::SingularAlgebraic { cond: cond_aa })?;
    Ok(ReducedSystem { a: ar, b: br, b_w: bwr, gain, elim, n_d, cond_aa })
}

/// Outcome of the pencil regularity test.
#[derive(Debug, Clone, PartialEq)]
pub struct Regularity {
    pub regular: bool,
    /// Sample point with the best-conditioned `sE − A`.
    pub witness: Complex64,
    /// `log10` of the smallest relative LU pivot at the witness.
    pub log10_min_pivot: f64,
    pub samples: usize,
}

/// Probabilistic regularity test: `det(sE − A)` at random complex `s`.
///
/// A pencil is declared regular when some sample has all LU pivots above
/// `1e-13` relative to the matrix scale.
pub fn check_regularity(e: &Mat, a: &Mat, samples: usize, seed: u64) -> Regularity {
    let n = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = Regularity { regular: false, witness: Complex64::new(0.0, 0.0), log10_min_pivot: f64::NEG_INFINITY, samples };
    for _ in 0..samples.max(1) {
        let s = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| s * e[(i, j)] - a[(i, j)]);
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let lu = m.lu();
        let u = lu.u();
        let min_piv = (0..n).map(|i| u[(i, i)].norm()).fold(f64::INFINITY, f64::min);
        let rel = if scale > 0.0 { min_piv / scale } else { 0.0 };
        let l10 = if rel > 0.0 { rel.log10() } else { f64::NEG_INFINITY };
        if l10 > best.log10_min_pivot {
            best.witness = s;
            best.log10_min_pivot = l10;
        }
    }
    best.regular = best.log10_min_pivot > -13.0;
    best
}
