use super::NumericsError;
use crate::{Mat, Vector};

/// Settings for [`newton_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Max-norm residual at which the iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative central-difference step.
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 40, fd_step: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonResult {
    pub x: Vector,
    /// Max-norm residual at `x`.
    pub residual: f64,
    pub iterations: usize,
}

/// Central-difference Jacobian of `f` at `x`.
pub fn fd_jacobian(f: &dyn Fn(&Vector) -> Vector, x: &Vector, rel_step: f64) -> Mat {
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    let mut xp = x.clone();
    for j in 0..n {
        let h = rel_step * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let fp = f(&xp);
        xp[j] = x[j] - h;
        let fm = f(&xp);
        xp[j] = x[j];
        cols.push((fp - fm) / (2.0 * h));
    }
    Mat::from_columns(&cols)
}

/// Square nonlinear solve by Newton's method with a finite-difference
/// Jacobian and backtracking on the residual norm.
pub fn newton_solve(
    f: &dyn Fn(&Vector) -> Vector,
    x0: &Vector,
    opts: &NewtonOptions,
) -> Result<NewtonResult, NumericsError> {
    let mut x = x0.clone();
    let mut fx = f(&x);
    if fx.len() != x.len() {
        return Err(NumericsError::Dimension(format!("{} equations, {} unknowns", fx.len(), x.len())));
    }
    let norm = |v: &Vector| if v.iter().all(|z| z.is_finite()) { v.amax() } else { f64::INFINITY };
    let mut r = norm(&fx);
    for it in 0..opts.max_iter {
        if r <= opts.tol {
            return Ok(NewtonResult { x, residual: r, iterations: it });
        }
        let jac = fd_jacobian(f, &x, opts.fd_step);
        let dx = jac.lu().solve(&(-&fx)).ok_or(NumericsError::Singular)?;
        let mut t = 1.0;
        loop {
            let xn = &x + &dx * t;
            let fn_ = f(&xn);
            let rn = norm(&fn_);
            if rn < r || t < 1e-4 {
                x = xn;
                fx = fn_;
                r = rn;
                break;
            }
            t *= 0.5;
        }
    }
    if r <= opts.tol {
        Ok(NewtonResult { x, residual: r, iterations: opts.max_iter })
    } else {
        Err(NumericsError::NonConvergence(r))
    }
}
