//! Dense primal-dual interior-point solver for linear matrix inequalities.
//!
//! A problem is a list of matrix decision variables `V_k` and a list of
//! constraint blocks, each of the form
//!
//! ```text
//! F_j(V) = F0_j + Σ_t sym(L_t V_{k(t)} R_t) ⪯ 0,     sym(M) = M + Mᵀ,
//! ```
//!
//! minimizing `Σ_k ⟨C_k, V_k⟩`. Symmetric variables are vectorized with
//! the scaled half-vector convention: the coordinate of an off-diagonal
//! pair `(a, b)`, `a < b`, is `√2 V_ab`, so the basis matrix is
//! `(E_ab + E_ba)/√2`. General variables use row-major full coordinates.
//!
//! Internally the problem is the SDPA dual form `max bᵀy` subject to
//! `Z = C − Σ y_i A_i ⪰ 0` with `C = −F0`, `A_i = F_i` and `b = −c`.

mod ipm;
mod schur;

pub use ipm::solve_lmi;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("inconsistent problem: {0}")]
    Dimension(String),
}

use crate::par::Exec;
use crate::Mat;
use serde::{Deserialize, Serialize};

/// Shape of a decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarSpec {
    pub rows: usize,
    pub cols: usize,
    pub symmetric: bool,
}

impl VarSpec {
    pub fn symmetric(n: usize) -> Self {
        Self { rows: n, cols: n, symmetric: true }
    }

    pub fn general(rows: usize, cols: usize) -> Self {
        Self { rows, cols, symmetric: false }
    }

    pub fn scalar() -> Self {
        Self::symmetric(1)
    }

    /// Number of scalar coordinates.
    pub fn dim(&self) -> usize {
        if self.symmetric {
            self.rows * (self.rows + 1) / 2
        } else {
            self.rows * self.cols
        }
    }
}

/// One affine term `sym(L V R)` of a constraint block.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub var: usize,
    pub l: Mat,
    pub r: Mat,
}

/// Default strictness margin for `≺ 0` constraints.
pub const DEFAULT_MARGIN: f64 = 1e-7;

/// Strict constraint `F0 + Σ sym(L V R) ≺ 0`, enforced as `⪯ −margin·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub size: usize,
    pub f0: Mat,
    pub terms: Vec<Term>,
    pub margin: f64,
}

impl LmiBlock {
    pub fn new(f0: Mat) -> Self {
        Self { size: f0.nrows(), f0, terms: Vec::new(), margin: DEFAULT_MARGIN }
    }

    pub fn zeros(size: usize) -> Self {
        Self::new(Mat::zeros(size, size))
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    /// Add `sym(L V R)`.
    pub fn term(&mut self, var: usize, l: Mat, r: Mat) -> &mut Self {
        self.terms.push(Term { var, l, r });
        self
    }

    /// Add `coef · V · I` on the diagonal sub-block starting at `offset`
    /// (for a scalar variable `V`), written as rank-one terms.
    pub fn scalar_identity(&mut self, var: usize, offset: usize, len: usize, coef: f64) -> &mut Self {
        for i in 0..len {
            let mut l = Mat::zeros(self.size, 1);
            l[(offset + i, 0)] = 0.5 * coef;
            let mut r = Mat::zeros(1, self.size);
            r[(0, offset + i)] = 1.0;
            self.terms.push(Term { var, l, r });
        }
        self
    }
}

/// A linear objective over matrix variables subject to LMI blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem {
    pub vars: Vec<VarSpec>,
    pub blocks: Vec<LmiBlock>,
    /// Objective coefficient per variable, same shape as the variable.
    pub objective: Vec<Mat>,
}

impl LmiProblem {
    pub fn new(vars: Vec<VarSpec>) -> Self {
        let objective = vars.iter().map(|v| Mat::zeros(v.rows, v.cols)).collect();
        Self { vars, blocks: Vec::new(), objective }
    }

    pub fn n_coords(&self) -> usize {
        self.vars.iter().map(|v| v.dim()).sum()
    }

    pub(crate) fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.vars.len() + 1);
        let mut acc = 0;
        for v in &self.vars {
            off.push(acc);
            acc += v.dim();
        }
        off.push(acc);
        off
    }

    /// Variable values from a coordinate vector.
    pub fn unpack(&self, y: &[f64]) -> Vec<Mat> {
        let off = self.offsets();
        self.vars
            .iter()
            .enumerate()
            .map(|(k, v)| unpack_var(v, &y[off[k]..off[k + 1]]))
            .collect()
    }

    /// Coordinate vector from variable values (symmetric parts are averaged).
    pub fn pack(&self, vals: &[Mat]) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.n_coords());
        for (v, m) in self.vars.iter().zip(vals) {
            pack_var(v, m, &mut y);
        }
        y
    }

    /// Evaluate every block `F_j(V)` (without the margin).
    pub fn evaluate(&self, vals: &[Mat]) -> Vec<Mat> {
        self.blocks
            .iter()
            .map(|b| {
                let mut f = b.f0.clone();
                for t in &b.terms {
                    let lvr = &t.l * &vals[t.var] * &t.r;
                    f += &lvr + lvr.transpose();
                }
                f
            })
            .collect()
    }

    /// Objective value at `vals`.
    pub fn objective_value(&self, vals: &[Mat]) -> f64 {
        self.objective.iter().zip(vals).map(|(c, v)| c.dot(v)).sum()
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        if self.objective.len() != self.vars.len() {
            return Err("objective count differs from variable count".into());
        }
        for (k, (v, c)) in self.vars.iter().zip(&self.objective).enumerate() {
            if c.shape() != (v.rows, v.cols) {
                return Err(format!("objective {k} has shape {:?}", c.shape()));
            }
            if v.symmetric && v.rows != v.cols {
                return Err(format!("symmetric variable {k} is not square"));
            }
        }
        for (j, b) in self.blocks.iter().enumerate() {
            if !(b.margin >= 0.0) || !b.margin.is_finite() {
                return Err(format!("block {j}: margin {} is not a finite nonnegative number", b.margin));
            }
            if b.f0.shape() != (b.size, b.size) {
                return Err(format!("block {j}: F0 shape {:?}", b.f0.shape()));
            }
            for t in &b.terms {
                let v = self.vars.get(t.var).ok_or(format!("block {j}: unknown variable {}", t.var))?;
                if t.l.shape() != (b.size, v.rows) || t.r.shape() != (v.cols, b.size) {
                    return Err(format!("block {j}: term on variable {} has mismatched L/R", t.var));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn unpack_var(v: &VarSpec, y: &[f64]) -> Mat {
    let mut m = Mat::zeros(v.rows, v.cols);
    if v.symmetric {
        let mut k = 0;
        for a in 0..v.rows {
            for b in a..v.rows {
                if a == b {
                    m[(a, a)] = y[k];
                } else {
                    let val = y[k] / std::f64::consts::SQRT_2;
                    m[(a, b)] = val;
                    m[(b, a)] = val;
                }
                k += 1;
            }
        }
    } else {
        for a in 0..v.rows {
            for b in 0..v.cols {
                m[(a, b)] = y[a * v.cols + b];
            }
        }
    }
    m
}

pub(crate) fn pack_var(v: &VarSpec, m: &Mat, out: &mut Vec<f64>) {
    if v.symmetric {
        for a in 0..v.rows {
            for b in a..v.rows {
                if a == b {
                    out.push(m[(a, a)]);
                } else {
                    out.push(std::f64::consts::SQRT_2 * 0.5 * (m[(a, b)] + m[(b, a)]));
                }
            }
        }
    } else {
        for a in 0..v.rows {
            for b in 0..v.cols {
                out.push(m[(a, b)]);
            }
        }
    }
}

/// Solver status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    pub max_iter: usize,
    /// Relative duality gap at termination.
    pub gap_tol: f64,
    /// Relative primal and dual residuals at termination.
    pub feas_tol: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// Largest eigenvalue the evaluated constraint may have for `Optimal`.
    pub eig_bound: f64,
    pub exec: Exec,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { max_iter: 100, gap_tol: 1e-8, feas_tol: 1e-8, step_fraction: 0.95, eig_bound: -1e-9, exec: Exec::default() }
    }
}

/// Result of [`solve_lmi`].
#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub vars: Vec<Mat>,
    pub objective: f64,
    /// Largest eigenvalue over all evaluated blocks `F_j(V)`, margin excluded.
    pub max_eig: f64,
    /// `|⟨C, X⟩ − bᵀy| / (1 + |⟨C, X⟩| + |bᵀy|)`.
    pub gap: f64,
    /// Relative `‖b − 𝒜(X)‖`.
    pub primal_infeas: f64,
    /// Relative `‖C − Z − 𝒜*(y)‖`.
    pub dual_infeas: f64,
    /// Complementarity `⟨X, Z⟩`.
    pub complementarity: f64,
    pub iterations: usize,
    /// Objective after every accepted iterate.
    pub trace: Vec<f64>,
    /// Dual certificate (the SDPA primal matrix) per block.
    pub multipliers: Vec<Mat>,
}
