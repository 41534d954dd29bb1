//! H∞ state feedback on the descriptor model via a bounded-real LMI.
//!
//! With `S = XEᵀ + E⊥W = [[X₁₁, 0], [S₂₁, S₂₂]]` and `H = KS` the bound
//! `‖G_cl‖∞ < μ` holds when
//!
//! ```text
//! [ sym(AS + BH)   B̂_w    (CS + DH)ᵀ ]
//! [ B̂_wᵀ          −λI    D̂_wᵀ       ]  ≺ 0,   X₁₁ ≻ 0,   λ = μ².
//! [ CS + DH        D̂_w    −I         ]
//! ```
//!
//! Only `X₁₁` of `X` enters `S`, so the free blocks of `X` are dropped and
//! `S₂₁ = X₂₁ + W₁`, `S₂₂ = W₂` become the decision variables.

use super::{ControllerGain, DescriptorPlant, GainTag, Method, PerformanceWeights, SynthError};
use crate::ndae::check_regularity;
use crate::numerics::{max_sym_eigenvalue, orth_complement};
use crate::sdp::{solve_lmi, LmiBlock, LmiProblem, SdpOptions, SdpSolution, SdpStatus, VarSpec};
use crate::Mat;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HinfDaeOptions {
    /// Strictness margin for every `≺ 0` constraint.
    pub epsilon: f64,
    pub sdp: SdpOptions,
    pub regularity_samples: usize,
    /// Re-solves with `ε ← 10ε` when `S` comes out singular.
    pub retries: usize,
    /// Largest accepted 2-norm condition number of `S`.
    pub max_recovery_cond: f64,
}

impl Default for HinfDaeOptions {
    fn default() -> Self {
        Self { epsilon: 1e-7, sdp: SdpOptions::default(), regularity_samples: 8, retries: 2, max_recovery_cond: 1e12 }
    }
}

/// The assembled optimization problem and where each variable lives.
#[derive(Debug, Clone)]
pub struct BoundedRealLmi {
    pub problem: LmiProblem,
    pub x11: usize,
    pub s21: Option<usize>,
    pub s22: Option<usize>,
    pub h: usize,
    pub lambda: usize,
    pub n_d: usize,
    pub n_a: usize,
}

impl BoundedRealLmi {
    /// `S = [[X₁₁, 0], [S₂₁, S₂₂]]` from solver values.
    pub fn s_matrix(&self, vals: &[Mat]) -> Mat {
        let n = self.n_d + self.n_a;
        let mut s = Mat::zeros(n, n);
        s.view_mut((0, 0), (self.n_d, self.n_d)).copy_from(&vals[self.x11]);
        if let (Some(i21), Some(i22)) = (self.s21, self.s22) {
            s.view_mut((self.n_d, 0), (self.n_a, self.n_d)).copy_from(&vals[i21]);
            s.view_mut((self.n_d, self.n_d), (self.n_a, self.n_a)).copy_from(&vals[i22]);
        }
        s
    }
}

fn selector(rows: usize, offset: usize, len: usize) -> Mat {
    Mat::from_fn(rows, len, |i, j| if i == offset + j { 1.0 } else { 0.0 })
}

/// Build the bounded-real LMI together with `X₁₁ ⪰ εI` and `λ ≥ ε`; the
/// objective is `λ`.
pub fn build_bounded_real_lmi(plant: &DescriptorPlant, weights: &PerformanceWeights, epsilon: f64) -> Result<BoundedRealLmi, SynthError> {
    weights.validate(plant)?;
    let (n, nd, na, nu) = (plant.n(), plant.n_d, plant.n_a(), plant.n_u());
    let nw2 = 2 * plant.n_w();
    let size = n + nw2 + n;
    let j1 = selector(size, 0, n);
    let j2 = selector(size, n, nw2);
    let j3 = selector(size, n + nw2, n);
    let pd = selector(n, 0, nd);
    let pa = selector(n, nd, na);

    let mut vars = vec![VarSpec::symmetric(nd)];
    let x11 = 0;
    let (s21, s22) = if na > 0 {
        vars.push(VarSpec::general(na, nd));
        vars.push(VarSpec::general(na, na));
        (Some(1), Some(2))
    } else {
        (None, None)
    };
    let h = vars.len();
    vars.push(VarSpec::general(nu, n));
    let lambda = vars.len();
    vars.push(VarSpec::scalar());

    let bh = plant.b_hat();
    let dh = weights.d_hat(plant);
    let off = &j1 * &bh * j2.transpose() + &j2 * dh.transpose() * j3.transpose();
    let f0 = &off + off.transpose() - &j3 * j3.transpose();

    // Psi and the (3,1) block share the right factor, so each variable
    // appears once: sym((J₁A + J₃C) P V Qᵀ J₁ᵀ) and sym((J₁B + J₃D) H J₁ᵀ).
    let left_s = &j1 * &plant.a + &j3 * &weights.c;
    let left_h = &j1 * &plant.b + &j3 * &weights.d;
    let mut main = LmiBlock::new(f0).with_margin(epsilon);
    main.term(x11, &left_s * &pd, pd.transpose() * j1.transpose());
    if let (Some(i21), Some(i22)) = (s21, s22) {
        main.term(i21, &left_s * &pa, pd.transpose() * j1.transpose());
        main.term(i22, &left_s * &pa, pa.transpose() * j1.transpose());
    }
    main.term(h, left_h, j1.transpose());
    main.scalar_identity(lambda, n, nw2, -1.0);

    let mut pos = LmiBlock::zeros(nd).with_margin(epsilon);
    pos.term(x11, Mat::identity(nd, nd) * -0.5, Mat::identity(nd, nd));
    let mut lam = LmiBlock::zeros(1).with_margin(epsilon);
    lam.term(lambda, Mat::from_element(1, 1, -0.5), Mat::identity(1, 1));

    let mut problem = LmiProblem::new(vars);
    problem.blocks = vec![main, pos, lam];
    problem.objective[lambda][(0, 0)] = 1.0;
    Ok(BoundedRealLmi { problem, x11, s21, s22, h, lambda, n_d: nd, n_a: na })
}

/// The bounded-real block matrix evaluated directly from its definition.
pub fn bounded_real_matrix(plant: &DescriptorPlant, weights: &PerformanceWeights, s: &Mat, h: &Mat, lambda: f64) -> Mat {
    let n = plant.n();
    let nw2 = 2 * plant.n_w();
    let size = 2 * n + nw2;
    let ash = &plant.a * s + &plant.b * h;
    let psi = &ash + ash.transpose();
    let z = &weights.c * s + &weights.d * h;
    let bh = plant.b_hat();
    let dh = weights.d_hat(plant);
    let mut m = Mat::zeros(size, size);
    m.view_mut((0, 0), (n, n)).copy_from(&psi);
    m.view_mut((0, n), (n, nw2)).copy_from(&bh);
    m.view_mut((n, 0), (nw2, n)).copy_from(&bh.transpose());
    m.view_mut((0, n + nw2), (n, n)).copy_from(&z.transpose());
    m.view_mut((n + nw2, 0), (n, n)).copy_from(&z);
    m.view_mut((n, n), (nw2, nw2)).copy_from(&(Mat::identity(nw2, nw2) * -lambda));
    m.view_mut((n, n + nw2), (nw2, n)).copy_from(&dh.transpose());
    m.view_mut((n + nw2, n), (n, nw2)).copy_from(&dh);
    m.view_mut((n + nw2, n + nw2), (n, n)).copy_from(&(-Mat::identity(n, n)));
    m
}

/// `S = XEᵀ + E⊥W` for square `X` and `W` with `n − rank(E)` rows.
pub fn recovery_matrix(x: &Mat, w: &Mat, e: &Mat) -> Result<Mat, SynthError> {
    let perp = orth_complement(e)?;
    Ok(x * e.transpose() + perp * w)
}

/// Result of the descriptor H∞ synthesis.
#[derive(Debug, Clone)]
pub struct HinfDaeDesign {
    pub gain: ControllerGain,
    pub lambda: f64,
    pub x11: Mat,
    pub s: Mat,
    pub h: Mat,
    /// Largest eigenvalue of the bounded-real block at the solution.
    pub lmi_max_eig: f64,
    /// 2-norm condition number of `S`.
    pub recovery_cond: f64,
    pub epsilon: f64,
    pub sdp: SdpSolution,
}

fn cond2(m: &Mat) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let (mx, mn) = (sv.max(), sv.min());
    if mn > 0.0 { mx / mn } else { f64::INFINITY }
}

pub fn synth_hinf_dae(
    plant: &DescriptorPlant,
    weights: &PerformanceWeights,
    opts: &HinfDaeOptions,
) -> Result<HinfDaeDesign, SynthError> {
    let start = Instant::now();
    weights.validate(plant)?;
    if !check_regularity(&plant.e(), &plant.a, opts.regularity_samples, 7).regular {
        return Err(SynthError::Irregular);
    }
    let mut epsilon = opts.epsilon;
    let mut last_cond = f64::INFINITY;
    for _ in 0..=opts.retries {
        let lmi = build_bounded_real_lmi(plant, weights, epsilon)?;
        let sol = solve_lmi(&lmi.problem, &opts.sdp)?;
        // A strictly feasible point certifies `μ = √λ` even when the
        // duality gap has not closed.
        let certified = sol.dual_infeas <= opts.sdp.feas_tol && sol.max_eig <= opts.sdp.eig_bound;
        match sol.status {
            SdpStatus::Optimal => {}
            SdpStatus::MaxIter if certified => {}
            SdpStatus::Infeasible => return Err(SynthError::Infeasible("Farkas certificate found".into())),
            SdpStatus::MaxIter => {
                return Err(SynthError::Infeasible(format!(
                    "no strictly feasible point after {} iterations (gap {:.2e}, max eigenvalue {:.2e})",
                    sol.iterations, sol.gap, sol.max_eig
                )))
            }
        }
        let s = lmi.s_matrix(&sol.vars);
        let h = sol.vars[lmi.h].clone();
        let lambda = sol.vars[lmi.lambda][(0, 0)];
        let cond = cond2(&s);
        last_cond = cond;
        if !(cond <= opts.max_recovery_cond) {
            epsilon *= 10.0;
            continue;
        }
        let kt = s.transpose().lu().solve(&h.transpose()).ok_or(SynthError::SingularRecovery { cond })?;
        let k = kt.transpose();
        let lmi_max_eig = max_sym_eigenvalue(&bounded_real_matrix(plant, weights, &s, &h, lambda));
        let gain = ControllerGain {
            k,
            method: Method::HinfDae,
            tag: GainTag::Nominal,
            mu: Some(lambda.sqrt()),
            weights_hash: weights.content_hash(),
            linear_hash: plant.linear_hash(),
            case_hash: None,
            n_d: plant.n_d,
            seconds: start.elapsed().as_secs_f64(),
        };
        return Ok(HinfDaeDesign {
            gain,
            lambda,
            x11: sol.vars[lmi.x11].clone(),
            s,
            h,
            lmi_max_eig,
            recovery_cond: cond,
            epsilon,
            sdp: sol,
        });
    }
    Err(SynthError::SingularRecovery { cond: last_cond })
}
