//! Infeasible-start Mehrotra predictor-corrector with the HKM direction.

use super::schur::Operator;
use super::{LmiProblem, SdpError, SdpOptions, SdpSolution, SdpStatus};
use crate::Mat;
use faer::linalg::solvers::Solve;
use faer::Side;

fn inner(a: &[Mat], b: &[Mat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn frob(a: &[Mat]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

fn inverse_spd(m: &Mat) -> Option<Mat> {
    let ch = m.clone().cholesky()?;
    Some(ch.inverse())
}

/// Largest `α ≤ 1/γ·1` with `X + α dX ⪰ 0`, scaled by `γ`.
fn step_length(x: &[Mat], dx: &[Mat], gamma: f64) -> f64 {
    let mut amax = f64::INFINITY;
    for (xm, dm) in x.iter().zip(dx) {
        let Some(ch) = xm.clone().cholesky() else {
            return 0.0;
        };
        let l = ch.l();
        let Some(s) = l.solve_lower_triangular(dm) else {
            return 0.0;
        };
        let Some(s) = l.solve_lower_triangular(&s.transpose()) else {
            return 0.0;
        };
        let lmin = symmetrize(&s).symmetric_eigenvalues().min();
        if lmin < 0.0 {
            amax = amax.min(-1.0 / lmin);
        }
    }
    (gamma * amax).min(1.0)
}

/// Dense symmetric factorization of the Schur complement.
enum Factor {
    Llt(faer::linalg::solvers::Llt<f64>),
    Lu(faer::linalg::solvers::PartialPivLu<f64>),
}

impl Factor {
    fn new(m: &Mat) -> Self {
        let n = m.nrows();
        let fm = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
        if let Ok(l) = fm.llt(Side::Lower) {
            return Factor::Llt(l);
        }
        let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let reg = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)] + if i == j { 1e-12 * scale } else { 0.0 });
        match reg.llt(Side::Lower) {
            Ok(l) => Factor::Llt(l),
            Err(_) => Factor::Lu(fm.partial_piv_lu()),
        }
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut b = faer::Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        match self {
            Factor::Llt(f) => f.solve_in_place(b.as_mut()),
            Factor::Lu(f) => f.solve_in_place(b.as_mut()),
        }
        (0..rhs.len()).map(|i| b[(i, 0)]).collect()
    }
}

const STALL_LIMIT: usize = 3;

struct State {
    x: Vec<Mat>,
    y: Vec<f64>,
    z: Vec<Mat>,
}

struct Direction {
    dx: Vec<Mat>,
    dy: Vec<f64>,
    dz: Vec<Mat>,
}

/// Solve `M dy = r_p − 𝒜(H)` and back-substitute, where
/// `H = target·Z⁻¹ − X − X R_d Z⁻¹ − corr·Z⁻¹`.
fn direction(
    op: &Operator,
    factor: &Factor,
    s: &State,
    g: &[Mat],
    rp: &[f64],
    rd: &[Mat],
    target: f64,
    corr: Option<&[Mat]>,
) -> Direction {
    let h: Vec<Mat> = (0..s.x.len())
        .map(|j| {
            let mut h = &g[j] * target - &s.x[j] - &s.x[j] * &rd[j] * &g[j];
            if let Some(c) = corr {
                h -= &c[j] * &g[j];
            }
            h
        })
        .collect();
    let ah = op.apply(&h);
    let rhs: Vec<f64> = rp.iter().zip(&ah).map(|(a, b)| a - b).collect();
    let dy = factor.solve(&rhs);
    let ady = op.adjoint(&dy);
    let dz: Vec<Mat> = rd.iter().zip(&ady).map(|(r, a)| symmetrize(&(r - a))).collect();
    let dx: Vec<Mat> = (0..s.x.len())
        .map(|j| {
            let mut d = &g[j] * target - &s.x[j] - &s.x[j] * &dz[j] * &g[j];
            if let Some(c) = corr {
                d -= &c[j] * &g[j];
            }
            symmetrize(&d)
        })
        .collect();
    Direction { dx, dy, dz }
}

fn max_eigenvalue(blocks: &[Mat]) -> f64 {
    blocks
        .iter()
        .map(|f| symmetrize(f).symmetric_eigenvalues().max())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Minimize the linear objective of `problem` subject to its LMI blocks.
///
/// The iterates keep `X, Z ≻ 0`. Infeasibility is reported when the SDPA
/// primal matrix becomes a Farkas certificate: `𝒜(X) ≈ 0` with
/// `⟨F0 + margin·I, X⟩ > 0`.
pub fn solve_lmi(problem: &LmiProblem, opts: &SdpOptions) -> Result<SdpSolution, SdpError> {
    problem.validate().map_err(SdpError::Dimension)?;
    let op = Operator::new(problem);
    let nb = op.blocks.len();
    let ntot: usize = op.blocks.iter().map(|b| b.size).sum();
    let c: Vec<Mat> = op.blocks.iter().map(|b| b.c.clone()).collect();
    let cobj = problem.pack(&problem.objective);
    let b: Vec<f64> = cobj.iter().map(|v| -v).collect();
    let ncoord = op.n_coords();

    let norms = op.basis_norms();
    let nf = (ntot as f64).sqrt();
    let mut xi: f64 = 10.0_f64.max(nf);
    let mut eta: f64 = 10.0_f64.max(nf).max(frob(&c));
    for (bi, ai) in b.iter().zip(&norms) {
        xi = xi.max(nf * (1.0 + bi.abs()) / (1.0 + ai));
        eta = eta.max(*ai);
    }
    let mut s = State {
        x: op.blocks.iter().map(|bl| Mat::identity(bl.size, bl.size) * xi).collect(),
        y: vec![0.0; ncoord],
        z: op.blocks.iter().map(|bl| Mat::identity(bl.size, bl.size) * eta).collect(),
    };

    let bnorm = norm(&b);
    let cnorm = frob(&c);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut infeasible = false;
    let (mut gap, mut pinf, mut dinf);
    let mut last = (f64::INFINITY, f64::INFINITY);
    let mut stalled = 0;

    loop {
        let ax = op.apply(&s.x);
        let rp: Vec<f64> = b.iter().zip(&ax).map(|(a, v)| a - v).collect();
        let aty = op.adjoint(&s.y);
        let rd: Vec<Mat> = (0..nb).map(|j| &c[j] - &s.z[j] - &aty[j]).collect();
        let pobj = inner(&c, &s.x);
        let dobj = dot(&b, &s.y);
        let xz = inner(&s.x, &s.z);
        pinf = norm(&rp) / (1.0 + bnorm);
        dinf = frob(&rd) / (1.0 + cnorm);
        gap = (pobj - dobj).abs().max(xz.abs()) / (1.0 + pobj.abs() + dobj.abs());
        if dinf <= opts.feas_tol {
            trace.push(dot(&cobj, &s.y));
        }
        if gap <= opts.gap_tol && pinf <= opts.feas_tol && dinf <= opts.feas_tol {
            converged = true;
            break;
        }
        if pobj < 0.0 && norm(&ax) <= 1e-8 * (-pobj) {
            infeasible = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        // Dual objective frozen and primal residual no longer shrinking.
        let frozen = dinf <= opts.feas_tol
            && (dobj - last.0).abs() <= 1e-9 * (1.0 + dobj.abs())
            && pinf > 0.5 * last.1;
        stalled = if frozen { stalled + 1 } else { 0 };
        if stalled >= STALL_LIMIT {
            break;
        }
        last = (dobj, pinf.min(last.1));

        let Some(g) = s.z.iter().map(inverse_spd).collect::<Option<Vec<Mat>>>() else {
            break;
        };
        let m = op.schur(&s.x, &g, opts.exec);
        if m.iter().any(|v| !v.is_finite()) {
            break;
        }
        let factor = Factor::new(&m);
        let mu = xz / ntot as f64;

        let pred = direction(&op, &factor, &s, &g, &rp, &rd, 0.0, None);
        let ap = step_length(&s.x, &pred.dx, 1.0);
        let ad = step_length(&s.z, &pred.dz, 1.0);
        let xa: Vec<Mat> = (0..nb).map(|j| &s.x[j] + &pred.dx[j] * ap).collect();
        let za: Vec<Mat> = (0..nb).map(|j| &s.z[j] + &pred.dz[j] * ad).collect();
        let mu_aff = inner(&xa, &za) / ntot as f64;
        let expon = 1.0_f64.max(3.0 * ap.min(ad).powi(2));
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powf(expon);

        let corr: Vec<Mat> = (0..nb).map(|j| &pred.dx[j] * &pred.dz[j]).collect();
        let dir = direction(&op, &factor, &s, &g, &rp, &rd, sigma * mu, Some(&corr));
        if dir.dy.iter().any(|v| !v.is_finite()) {
            break;
        }
        let ap = step_length(&s.x, &dir.dx, opts.step_fraction);
        let mut ad = step_length(&s.z, &dir.dz, opts.step_fraction);
        // A dual-feasible iterate never moves uphill in the objective.
        if dinf <= opts.feas_tol && dot(&cobj, &dir.dy) > 0.0 {
            ad = 0.0;
        }
        if ap == 0.0 && ad == 0.0 {
            break;
        }
        for j in 0..nb {
            s.x[j] = symmetrize(&(&s.x[j] + &dir.dx[j] * ap));
            s.z[j] = symmetrize(&(&s.z[j] + &dir.dz[j] * ad));
        }
        for (yi, di) in s.y.iter_mut().zip(&dir.dy) {
            *yi += ad * di;
        }
        iterations += 1;
    }

    let vars = problem.unpack(&s.y);
    let max_eig = max_eigenvalue(&problem.evaluate(&vars));
    let objective = problem.objective_value(&vars);
    let status = if infeasible {
        SdpStatus::Infeasible
    } else if converged && max_eig <= opts.eig_bound && gap <= 1e-6 {
        SdpStatus::Optimal
    } else {
        SdpStatus::MaxIter
    };
    Ok(SdpSolution {
        status,
        vars,
        objective,
        max_eig,
        gap,
        primal_infeas: pinf,
        dual_infeas: dinf,
        complementarity: inner(&s.x, &s.z),
        iterations,
        trace,
        multipliers: s.x,
    })
}
