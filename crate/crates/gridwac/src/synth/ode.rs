//! Riccati-based H∞ and H2 designs on the Kron-reduced model.

use super::{embed_gain, hcat, ControllerGain, DescriptorPlant, GainTag, Method, PerformanceWeights, SynthError};
use crate::numerics::{care_residual, min_sym_eigenvalue, solve_care, spectral_abscissa, CareProblem, NumericsConfig};
use crate::Mat;
use std::time::Instant;

/// Reduced model with the lifted disturbance:
/// `ẋ_d = Ã x_d + B̃ u + B̃_w w̃`, `z = C̃ x_d + D̃ u + D̃_w w̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeChannels {
    pub a: Mat,
    pub b: Mat,
    /// `[B̄_w  B_f]` with `B_f` the differential rows of `B_w`.
    pub b_w: Mat,
    pub c: Mat,
    pub d: Mat,
    /// `[D̄_w  D_f]` with `D_f = B_w`.
    pub d_w: Mat,
    pub n_a: usize,
}

impl OdeChannels {
    pub fn new(plant: &DescriptorPlant, weights: &PerformanceWeights) -> Result<Self, SynthError> {
        weights.validate(plant)?;
        let red = plant.reduce()?;
        let (c, d, dwb) = red.reduce_output(&weights.c, &weights.d, &weights.d_w);
        let bf = plant.b_w.rows(0, plant.n_d).into_owned();
        Ok(Self {
            a: red.a.clone(),
            b: red.b.clone(),
            b_w: hcat(&red.b_w, &bf),
            c,
            d,
            d_w: hcat(&dwb, &plant.b_w),
            n_a: plant.n_a(),
        })
    }

    /// Closed-loop `(Ã + B̃K_d, B̃_w, C̃ + D̃K_d, D̃_w)`.
    pub fn closed_loop(&self, k_d: &Mat) -> (Mat, Mat, Mat, Mat) {
        (&self.a + &self.b * k_d, self.b_w.clone(), &self.c + &self.d * k_d, self.d_w.clone())
    }

    /// The H∞ CARE data at level `μ`, or `None` when `F(μ) = μ²I − D̃_wᵀD̃_w`
    /// is not positive definite.
    pub fn hinf_care(&self, mu: f64) -> Option<CareProblem> {
        let nw = self.d_w.ncols();
        let f = Mat::identity(nw, nw) * (mu * mu) - self.d_w.transpose() * &self.d_w;
        let fi = f.cholesky()?.inverse();
        let nz = self.c.nrows();
        let m = Mat::identity(nz, nz) + &self.d_w * &fi * self.d_w.transpose();
        let bf = &self.b_w * &fi * self.d_w.transpose();
        Some(CareProblem {
            a: &self.a + &bf * &self.c,
            b: &self.b + &bf * &self.d,
            q: self.c.transpose() * &m * &self.c,
            r: self.d.transpose() * &m * &self.d,
            s: self.c.transpose() * &m * &self.d,
            g: &self.b_w * &fi * self.b_w.transpose(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HinfOdeOptions {
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub steps: usize,
    pub numerics: NumericsConfig,
}

impl Default for HinfOdeOptions {
    fn default() -> Self {
        Self { mu_lo: 1e-3, mu_hi: 1e4, steps: 60, numerics: NumericsConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionStep {
    pub mu: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone)]
pub struct HinfOdeDesign {
    pub gain: ControllerGain,
    pub mu: f64,
    pub p: Mat,
    /// `‖Res(P)‖_F / (1 + ‖P‖_F)`.
    pub care_residual: f64,
    pub trace: Vec<BisectionStep>,
    pub channels: OdeChannels,
}

struct Candidate {
    p: Mat,
    k: Mat,
    residual: f64,
}

fn hinf_candidate(ch: &OdeChannels, mu: f64, cfg: &NumericsConfig) -> Option<Candidate> {
    let prob = ch.hinf_care(mu)?;
    let p = solve_care(&prob, cfg).ok()?;
    if min_sym_eigenvalue(&p) < -1e-9 * (1.0 + p.norm()) {
        return None;
    }
    let k = prob.gain(&p).ok()?;
    match spectral_abscissa(&(&ch.a + &ch.b * &k), cfg) {
        Ok(alpha) if alpha < 0.0 => {}
        _ => return None,
    }
    let residual = care_residual(&prob, &p) / (1.0 + p.norm());
    Some(Candidate { p, k, residual })
}

/// Outcome of the μ bisection on a set of channels.
#[derive(Debug, Clone)]
pub struct HinfBisection {
    pub mu: f64,
    pub k_d: Mat,
    pub p: Mat,
    /// `‖Res(P)‖_F / (1 + ‖P‖_F)`.
    pub care_residual: f64,
    pub trace: Vec<BisectionStep>,
}

impl OdeChannels {
    /// Smallest `μ` on the geometric bisection grid with a stabilizing
    /// `P ⪰ 0`.
    pub fn bisect_hinf(&self, opts: &HinfOdeOptions) -> Result<HinfBisection, SynthError> {
        let (mut lo, mut hi) = (opts.mu_lo, opts.mu_hi);
        let mut trace = Vec::with_capacity(opts.steps + 1);
        let mut best = hinf_candidate(self, hi, &opts.numerics);
        trace.push(BisectionStep { mu: hi, feasible: best.is_some() });
        if best.is_none() {
            return Err(SynthError::NoFeasibleMu { lo, hi });
        }
        for _ in 0..opts.steps {
            let mid = (lo * hi).sqrt();
            match hinf_candidate(self, mid, &opts.numerics) {
                Some(c) => {
                    hi = mid;
                    best = Some(c);
                    trace.push(BisectionStep { mu: mid, feasible: true });
                }
                None => {
                    lo = mid;
                    trace.push(BisectionStep { mu: mid, feasible: false });
                }
            }
        }
        let c = best.expect("upper end checked feasible");
        Ok(HinfBisection { mu: hi, k_d: c.k, p: c.p, care_residual: c.residual, trace })
    }

    /// LQ data `(Ã, B̃, C̃ᵀC̃, D̃ᵀD̃, C̃ᵀD̃)` of the H2 design.
    pub fn h2_care(&self) -> CareProblem {
        let nd = self.a.nrows();
        CareProblem {
            a: self.a.clone(),
            b: self.b.clone(),
            q: self.c.transpose() * &self.c,
            r: self.d.transpose() * &self.d,
            s: self.c.transpose() * &self.d,
            g: Mat::zeros(nd, nd),
        }
    }
}

pub fn synth_hinf_ode(
    plant: &DescriptorPlant,
    weights: &PerformanceWeights,
    opts: &HinfOdeOptions,
) -> Result<HinfOdeDesign, SynthError> {
    let start = Instant::now();
    let ch = OdeChannels::new(plant, weights)?;
    let bis = ch.bisect_hinf(opts)?;
    let gain = ControllerGain {
        k: embed_gain(&bis.k_d, ch.n_a),
        method: Method::HinfOde,
        tag: GainTag::Nominal,
        mu: Some(bis.mu),
        weights_hash: weights.content_hash(),
        linear_hash: plant.linear_hash(),
        case_hash: None,
        n_d: plant.n_d,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok(HinfOdeDesign { gain, mu: bis.mu, p: bis.p, care_residual: bis.care_residual, trace: bis.trace, channels: ch })
}

#[derive(Debug, Clone)]
pub struct H2Design {
    pub gain: ControllerGain,
    pub x: Mat,
    /// `‖Res(X)‖_F / (1 + ‖X‖_F)`.
    pub care_residual: f64,
    pub channels: OdeChannels,
}

/// LQ-optimal gain from `ÃᵀX + XÃ − (XB̃ + N)R̄⁻¹(B̃ᵀX + Nᵀ) + Q̄ = 0`.
pub fn synth_h2_ode(plant: &DescriptorPlant, weights: &PerformanceWeights) -> Result<H2Design, SynthError> {
    let start = Instant::now();
    let ch = OdeChannels::new(plant, weights)?;
    let prob = ch.h2_care();
    if prob.r.clone().cholesky().is_none() {
        return Err(SynthError::SingularInputWeight);
    }
    let cfg = NumericsConfig::default();
    let x = solve_care(&prob, &cfg)?;
    let k_d = prob.gain(&x)?;
    let care_residual = care_residual(&prob, &x) / (1.0 + x.norm());
    let gain = ControllerGain {
        k: embed_gain(&k_d, ch.n_a),
        method: Method::H2Ode,
        tag: GainTag::Nominal,
        mu: None,
        weights_hash: weights.content_hash(),
        linear_hash: plant.linear_hash(),
        case_hash: None,
        n_d: plant.n_d,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok(H2Design { gain, x, care_residual, channels: ch })
}
