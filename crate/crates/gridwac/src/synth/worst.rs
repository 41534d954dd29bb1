//! Worst-case structured perturbation of `A` and controller redesign.

use super::{synthesize, ControllerGain, DescriptorPlant, GainTag, Method, PerformanceWeights, SynthError};
use crate::ndae::kron_reduce;
use crate::numerics::{hinf_norm, spectral_abscissa, NumericsConfig};
use crate::par::{self, Exec};
use crate::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::cmp::Ordering;

/// Frobenius ball `‖ΔA‖_F ≤ ρ` restricted to a fixed sparsity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyBall {
    pub rho: f64,
    pub nu: f64,
    pub mask: Vec<(usize, usize)>,
    pub shape: (usize, usize),
}

impl UncertaintyBall {
    /// Mask taken from the nonzero pattern of `A`.
    pub fn from_plant(plant: &DescriptorPlant, rho: f64, nu: f64) -> Self {
        let a = &plant.a;
        let mask = (0..a.nrows())
            .flat_map(|i| (0..a.ncols()).map(move |j| (i, j)))
            .filter(|&(i, j)| a[(i, j)] != 0.0)
            .collect();
        Self { rho: rho.max(0.0), nu, mask, shape: a.shape() }
    }

    pub fn to_matrix(&self, v: &[f64]) -> Mat {
        let mut m = Mat::zeros(self.shape.0, self.shape.1);
        for (&(i, j), &x) in self.mask.iter().zip(v) {
            m[(i, j)] = x;
        }
        m
    }

    fn project(&self, v: &mut [f64]) {
        let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm > self.rho && nrm > 0.0 {
            let s = self.rho / nrm;
            v.iter_mut().for_each(|x| *x *= s);
        }
    }
}

/// `h(ΔA) = ‖G(s; ΔA)‖∞ + ν·α(A + ΔA)` with the infinite branch kept
/// lexicographic: any unstable perturbation beats every stable one and
/// unstable ones are ranked by `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationScore {
    pub alpha: f64,
    pub hinf: f64,
    pub h: f64,
}

impl PerturbationScore {
    pub fn unstable(&self) -> bool {
        !(self.alpha < 0.0) || self.hinf.is_infinite()
    }

    fn invalid() -> Self {
        Self { alpha: f64::NEG_INFINITY, hinf: f64::NEG_INFINITY, h: f64::NEG_INFINITY }
    }

    fn valid(&self) -> bool {
        self.alpha > f64::NEG_INFINITY
    }

    /// Total order used by the search.
    pub fn cmp_worse(&self, other: &Self) -> Ordering {
        match (self.valid(), other.valid()) {
            (false, false) => return Ordering::Equal,
            (false, true) => return Ordering::Less,
            (true, false) => return Ordering::Greater,
            _ => {}
        }
        match (self.unstable(), other.unstable()) {
            (true, true) => self.alpha.total_cmp(&other.alpha),
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => self.h.total_cmp(&other.h),
        }
    }
}

/// Open-loop score of `A + ΔA` on the lifted performance channel.
pub fn perturbation_score(
    plant: &DescriptorPlant,
    weights: &PerformanceWeights,
    delta: &Mat,
    nu: f64,
) -> PerturbationScore {
    let cfg = NumericsConfig::default();
    let a = &plant.a + delta;
    let Ok(red) = kron_reduce(&a, &Mat::zeros(plant.n(), 0), &plant.b_hat(), plant.n_d) else {
        return PerturbationScore::invalid();
    };
    let Ok(alpha) = spectral_abscissa(&red.a, &cfg) else {
        return PerturbationScore::invalid();
    };
    let hinf = if alpha < 0.0 {
        let (ct, _, dt) = red.reduce_output(&weights.c, &Mat::zeros(plant.n(), 0), &weights.d_hat(plant));
        hinf_norm(&red.a, &red.b_w, &ct, &dt, &cfg).unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };
    PerturbationScore { alpha, hinf, h: hinf + nu * alpha }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstCaseOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_evals_per_start: usize,
    /// Search stops once the poll step falls below `min_step·ρ`.
    pub min_step: f64,
    pub exec: Exec,
}

impl Default for WorstCaseOptions {
    fn default() -> Self {
        Self { starts: 8, seed: 0, max_evals_per_start: 4000, min_step: 1e-3, exec: Exec::default() }
    }
}

#[derive(Debug, Clone)]
pub struct WorstCase {
    pub delta: Mat,
    pub score: PerturbationScore,
    pub nominal: PerturbationScore,
    /// Best score reached from each start.
    pub start_scores: Vec<PerturbationScore>,
    pub evaluations: usize,
}

fn random_direction(rng: &mut ChaCha8Rng, m: usize, rho: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    v.iter_mut().for_each(|x| *x *= rho / nrm);
    v
}

/// A perturbation drawn uniformly from the sphere `‖ΔA‖_F = ρ` on the mask.
pub fn sample_in_ball(ball: &UncertaintyBall, seed: u64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ball.to_matrix(&random_direction(&mut rng, ball.mask.len(), ball.rho))
}

fn pattern_search(
    plant: &DescriptorPlant,
    weights: &PerformanceWeights,
    ball: &UncertaintyBall,
    x0: Vec<f64>,
    seed: u64,
    opts: &WorstCaseOptions,
) -> (Vec<f64>, PerturbationScore, usize) {
    let m = ball.mask.len();
    let eval = |v: &[f64]| perturbation_score(plant, weights, &ball.to_matrix(v), ball.nu);
    let mut x = x0;
    let mut cur = eval(&x);
    let mut evals = 1;
    let mut step = 0.25 * ball.rho;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut order: Vec<usize> = (0..m).collect();
    while step > opts.min_step * ball.rho && evals < opts.max_evals_per_start {
        for i in (1..m).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let mut improved = false;
        'poll: for &i in &order {
            for sign in [1.0, -1.0] {
                if evals >= opts.max_evals_per_start {
                    break 'poll;
                }
                let mut cand = x.clone();
                cand[i] += sign * step;
                ball.project(&mut cand);
                let sc = eval(&cand);
                evals += 1;
                if sc.cmp_worse(&cur) == Ordering::Greater {
                    x = cand;
                    cur = sc;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, cur, evals)
}

/// Maximize `h` over the masked Frobenius ball by multi-start projected
/// pattern search. The first start is `ΔA = 0`, the rest are random
/// points on the sphere.
pub fn worst_case_perturbation(
    plant: &DescriptorPlant,
    weights: &PerformanceWeights,
    ball: &UncertaintyBall,
    opts: &WorstCaseOptions,
) -> Result<WorstCase, SynthError> {
    weights.validate(plant)?;
    let zero = Mat::zeros(plant.n(), plant.n());
    let nominal = perturbation_score(plant, weights, &zero, ball.nu);
    if ball.rho == 0.0 || ball.mask.is_empty() {
        return Ok(WorstCase { delta: zero, score: nominal, nominal, start_scores: vec![nominal], evaluations: 1 });
    }
    let m = ball.mask.len();
    let runs = par::map_indexed(opts.exec, opts.starts.max(1), |k| {
        let seed = opts.seed.wrapping_add(k as u64);
        let x0 = if k == 0 {
            vec![0.0; m]
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            random_direction(&mut rng, m, ball.rho)
        };
        pattern_search(plant, weights, ball, x0, seed, opts)
    });
    let evaluations = runs.iter().map(|r| r.2).sum();
    let start_scores: Vec<PerturbationScore> = runs.iter().map(|r| r.1).collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.1.cmp_worse(&a.1) == Ordering::Greater { b } else { a })
        .expect("at least one start");
    Ok(WorstCase { delta: ball.to_matrix(&best.0), score: best.1, nominal, start_scores, evaluations })
}

/// Redesign the gain for `A + ΔA` and tag it.
pub fn update_controller(
    plant: &DescriptorPlant,
    delta: &Mat,
    method: Method,
    weights: &PerformanceWeights,
    tag: GainTag,
) -> Result<ControllerGain, SynthError> {
    let mut g = synthesize(&plant.perturbed(delta), weights, method)?;
    g.tag = tag;
    Ok(g)
}
