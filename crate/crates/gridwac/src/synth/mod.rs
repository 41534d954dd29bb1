//! Wide-area controller synthesis: H∞ on the descriptor model, H∞ and H2
//! on the Kron-reduced model, and the worst-case uncertainty workflow.
//!
//! Every synthesis works on a [`DescriptorPlant`], the linear part of
//! `E ẋ = A x + B u + B_w w` with `E = diag(I_{n_d}, 0)`, and a set of
//! [`PerformanceWeights`] defining `z = C x + D u + D_w w`.

mod gainfile;
mod hinf_dae;
mod ode;
mod worst;

pub use gainfile::{load_gain, parse_gain, render_gain, save_gain};
pub use hinf_dae::{build_bounded_real_lmi, bounded_real_matrix, recovery_matrix, synth_hinf_dae, HinfDaeDesign, HinfDaeOptions, BoundedRealLmi};
pub use ode::{synth_h2_ode, synth_hinf_ode, BisectionStep, H2Design, HinfBisection, HinfOdeDesign, HinfOdeOptions, OdeChannels};
pub use worst::{
    perturbation_score, sample_in_ball, update_controller, worst_case_perturbation, PerturbationScore, UncertaintyBall, WorstCase,
    WorstCaseOptions,
};

use crate::io::matrices_hash;
use crate::ndae::{kron_reduce, DaeLayout, DaeSystem, NdaeError, ReducedSystem};
use crate::numerics::{hinf_norm, finite_generalized_eigenvalues, NumericsConfig, NumericsError};
use crate::sdp::SdpError;
use crate::Mat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error(transparent)]
    Ndae(#[from] NdaeError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error("weights: {0}")]
    Weights(String),
    #[error("pencil (E, A) is not regular")]
    Irregular,
    #[error("LMI infeasible ({0})")]
    Infeasible(String),
    #[error("recovery matrix XEᵀ + E⊥W is singular (condition {cond:e})")]
    SingularRecovery { cond: f64 },
    #[error("no feasible μ in [{lo}, {hi}]")]
    NoFeasibleMu { lo: f64, hi: f64 },
    #[error("D̃ᵀD̃ is singular")]
    SingularInputWeight,
    #[error("gain file: {0}")]
    GainFile(String),
}

/// Linear descriptor plant with `E = diag(I_{n_d}, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorPlant {
    pub a: Mat,
    pub b: Mat,
    pub b_w: Mat,
    pub n_d: usize,
}

impl DescriptorPlant {
    pub fn new(a: Mat, b: Mat, b_w: Mat, n_d: usize) -> Result<Self, SynthError> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || b_w.nrows() != n || n_d > n {
            return Err(NdaeError::Dimension("plant blocks have inconsistent shapes".into()).into());
        }
        Ok(Self { a, b, b_w, n_d })
    }

    pub fn from_system(sys: &DaeSystem) -> Self {
        Self { a: sys.a.clone(), b: sys.b.clone(), b_w: sys.b_w.clone(), n_d: sys.n_d() }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_a(&self) -> usize {
        self.n() - self.n_d
    }

    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_w(&self) -> usize {
        self.b_w.ncols()
    }

    pub fn e(&self) -> Mat {
        Mat::from_fn(self.n(), self.n(), |i, j| if i == j && i < self.n_d { 1.0 } else { 0.0 })
    }

    /// Same plant with `A ← A + ΔA`.
    pub fn perturbed(&self, delta: &Mat) -> Self {
        Self { a: &self.a + delta, ..self.clone() }
    }

    pub fn reduce(&self) -> Result<ReducedSystem, SynthError> {
        Ok(kron_reduce(&self.a, &self.b, &self.b_w, self.n_d)?)
    }

    /// Hash over `(A, B, B_w)`, identical to [`DaeSystem::linear_hash`].
    pub fn linear_hash(&self) -> String {
        matrices_hash(&[&self.a, &self.b, &self.b_w])
    }

    /// Lifted disturbance input `B̂_w = [B_w  B_w]`.
    pub fn b_hat(&self) -> Mat {
        hcat(&self.b_w, &self.b_w)
    }
}

pub(crate) fn hcat(a: &Mat, b: &Mat) -> Mat {
    let mut m = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    m.columns_mut(0, a.ncols()).copy_from(a);
    m.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    m
}

/// Performance output `z = C x + D u + D_w w`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceWeights {
    pub c: Mat,
    pub d: Mat,
    pub d_w: Mat,
}

impl PerformanceWeights {
    /// Unit weight on the states in `unit`, `0.1` on the rest, `D` the
    /// identity on the last `n_u` outputs and `D_w = 0`.
    pub fn diagonal(n: usize, n_u: usize, n_w: usize, unit: &[usize]) -> Self {
        let mut c = Mat::from_diagonal_element(n, n, 0.1);
        for &i in unit {
            c[(i, i)] = 1.0;
        }
        let mut d = Mat::zeros(n, n_u);
        for j in 0..n_u.min(n) {
            d[(n - n_u.min(n) + j, j)] = 1.0;
        }
        Self { c, d, d_w: Mat::zeros(n, n_w) }
    }

    /// Defaults for an assembled case: unit weight on generator speeds and
    /// angles, inverter angles and motor speeds.
    pub fn defaults(layout: &DaeLayout) -> Self {
        let mut unit = layout.gen_angle_indices();
        unit.extend(layout.gen_speed_indices());
        unit.extend(layout.pv_angle_indices());
        unit.extend(layout.motor_speed_indices());
        unit.sort_unstable();
        Self::diagonal(layout.n(), layout.n_u(), layout.n_w(), &unit)
    }

    pub fn validate(&self, plant: &DescriptorPlant) -> Result<(), SynthError> {
        let n = plant.n();
        let nz = self.c.nrows();
        if self.c.ncols() != n {
            return Err(SynthError::Weights(format!("C has {} columns, expected {n}", self.c.ncols())));
        }
        if self.d.shape() != (nz, plant.n_u()) {
            return Err(SynthError::Weights(format!("D is {:?}, expected ({nz}, {})", self.d.shape(), plant.n_u())));
        }
        if self.d_w.shape() != (nz, plant.n_w()) {
            return Err(SynthError::Weights(format!("D_w is {:?}, expected ({nz}, {})", self.d_w.shape(), plant.n_w())));
        }
        if nz != n {
            return Err(SynthError::Weights(format!("z must have {n} rows for the lift D̂_w = [D_w B_w]")));
        }
        if self.c.iter().chain(self.d.iter()).chain(self.d_w.iter()).any(|v| !v.is_finite()) {
            return Err(SynthError::Weights("non-finite entry".into()));
        }
        Ok(())
    }

    pub fn content_hash(&self) -> String {
        matrices_hash(&[&self.c, &self.d, &self.d_w])
    }

    /// Lifted feedthrough `D̂_w = [D_w  B_w]`.
    pub fn d_hat(&self, plant: &DescriptorPlant) -> Mat {
        hcat(&self.d_w, &plant.b_w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    HinfDae,
    HinfOde,
    H2Ode,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::HinfDae, Method::HinfOde, Method::H2Ode];

    pub fn label(self) -> &'static str {
        match self {
            Method::HinfDae => "hinf-dae",
            Method::HinfOde => "hinf-ode",
            Method::H2Ode => "h2-ode",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| format!("unknown method `{s}` (expected hinf-dae, hinf-ode or h2-ode)"))
    }
}

/// Provenance of a gain with respect to parametric uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainTag {
    Nominal,
    UpdatedWcs,
    UpdatedR,
}

/// State-feedback gain `u = u₀ + K (x − x₀)` with design metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGain {
    pub k: Mat,
    pub method: Method,
    pub tag: GainTag,
    /// Certified H∞ level; `None` for H2.
    pub mu: Option<f64>,
    pub weights_hash: String,
    /// Hash of the `(A, B, B_w)` the gain was designed for.
    pub linear_hash: String,
    pub case_hash: Option<String>,
    pub n_d: usize,
    /// Wall-clock design time.
    pub seconds: f64,
}

impl ControllerGain {
    /// The dynamic-state block `K_d`.
    pub fn k_d(&self) -> Mat {
        self.k.columns(0, self.n_d).into_owned()
    }
}

/// `K = [K_d  0_{n_u×n_a}]`.
pub fn embed_gain(k_d: &Mat, n_a: usize) -> Mat {
    hcat(k_d, &Mat::zeros(k_d.nrows(), n_a))
}

/// H∞ norm from `w̃` to `z` of the descriptor closed loop under `K`,
/// evaluated on its Kron reduction. Unstable loops give `∞`.
pub fn closed_loop_hinf(plant: &DescriptorPlant, weights: &PerformanceWeights, k: &Mat) -> Result<f64, SynthError> {
    let acl = &plant.a + &plant.b * k;
    let ccl = &weights.c + &weights.d * k;
    let bh = plant.b_hat();
    let dh = weights.d_hat(plant);
    let red = match kron_reduce(&acl, &Mat::zeros(plant.n(), 0), &bh, plant.n_d) {
        Ok(r) => r,
        Err(NdaeError::SingularAlgebraic { .. }) => return Ok(f64::INFINITY),
        Err(e) => return Err(e.into()),
    };
    let (ct, _, dt) = red.reduce_output(&ccl, &Mat::zeros(ccl.nrows(), 0), &dh);
    Ok(hinf_norm(&red.a, &red.b_w, &ct, &dt, &NumericsConfig::default())?)
}

/// Largest real part of the finite generalized eigenvalues of `(E, A + BK)`.
pub fn closed_loop_abscissa(plant: &DescriptorPlant, k: &Mat) -> Result<f64, SynthError> {
    let acl = &plant.a + &plant.b * k;
    let ev = finite_generalized_eigenvalues(&plant.e(), &acl, &NumericsConfig::default())?;
    Ok(ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Run the synthesis selected by `method` with default options.
pub fn synthesize(
    plant: &DescriptorPlant,
    weights: &PerformanceWeights,
    method: Method,
) -> Result<ControllerGain, SynthError> {
    match method {
        Method::HinfDae => Ok(synth_hinf_dae(plant, weights, &HinfDaeOptions::default())?.gain),
        Method::HinfOde => Ok(synth_hinf_ode(plant, weights, &HinfOdeOptions::default())?.gain),
        Method::H2Ode => Ok(synth_h2_ode(plant, weights)?.gain),
    }
}
