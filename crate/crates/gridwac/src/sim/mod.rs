//! Closed-loop time simulation of the NDAE under disturbance scenarios.
//!
//! [`integrate`] advances `E ẋ = F(x, u, w)` with the trapezoidal rule on
//! the differential rows and the algebraic rows enforced at every step.
//! [`run_scenario`] runs the conventional system and every supplied gain
//! against the same noise realization; [`compute_metrics`] reduces a
//! trajectory to frequency and performance figures.

mod integrate;
mod metrics;
mod output;
mod scenario;

pub use integrate::{closed_loop_input, integrate, integrate_dae, Feedback, IntegrateOptions, StepControl};
pub use metrics::{compute_metrics, rocof_series, Metrics, MetricsOptions, MetricSeries};
pub use output::{metrics_json, series_csv, trajectory_csv, write_trajectory_csv};
pub use scenario::{EventKind, NoiseSpec, Scenario, ScenarioEvent};

use crate::ndae::{DaeSystem, NdaeError, OperatingPoint};
use crate::netgrid::NetError;
use crate::par::{self, Exec};
use crate::synth::{ControllerGain, GainTag, PerformanceWeights};
use crate::Vector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("initial condition is inconsistent (algebraic residual {residual:e})")]
    InconsistentInitial { residual: f64 },
    #[error("Newton failed at t = {t} with the minimum step")]
    NewtonFailure { t: f64, partial: Box<Trajectory> },
    #[error("gain `{label}` was designed for linearization {found}, system has {expected}")]
    HashMismatch { label: String, expected: String, found: String },
    #[error("dimension: {0}")]
    Dimension(String),
    #[error(transparent)]
    Model(#[from] NdaeError),
    #[error(transparent)]
    Network(#[from] NetError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub steps: usize,
    pub rejected: usize,
    pub newton_iterations: usize,
    pub jacobian_updates: usize,
    /// Largest `‖F_a‖_∞` over accepted steps and reinitializations.
    pub max_algebraic_residual: f64,
    pub min_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Outcome {
    Completed,
    Diverged { t: f64, reason: String },
    SolverFailure { t: f64 },
}

/// Sampled solution. `z1` and `w_tilde` are filled when performance
/// weights were supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<Vector>,
    pub u: Vec<Vector>,
    pub w: Vec<Vector>,
    /// `C x̃ + D ũ + D_w w̃₁` on deviations from the operating point.
    pub z1: Vec<Vector>,
    /// `[Δw; w_f]` with `B_w w_f` the least-squares fit of the nonlinear
    /// remainder `F − A x̃ − B ũ − B_w Δw`.
    pub w_tilde: Vec<Vector>,
    pub event_times: Vec<f64>,
    pub stats: SolverStats,
    pub outcome: Outcome,
}

impl Trajectory {
    /// States only; inputs, disturbances and outputs left empty.
    pub fn from_samples(t: Vec<f64>, x: Vec<Vector>, stats: SolverStats, outcome: Outcome) -> Self {
        Self { t, x, u: Vec::new(), w: Vec::new(), z1: Vec::new(), w_tilde: Vec::new(), event_times: Vec::new(), stats, outcome }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn stable(&self) -> bool {
        self.outcome == Outcome::Completed
    }

    /// Time series of state `i`.
    pub fn state(&self, i: usize) -> Vec<f64> {
        self.x.iter().map(|x| x[i]).collect()
    }

    pub fn max_deviation(&self, x0: &Vector) -> f64 {
        self.x.iter().map(|x| (x - x0).amax()).fold(0.0, f64::max)
    }
}

/// One labelled run of a scenario.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub label: String,
    pub trajectory: Trajectory,
    pub metrics: Metrics,
}

/// Run label for a gain: the method, suffixed by its uncertainty tag.
pub fn gain_label(g: &ControllerGain) -> String {
    match g.tag {
        GainTag::Nominal => g.method.label().to_string(),
        GainTag::UpdatedWcs => format!("{}-updated-wcs", g.method.label()),
        GainTag::UpdatedR => format!("{}-updated-r", g.method.label()),
    }
}

pub const CONVENTIONAL: &str = "conventional";

/// Conventional-only run followed by one run per gain, all with the
/// scenario's seed. A run that diverges or loses Newton convergence is
/// reported as unstable, not as an error.
pub fn run_scenario(
    system: &DaeSystem,
    point: &OperatingPoint,
    gains: &[ControllerGain],
    scenario: &Scenario,
    weights: Option<&PerformanceWeights>,
    exec: Exec,
) -> Result<Vec<ScenarioRun>, SimError> {
    let expected = system.linear_hash();
    let mut labels = vec![CONVENTIONAL.to_string()];
    for g in gains {
        let mut label = gain_label(g);
        if g.linear_hash != expected {
            return Err(SimError::HashMismatch { label, expected, found: g.linear_hash.clone() });
        }
        if g.k.shape() != (system.n_u(), system.n()) {
            return Err(SimError::Dimension(format!("gain `{label}` is {:?}", g.k.shape())));
        }
        let base = label.clone();
        let mut k = 2;
        while labels.contains(&label) {
            label = format!("{base}-{k}");
            k += 1;
        }
        labels.push(label);
    }
    let feedback: Vec<Option<Feedback>> =
        std::iter::once(None).chain(gains.iter().map(|g| Some(Feedback::new(g.k.clone())))).collect();
    let opts = IntegrateOptions { weights: weights.cloned(), ..IntegrateOptions::default() };
    let runs = par::map_slice(exec, &feedback, |fb| match integrate(system, point, fb.as_ref(), scenario, &opts) {
        Ok(t) => Ok(t),
        Err(SimError::NewtonFailure { partial, .. }) => Ok(*partial),
        Err(e) => Err(e),
    });
    let mopts = MetricsOptions::default();
    labels
        .into_iter()
        .zip(runs)
        .map(|(label, r)| {
            let trajectory = r?;
            let metrics = compute_metrics(&trajectory, system, &mopts);
            Ok(ScenarioRun { label, trajectory, metrics })
        })
        .collect()
}
