use super::SimError;
use crate::netgrid::{NetworkEvent, DEFAULT_FAULT_ADMITTANCE};
use serde::{Deserialize, Serialize};

/// Scheduled disturbance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EventKind {
    /// Constant-power demand becomes `(1 + Δ_d)` times nominal.
    LoadStep { delta: f64 },
    /// Irradiance becomes `(1 − Δ_I)` times nominal.
    IrradianceStep { delta: f64 },
    /// Line-to-ground fault at fraction `alpha` of `branch`, cleared at the
    /// near end at `t_clear_near` and at the remote end at `t_clear_remote`.
    Fault {
        branch: usize,
        alpha: f64,
        t_clear_near: f64,
        t_clear_remote: f64,
        #[serde(default = "default_yf")]
        y_f: f64,
    },
    /// Every branch back to its base condition.
    Restore,
}

fn default_yf() -> f64 {
    DEFAULT_FAULT_ADMITTANCE
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Piecewise-constant Gaussian noise.
///
/// Demand noise has variance `load_scale·|Δ_d|` and irradiance noise
/// `irradiance_scale·|Δ_I|`, both relative to the nominal value.
/// Measurement noise of variance `measurement_var` enters the feedback
/// path only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub enabled: bool,
    pub load_scale: f64,
    pub irradiance_scale: f64,
    pub measurement_var: f64,
    /// Hold interval of each draw (s).
    pub hold: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { enabled: true, load_scale: 0.01, irradiance_scale: 0.01, measurement_var: 0.0, hold: 0.01 }
    }
}

impl NoiseSpec {
    pub fn off() -> Self {
        Self { enabled: false, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub events: Vec<ScenarioEvent>,
    pub noise: NoiseSpec,
    pub seed: u64,
    pub horizon: f64,
    /// Initial step.
    pub dt: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Sampling interval of the stored trajectory.
    pub output_dt: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            events: Vec::new(),
            noise: NoiseSpec::default(),
            seed: 0,
            horizon: 10.0,
            dt: 1e-4,
            dt_min: 1e-7,
            dt_max: 1e-4,
            output_dt: 1e-3,
        }
    }
}

/// What happens at a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Action {
    Load(f64),
    Irradiance(f64),
    Network(NetworkEvent),
}

impl Scenario {
    /// No events and no noise.
    pub fn quiet(horizon: f64) -> Self {
        Self { horizon, noise: NoiseSpec::off(), ..Self::default() }
    }

    /// Load step of `delta` at time `t`.
    pub fn load_step(t: f64, delta: f64, horizon: f64) -> Self {
        Self { horizon, events: vec![ScenarioEvent { t, kind: EventKind::LoadStep { delta } }], ..Self::default() }
    }

    pub fn with_event(mut self, t: f64, kind: EventKind) -> Self {
        self.events.push(ScenarioEvent { t, kind });
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Scenario(m));
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return bad(format!("horizon {} must be positive", self.horizon));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt && self.dt <= self.dt_max) {
            return bad(format!("need 0 < dt_min ≤ dt ≤ dt_max, got {} {} {}", self.dt_min, self.dt, self.dt_max));
        }
        if !(self.output_dt > 0.0) {
            return bad("output_dt must be positive".into());
        }
        let n = &self.noise;
        if n.load_scale < 0.0 || n.irradiance_scale < 0.0 || n.measurement_var < 0.0 {
            return bad("noise variances must be nonnegative".into());
        }
        if n.enabled && !(n.hold > 0.0) {
            return bad("noise hold must be positive".into());
        }
        for ev in &self.events {
            if !(0.0..=self.horizon).contains(&ev.t) {
                return bad(format!("event at t = {} outside [0, {}]", ev.t, self.horizon));
            }
            if let EventKind::Fault { alpha, t_clear_near, t_clear_remote, .. } = ev.kind {
                if !(0.0..=1.0).contains(&alpha) {
                    return bad(format!("fault location {alpha} outside [0, 1]"));
                }
                if !(ev.t <= t_clear_near && t_clear_near <= t_clear_remote) {
                    return bad(format!("fault at {} needs t ≤ t_clear_near ≤ t_clear_remote", ev.t));
                }
            }
        }
        Ok(())
    }

    /// Discrete actions in time order; simultaneous actions keep their
    /// listed order.
    pub(crate) fn timeline(&self) -> Vec<(f64, Action)> {
        let mut out = Vec::new();
        for ev in &self.events {
            match ev.kind {
                EventKind::LoadStep { delta } => out.push((ev.t, Action::Load(delta))),
                EventKind::IrradianceStep { delta } => out.push((ev.t, Action::Irradiance(delta))),
                EventKind::Restore => out.push((ev.t, Action::Network(NetworkEvent::Restore))),
                EventKind::Fault { branch, alpha, t_clear_near, t_clear_remote, y_f } => {
                    out.push((ev.t, Action::Network(NetworkEvent::Fault { branch, alpha, y_f })));
                    if t_clear_near <= self.horizon {
                        out.push((t_clear_near, Action::Network(NetworkEvent::ClearNear { branch })));
                    }
                    if t_clear_remote <= self.horizon {
                        out.push((t_clear_remote, Action::Network(NetworkEvent::ClearRemote { branch })));
                    }
                }
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }
}
