use super::{Outcome, Trajectory};
use crate::ndae::DaeSystem;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsOptions {
    /// Settling band around the final speed (pu).
    pub band: f64,
    pub rocof_window: f64,
    /// Length of the oscillation-energy window after the first event.
    pub energy_window: f64,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self { band: 5e-4, rocof_window: 0.1, energy_window: 5.0 }
    }
}

/// Per-sample series derived from a trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricSeries {
    /// Inertia-weighted mean generator speed.
    pub w_e: Vec<f64>,
    /// `1 − k_p (P̃_e − P_s*)` per plant.
    pub omega_inv: Vec<Vec<f64>>,
    /// `(w_e − ω_inv) / w_e` per plant.
    pub s_inv: Vec<Vec<f64>>,
    /// Windowed `|dω/dt|`, maximum over generators.
    pub rocof: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub stable: bool,
    pub outcome: Outcome,
    pub t_end: f64,
    /// Minimum speed of each generator.
    pub nadir: Vec<f64>,
    pub max_rocof: f64,
    /// Time after the first event until every generator speed stays within
    /// the band around its final value.
    pub settling_time: Option<f64>,
    /// `max |ω_g − 1|` over generators and time.
    pub max_freq_deviation: f64,
    /// `∫ Σ_g (ω_g − 1)² dt` over the energy window.
    pub oscillation_energy: f64,
    pub max_generator_slip: Vec<f64>,
    pub max_inverter_slip: Vec<f64>,
    pub z_energy: Option<f64>,
    pub w_energy: Option<f64>,
    /// `∫ z₁ᵀz₁ dt / ∫ w̃ᵀw̃ dt`.
    pub l2_ratio: Option<f64>,
    pub dw_energy: Option<f64>,
    /// `∫ z₁ᵀz₁ dt / ∫ ΔwᵀΔw dt`, the ratio with `w_f` dropped.
    pub l2_ratio_dw: Option<f64>,
    #[serde(skip)]
    pub series: MetricSeries,
}

fn trapz(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2).zip(y.windows(2)).map(|(tt, yy)| 0.5 * (tt[1] - tt[0]) * (yy[0] + yy[1])).sum()
}

/// Pointwise `|dω/dt|` by central differences, then the maximum over the
/// trailing `window`.
pub fn rocof_series(t: &[f64], omega: &[f64], window: f64) -> Vec<f64> {
    let n = t.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            ((omega[b] - omega[a]) / (t[b] - t[a])).abs()
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    let mut lo = 0;
    for i in 0..n {
        while t[i] - t[lo] > window + 1e-12 {
            lo += 1;
        }
        out.push(d[lo..=i].iter().cloned().fold(0.0, f64::max));
    }
    out
}

/// Frequency, slip and performance figures of `traj`.
pub fn compute_metrics(traj: &Trajectory, system: &DaeSystem, opts: &MetricsOptions) -> Metrics {
    let l = system.layout();
    let case = &system.model.case;
    let t = &traj.t;
    let ns = t.len();
    let speeds: Vec<Vec<f64>> = l.gen_speed_indices().into_iter().map(|i| traj.state(i)).collect();
    let inertia: Vec<f64> = case.generators.iter().map(|g| g.params.h).collect();
    let htot: f64 = inertia.iter().sum();

    let w_e: Vec<f64> = (0..ns)
        .map(|s| {
            if speeds.is_empty() || htot <= 0.0 {
                1.0
            } else {
                speeds.iter().zip(&inertia).map(|(w, h)| h * w[s]).sum::<f64>() / htot
            }
        })
        .collect();

    let mut omega_inv = Vec::new();
    let mut s_inv = Vec::new();
    for (k, pv) in case.pv_plants.iter().enumerate() {
        let pe = l.pv_offset(k) + 6;
        let (_, ip) = l.pv_inputs(k);
        let om: Vec<f64> = (0..ns).map(|s| 1.0 - pv.params.k_p * (traj.x[s][pe] - traj.u[s][ip])).collect();
        s_inv.push(om.iter().zip(&w_e).map(|(o, we)| (we - o) / we).collect::<Vec<f64>>());
        omega_inv.push(om);
    }

    let nadir: Vec<f64> = speeds.iter().map(|w| w.iter().cloned().fold(f64::INFINITY, f64::min)).collect();
    let mut rocof = vec![0.0; ns];
    for w in &speeds {
        for (r, v) in rocof.iter_mut().zip(rocof_series(t, w, opts.rocof_window)) {
            *r = f64::max(*r, v);
        }
    }
    let max_rocof = rocof.iter().cloned().fold(0.0, f64::max);
    let max_freq_deviation = speeds.iter().flatten().map(|w| (w - 1.0).abs()).fold(0.0, f64::max);
    let max_generator_slip = speeds
        .iter()
        .map(|w| w.iter().zip(&w_e).map(|(o, we)| ((we - o) / we).abs()).fold(0.0, f64::max))
        .collect();
    let max_inverter_slip = s_inv.iter().map(|s| s.iter().map(|v| v.abs()).fold(0.0, f64::max)).collect();

    let t0 = traj.event_times.first().copied().unwrap_or(0.0);
    let win: Vec<usize> = (0..ns).filter(|&s| t[s] >= t0 - 1e-12 && t[s] <= t0 + opts.energy_window + 1e-12).collect();
    let tw: Vec<f64> = win.iter().map(|&s| t[s]).collect();
    let ew: Vec<f64> = win.iter().map(|&s| speeds.iter().map(|w| (w[s] - 1.0).powi(2)).sum()).collect();
    let oscillation_energy = trapz(&tw, &ew);

    let stable = traj.stable();
    let settling_time = if stable && ns > 0 {
        let mut first_ok = ns - 1;
        for s in (0..ns).rev() {
            if t[s] < t0 - 1e-12 {
                break;
            }
            if speeds.iter().all(|w| (w[s] - w[ns - 1]).abs() <= opts.band) {
                first_ok = s;
            } else {
                break;
            }
        }
        Some((t[first_ok] - t0).max(0.0))
    } else {
        None
    };

    let ratio = |a: f64, b: f64| if b > 0.0 { Some(a / b) } else { None };
    let nw = system.n_w();
    let (z_energy, w_energy, dw_energy) = if traj.z1.len() == ns && ns > 0 {
        let ze = trapz(t, &traj.z1.iter().map(|z| z.norm_squared()).collect::<Vec<_>>());
        let we = trapz(t, &traj.w_tilde.iter().map(|w| w.norm_squared()).collect::<Vec<_>>());
        let de = trapz(t, &traj.w_tilde.iter().map(|w| w.rows(0, nw).norm_squared()).collect::<Vec<_>>());
        (Some(ze), Some(we), Some(de))
    } else {
        (None, None, None)
    };
    let l2_ratio = z_energy.zip(w_energy).and_then(|(a, b)| ratio(a, b));
    let l2_ratio_dw = z_energy.zip(dw_energy).and_then(|(a, b)| ratio(a, b));

    Metrics {
        stable,
        outcome: traj.outcome.clone(),
        t_end: t.last().copied().unwrap_or(0.0),
        nadir,
        max_rocof,
        settling_time,
        max_freq_deviation,
        oscillation_energy,
        max_generator_slip,
        max_inverter_slip,
        z_energy,
        w_energy,
        l2_ratio,
        dw_energy,
        l2_ratio_dw,
        series: MetricSeries { w_e, omega_inv, s_inv, rocof },
    }
}
