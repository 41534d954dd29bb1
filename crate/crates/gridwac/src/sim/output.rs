use super::{Metrics, Trajectory};
use crate::ndae::DaeLayout;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// CSV with columns `t`, every state, every input and every disturbance.
pub fn trajectory_csv(traj: &Trajectory, layout: &DaeLayout) -> String {
    let mut head = vec!["t".to_string()];
    head.extend(layout.state_names());
    head.extend(layout.input_names());
    head.extend(layout.disturbance_names());
    let mut out = head.join(",");
    out.push('\n');
    for s in 0..traj.len() {
        let _ = write!(out, "{}", traj.t[s]);
        for v in traj.x[s].iter().chain(traj.u[s].iter()).chain(traj.w[s].iter()) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, layout: &DaeLayout) -> std::io::Result<()> {
    std::fs::write(path, trajectory_csv(traj, layout))
}

/// Plot data: `t`, `w_e`, `rocof`, then `omega_inv` and `s_inv` per plant.
pub fn series_csv(traj: &Trajectory, metrics: &Metrics, layout: &DaeLayout) -> String {
    let s = &metrics.series;
    let mut head = vec!["t".to_string(), "w_e".to_string(), "rocof".to_string()];
    head.extend(layout.pv_buses.iter().map(|b| format!("pv{b}.omega_inv")));
    head.extend(layout.pv_buses.iter().map(|b| format!("pv{b}.s_inv")));
    let mut out = head.join(",");
    out.push('\n');
    for i in 0..traj.len() {
        let _ = write!(out, "{},{},{}", traj.t[i], s.w_e[i], s.rocof[i]);
        for v in s.omega_inv.iter().chain(&s.s_inv) {
            let _ = write!(out, ",{}", v[i]);
        }
        out.push('\n');
    }
    out
}

/// Pretty JSON object keyed by run label.
pub fn metrics_json(runs: &BTreeMap<String, Metrics>) -> String {
    serde_json::to_string_pretty(runs).expect("metrics serialize")
}
