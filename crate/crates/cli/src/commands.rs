use crate::error::CliError;
use crate::{HinfNormArgs, PowerflowArgs, SimulateArgs, SynthesizeArgs, WorstcaseArgs};
use gridwac::io::{dump_matrix, parse_matrices};
use gridwac::ndae::{assemble_system, DaeSystem};
use gridwac::netgrid::{solve_power_flow, GridCase, PowerFlowOptions, Setpoints};
use gridwac::numerics::{hinf_norm, NumericsConfig};
use gridwac::par::Exec;
use gridwac::sim::{run_scenario, series_csv, trajectory_csv, Scenario, SimError};
use gridwac::synth::*;
use gridwac::Mat;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

const DELTA_PREFIX: &str = "@delta ";
const DELTA_FILE: &str = "delta_a.txt";

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))
}

fn out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Failure(format!("{}: {e}", dir.display())))
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values serialize") + "\n"
}

/// Finite numbers as numbers, `∞` as the string `"inf"`.
fn norm_value(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v > 0.0 {
        json!("inf")
    } else {
        Value::Null
    }
}

fn norm_text(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        "inf".into()
    }
}

fn load_case(path: &Path) -> Result<GridCase, CliError> {
    GridCase::from_json(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_system(path: &Path) -> Result<DaeSystem, CliError> {
    assemble_system(&load_case(path)?).map_err(CliError::failure)
}

/// Gains whose linearization and case hashes match `sys`.
fn load_gains(paths: &[PathBuf], sys: &DaeSystem) -> Result<Vec<ControllerGain>, CliError> {
    let (lin, case) = (sys.linear_hash(), sys.case_hash());
    paths
        .iter()
        .map(|p| {
            let g = load_gain(p)?;
            if g.linear_hash != lin {
                return Err(CliError::HashMismatch(format!("{} was designed for linearization {}, case gives {lin}", p.display(), g.linear_hash)));
            }
            if let Some(h) = &g.case_hash {
                if *h != case {
                    return Err(CliError::HashMismatch(format!("{} belongs to case {h}, not {case}", p.display())));
                }
            }
            if g.k.shape() != (sys.n_u(), sys.n()) {
                return Err(CliError::Input(format!("{}: gain is {:?}", p.display(), g.k.shape())));
            }
            Ok(g)
        })
        .collect()
}

pub fn powerflow(a: &PowerflowArgs) -> Result<(), CliError> {
    let case = load_case(&a.case.case)?;
    let demand = case.nominal_demand().map_err(CliError::failure)?;
    let set = Setpoints::from_case(&case).map_err(CliError::failure)?;
    let opts = PowerFlowOptions { tol: a.tol, max_iter: a.max_iter };
    let pf = solve_power_flow(&case, &demand, &set, &opts).map_err(CliError::failure)?;
    let buses: Vec<Value> = case
        .buses
        .iter()
        .zip(pf.v.iter().zip(&pf.s_inj))
        .map(|(b, (v, s))| json!({ "id": b.id, "vm": v.norm(), "va_deg": v.arg().to_degrees(), "p": s.re, "q": s.im }))
        .collect();
    let out = json!({
        "case_hash": case.content_hash(),
        "converged": pf.converged,
        "iterations": pf.iterations,
        "mismatch": pf.mismatch,
        "buses": buses,
    });
    match &a.out {
        Some(p) => write(p, &pretty(&out)),
        None => {
            print!("{}", pretty(&out));
            Ok(())
        }
    }
}

pub fn synthesize(a: &SynthesizeArgs) -> Result<(), CliError> {
    let sys = load_system(&a.case.case)?;
    let plant = DescriptorPlant::from_system(&sys);
    let w = PerformanceWeights::defaults(sys.layout());
    let method: Method = a.method.into();
    let (mut gain, certificate) = match method {
        Method::HinfDae => {
            let mut opts = HinfDaeOptions::default();
            if let Some(e) = a.epsilon {
                opts.epsilon = e;
            }
            if let Some(n) = a.sdp_max_iter {
                opts.sdp.max_iter = n;
            }
            if let Some(t) = a.gap_tol {
                opts.sdp.gap_tol = t;
            }
            if let Some(t) = a.feas_tol {
                opts.sdp.feas_tol = t;
            }
            let d = synth_hinf_dae(&plant, &w, &opts)?;
            let cert = json!({
                "lmi_max_eig": d.lmi_max_eig,
                "recovery_cond": d.recovery_cond,
                "epsilon": d.epsilon,
                "lambda": d.lambda,
                "sdp_status": format!("{:?}", d.sdp.status),
                "sdp_iterations": d.sdp.iterations,
                "sdp_gap": d.sdp.gap,
                "sdp_primal_infeas": d.sdp.primal_infeas,
                "sdp_dual_infeas": d.sdp.dual_infeas,
                "closed_loop_abscissa": closed_loop_abscissa(&plant, &d.gain.k)?,
            });
            (d.gain, cert)
        }
        Method::HinfOde => {
            let mut opts = HinfOdeOptions::default();
            if let Some(v) = a.mu_lo {
                opts.mu_lo = v;
            }
            if let Some(v) = a.mu_hi {
                opts.mu_hi = v;
            }
            let d = synth_hinf_ode(&plant, &w, &opts)?;
            let (aa, bb, cc, dd) = d.channels.closed_loop(&d.gain.k_d());
            let cl = hinf_norm(&aa, &bb, &cc, &dd, &NumericsConfig::default()).map_err(CliError::failure)?;
            let cert = json!({
                "care_residual": d.care_residual,
                "closed_loop_hinf": norm_value(cl),
                "bisection_steps": d.trace.len(),
            });
            (d.gain, cert)
        }
        Method::H2Ode => {
            let d = synth_h2_ode(&plant, &w)?;
            (d.gain, json!({ "care_residual": d.care_residual }))
        }
    };
    gain.case_hash = Some(sys.case_hash());
    out_dir(&a.out)?;
    let label = method.label();
    let gain_path = a.out.join(format!("{label}.gain"));
    write(&gain_path, &render_gain(&gain))?;
    let report = json!({
        "method": label,
        "mu": gain.mu.map(norm_value),
        "seconds": gain.seconds,
        "rows": gain.k.nrows(),
        "cols": gain.k.ncols(),
        "case_hash": gain.case_hash,
        "linear_hash": gain.linear_hash,
        "weights_hash": gain.weights_hash,
        "certificate": certificate,
    });
    write(&a.out.join(format!("{label}.report.json")), &pretty(&report))?;
    println!(
        "{label}: mu {} K {}x{} in {:.2} s -> {}",
        gain.mu.map_or("-".into(), norm_text),
        gain.k.nrows(),
        gain.k.ncols(),
        gain.seconds,
        gain_path.display()
    );
    Ok(())
}

pub fn simulate(a: &SimulateArgs, seed: Option<u64>) -> Result<(), CliError> {
    let sys = load_system(&a.case.case)?;
    let mut scenario = match &a.scenario {
        Some(p) => serde_json::from_str::<Scenario>(&read(p)?).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
        None => Scenario::quiet(a.horizon),
    };
    if let Some(s) = seed {
        scenario.seed = s;
    }
    scenario.validate().map_err(|e| CliError::Input(e.to_string()))?;
    let gains = load_gains(&a.gains, &sys)?;
    let w = PerformanceWeights::defaults(sys.layout());
    let runs = run_scenario(&sys, &sys.point, &gains, &scenario, Some(&w), Exec::default()).map_err(|e| match e {
        SimError::HashMismatch { .. } => CliError::HashMismatch(e.to_string()),
        other => CliError::failure(other),
    })?;
    out_dir(&a.out)?;
    let series = a.out.join("series");
    out_dir(&series)?;
    let stamp = format!("# case_hash={}\n", sys.case_hash());
    let mut metrics = BTreeMap::new();
    for r in &runs {
        let csv = trajectory_csv(&r.trajectory, sys.layout());
        write(&a.out.join(format!("{}.csv", r.label)), &format!("{stamp}{csv}"))?;
        write(&series.join(format!("{}.csv", r.label)), &format!("{stamp}{}", series_csv(&r.trajectory, &r.metrics, sys.layout())))?;
        metrics.insert(r.label.clone(), r.metrics.clone());
        let m = &r.metrics;
        println!(
            "{:<24} {:<8} nadir {:.6} max-rocof {:.5} max|w-1| {:.3e}",
            r.label,
            if m.stable { "stable" } else { "unstable" },
            m.nadir.iter().cloned().fold(f64::INFINITY, f64::min),
            m.max_rocof,
            m.max_freq_deviation
        );
    }
    let out = json!({ "case_hash": sys.case_hash(), "seed": scenario.seed, "runs": metrics });
    write(&a.out.join("metrics.json"), &pretty(&out))
}

pub fn worstcase(a: &WorstcaseArgs, seed: Option<u64>) -> Result<(), CliError> {
    if !(a.rho >= 0.0) {
        return Err(CliError::Usage(format!("--rho must be nonnegative, got {}", a.rho)));
    }
    let sys = load_system(&a.case.case)?;
    let gains = load_gains(&a.gains, &sys)?;
    let plant = DescriptorPlant::from_system(&sys);
    let w = PerformanceWeights::defaults(sys.layout());
    let ball = UncertaintyBall::from_plant(&plant, a.rho, a.nu);
    let seed = seed.unwrap_or(0);
    let (delta, tag) = if a.random {
        (sample_in_ball(&ball, seed), GainTag::UpdatedR)
    } else {
        let opts = WorstCaseOptions { starts: a.starts, seed, max_evals_per_start: a.max_evals, ..WorstCaseOptions::default() };
        (worst_case_perturbation(&plant, &w, &ball, &opts)?.delta, GainTag::UpdatedWcs)
    };
    let score = perturbation_score(&plant, &w, &delta, a.nu);
    let pp = plant.perturbed(&delta);
    out_dir(&a.out)?;

    let meta = json!({
        "rho": a.rho,
        "nu": a.nu,
        "seed": seed,
        "random": a.random,
        "case_hash": sys.case_hash(),
        "linear_hash": sys.linear_hash(),
        "alpha": score.alpha,
        "hinf": norm_value(score.hinf),
    });
    write(&a.out.join(DELTA_FILE), &format!("{DELTA_PREFIX}{meta}\n{}", dump_matrix("dA", &delta)))?;

    let mut rows = Vec::new();
    let column = if a.random { "updated-r" } else { "updated-wcs" };
    println!("{:<12} {:>14} {:>14}", "controller", "nominal", column);
    for g in &gains {
        let nominal = closed_loop_hinf(&pp, &w, &g.k)?;
        let mut u = update_controller(&plant, &delta, g.method, &w, tag)?;
        u.case_hash = Some(sys.case_hash());
        let updated = closed_loop_hinf(&pp, &w, &u.k)?;
        let path = a.out.join(format!("{}.gain", gridwac::sim::gain_label(&u)));
        write(&path, &render_gain(&u))?;
        println!("{:<12} {:>14} {:>14}", g.method.label(), norm_text(nominal), norm_text(updated));
        rows.push(json!({
            "controller": g.method.label(),
            "nominal": norm_value(nominal),
            "updated": norm_value(updated),
            "updated_abscissa": closed_loop_abscissa(&pp, &u.k)?,
            "updated_gain": path.file_name().map(|s| s.to_string_lossy().into_owned()),
        }));
    }
    let report = json!({
        "rho": a.rho,
        "nu": a.nu,
        "delta_norm": delta.norm(),
        "case_hash": sys.case_hash(),
        "open_loop": { "alpha": score.alpha, "hinf": norm_value(score.hinf), "h": norm_value(score.h) },
        "tag": column,
        "rows": rows,
    });
    write(&a.out.join("worstcase.json"), &pretty(&report))
}

fn load_delta(path: &Path, sys: &DaeSystem) -> Result<Mat, CliError> {
    let text = read(path)?;
    let bad = |m: String| CliError::Input(format!("{}: {m}", path.display()));
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let meta: Value = first
        .strip_prefix(DELTA_PREFIX)
        .ok_or_else(|| bad("missing metadata line".into()))
        .and_then(|j| serde_json::from_str(j).map_err(|e| bad(e.to_string())))?;
    for (key, want) in [("case_hash", sys.case_hash()), ("linear_hash", sys.linear_hash())] {
        if meta.get(key).and_then(Value::as_str) != Some(want.as_str()) {
            return Err(CliError::HashMismatch(format!("{}: {key} does not match the case", path.display())));
        }
    }
    let delta = parse_matrices(rest)
        .map_err(bad)?
        .into_iter()
        .find(|(n, _)| n == "dA")
        .map(|(_, m)| m)
        .ok_or_else(|| bad("no dA matrix".into()))?;
    if delta.shape() != (sys.n(), sys.n()) {
        return Err(bad(format!("dA is {:?}", delta.shape())));
    }
    Ok(delta)
}

pub fn hinf_norm_cmd(a: &HinfNormArgs) -> Result<(), CliError> {
    let sys = load_system(&a.case.case)?;
    let mut plant = DescriptorPlant::from_system(&sys);
    if let Some(p) = &a.perturbation {
        plant = plant.perturbed(&load_delta(p, &sys)?);
    }
    let w = PerformanceWeights::defaults(sys.layout());
    let (label, k) = match &a.gain {
        Some(p) => {
            let g = load_gains(std::slice::from_ref(p), &sys)?.remove(0);
            (gridwac::sim::gain_label(&g), g.k)
        }
        None => ("open-loop".to_string(), Mat::zeros(sys.n_u(), sys.n())),
    };
    let norm = closed_loop_hinf(&plant, &w, &k)?;
    let abscissa = closed_loop_abscissa(&plant, &k)?;
    let out = json!({ "label": label, "hinf": norm_value(norm), "abscissa": abscissa, "perturbed": a.perturbation.is_some() });
    print!("{}", pretty(&out));
    Ok(())
}
