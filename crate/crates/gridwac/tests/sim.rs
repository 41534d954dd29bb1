use gridwac::ndae::{assemble_system, DaeSystem, NdaeError};
use gridwac::netgrid::GridCase;
use gridwac::par::Exec;
use gridwac::sim::*;
use gridwac::synth::{ControllerGain, GainTag, Method, PerformanceWeights};
use gridwac::{Mat, Vector};
use proptest::prelude::*;
use std::collections::BTreeMap;
use std::sync::OnceLock;

fn grid() -> &'static DaeSystem {
    static SYS: OnceLock<DaeSystem> = OnceLock::new();
    SYS.get_or_init(|| assemble_system(&GridCase::ieee9()).unwrap())
}

fn gain_for(sys: &DaeSystem, k: Mat) -> ControllerGain {
    ControllerGain {
        k,
        method: Method::H2Ode,
        tag: GainTag::Nominal,
        mu: None,
        weights_hash: String::new(),
        linear_hash: sys.linear_hash(),
        case_hash: None,
        n_d: sys.n_d(),
        seconds: 0.0,
    }
}

/// `K` feeding speed deviation back to the generator valve with gain `g`.
fn speed_feedback(sys: &DaeSystem, g: f64) -> Mat {
    let l = sys.layout();
    let mut k = Mat::zeros(sys.n_u(), sys.n());
    let (_, ip) = l.gen_inputs(0);
    k[(ip, l.gen_speed_indices()[0])] = g;
    k
}

#[test]
fn closed_loop_input_is_affine() {
    let sys = grid();
    let p = &sys.point;
    let k = Mat::from_fn(sys.n_u(), sys.n(), |i, j| ((i + 2 * j) % 5) as f64 - 2.0);
    assert_eq!(closed_loop_input(&k, &p.x, p), p.u);
    let e = Vector::from_fn(sys.n(), |i, _| (i as f64).sin());
    let zero = Mat::zeros(sys.n_u(), sys.n());
    assert_eq!(closed_loop_input(&zero, &(&p.x + &e), p), p.u);
    let du = closed_loop_input(&k, &(&p.x + &e), p) - &p.u;
    let expect = &k * &e;
    for i in 0..sys.n_u() {
        assert!((du[i] - expect[i]).abs() <= 1e-12 * (1.0 + expect[i].abs()));
    }
}

fn scalar_decay_error(dt: f64) -> f64 {
    let rhs = |x: &Vector| -> Result<Vector, NdaeError> { Ok(-x) };
    let (t, xs, _) = integrate_dae(rhs, 1, &Vector::from_element(1, 1.0), &StepControl::fixed(1.0, dt), 1e-13).unwrap();
    assert!((t.last().unwrap() - 1.0).abs() < 1e-12);
    (xs.last().unwrap()[0] - (-1.0f64).exp()).abs()
}

#[test]
fn trapezoid_is_second_order_on_decay() {
    let e1 = scalar_decay_error(0.1);
    let e2 = scalar_decay_error(0.05);
    let e3 = scalar_decay_error(0.025);
    assert!(e1 < 0.1 * 0.1, "error {e1}");
    for r in [e1 / e2, e2 / e3] {
        assert!((3.8..4.2).contains(&r), "ratio {r}");
    }
}

/// `ẋ_d = A11 x_d + A12 x_a`, `0 = A21 x_d + A22 x_a`.
fn linear_dae() -> (Mat, usize) {
    let a = Mat::from_row_slice(
        4,
        4,
        &[
            -1.0, 2.0, 0.5, 0.0, //
            -2.0, -0.5, 0.0, 1.0, //
            1.0, 0.0, -2.0, 0.3, //
            0.0, 1.0, 0.4, -1.5,
        ],
    );
    (a, 2)
}

#[test]
fn linear_dae_matches_reduced_exponential() {
    let (a, nd) = linear_dae();
    let a11 = a.view((0, 0), (2, 2)).into_owned();
    let a12 = a.view((0, 2), (2, 2)).into_owned();
    let a21 = a.view((2, 0), (2, 2)).into_owned();
    let a22 = a.view((2, 2), (2, 2)).into_owned();
    let a22i = a22.clone().try_inverse().unwrap();
    let ar = &a11 - &a12 * &a22i * &a21;
    let xd0 = Vector::from_vec(vec![1.0, -0.5]);
    let xa0 = -(&a22i * &a21 * &xd0);
    let mut x0 = Vector::zeros(4);
    x0.rows_mut(0, 2).copy_from(&xd0);
    x0.rows_mut(2, 2).copy_from(&xa0);
    let rhs = |x: &Vector| -> Result<Vector, NdaeError> { Ok(&a * x) };
    let ctl = StepControl { horizon: 2.0, dt: 5e-4, dt_min: 5e-4, dt_max: 5e-4, output_dt: 0.1 };
    let (t, xs, stats) = integrate_dae(rhs, nd, &x0, &ctl, 1e-13).unwrap();
    assert_eq!(t.len(), 21);
    for (ti, xi) in t.iter().zip(&xs) {
        let exact = (&ar * *ti).exp() * &xd0;
        let err = (xi.rows(0, 2) - &exact).amax();
        assert!(err <= 1e-6, "t = {ti}: {err:e}");
        let alg = (&a21 * xi.rows(0, 2) + &a22 * xi.rows(2, 2)).amax();
        assert!(alg <= 1e-8);
    }
    assert_eq!(stats.rejected, 0);
}

#[test]
fn inconsistent_start_is_rejected() {
    let (a, nd) = linear_dae();
    let rhs = |x: &Vector| -> Result<Vector, NdaeError> { Ok(&a * x) };
    let x0 = Vector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
    let r = integrate_dae(rhs, nd, &x0, &StepControl::fixed(0.1, 0.01), 1e-10);
    assert!(matches!(r, Err(SimError::InconsistentInitial { .. })));
}

#[test]
fn equilibrium_holds_without_events() {
    let sys = grid();
    let tr = integrate(sys, &sys.point, None, &Scenario::quiet(1.0), &IntegrateOptions::default()).unwrap();
    assert!(tr.stable());
    assert_eq!(tr.len(), 1001);
    assert!(tr.max_deviation(&sys.point.x) <= 1e-6);
    assert!(tr.stats.max_algebraic_residual <= 1e-8);
}

#[test]
fn load_step_keeps_algebraic_rows_consistent() {
    let sys = grid();
    let sc = Scenario::load_step(0.2, 0.2, 1.0);
    let tr = integrate(sys, &sys.point, None, &sc, &IntegrateOptions::default()).unwrap();
    assert!(tr.stable());
    assert_eq!(tr.event_times, vec![0.2]);
    assert!(tr.stats.max_algebraic_residual <= 1e-8);
    for (x, (u, w)) in tr.x.iter().zip(tr.u.iter().zip(&tr.w)) {
        let f = sys.model.residual(x.as_slice(), u.as_slice(), w.as_slice()).unwrap();
        assert!(f.rows(sys.n_d(), sys.n_a()).amax() <= 1e-8);
    }
    let l = sys.layout();
    let w_g = tr.state(l.gen_speed_indices()[0]);
    assert!(w_g.iter().cloned().fold(f64::INFINITY, f64::min) < 1.0);
}

#[test]
fn fault_sequence_is_integrated() {
    let sys = grid();
    let fault = |y_f| {
        Scenario::quiet(1.0).with_event(
            0.1,
            EventKind::Fault { branch: 4, alpha: 0.5, t_clear_near: 0.15, t_clear_remote: 0.18, y_f },
        )
    };
    let tr = integrate(sys, &sys.point, None, &fault(1.0), &IntegrateOptions::default()).unwrap();
    assert!(tr.stable());
    assert_eq!(tr.event_times, vec![0.1, 0.15, 0.18]);
    assert!(tr.stats.max_algebraic_residual <= 1e-8);
    // Constant-power loads have no solution at a bolted-fault voltage.
    match integrate(sys, &sys.point, None, &fault(1e4), &IntegrateOptions::default()) {
        Err(SimError::NewtonFailure { t, partial }) => {
            assert_eq!(t, 0.1);
            assert!(!partial.stable());
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn seeded_runs_are_bitwise_identical() {
    let sys = grid();
    let mut sc = Scenario::load_step(0.05, 0.3, 0.3);
    sc.seed = 11;
    let opts = IntegrateOptions::default();
    let a = integrate(sys, &sys.point, None, &sc, &opts).unwrap();
    let b = integrate(sys, &sys.point, None, &sc, &opts).unwrap();
    assert_eq!(a, b);
    sc.seed = 12;
    let c = integrate(sys, &sys.point, None, &sc, &opts).unwrap();
    assert_ne!(a.x, c.x);
}

#[test]
fn noise_is_held_over_each_interval() {
    let sys = grid();
    let sc = Scenario::load_step(0.0, 0.4, 0.1);
    let tr = integrate(sys, &sys.point, None, &sc, &IntegrateOptions::default()).unwrap();
    for (i, w) in tr.w.iter().enumerate().skip(1) {
        let same_interval = (tr.t[i] / 0.01 + 1e-9).floor() == (tr.t[i - 1] / 0.01 + 1e-9).floor();
        if same_interval {
            assert_eq!(w, &tr.w[i - 1], "sample {i}");
        }
    }
    let distinct: std::collections::BTreeSet<u64> = tr.w.iter().map(|w| w[2].to_bits()).collect();
    assert!(distinct.len() >= 9);
}

#[test]
fn quiet_scenario_matches_plain_integration_for_every_gain() {
    let sys = grid();
    let gains = vec![gain_for(sys, speed_feedback(sys, -5.0)), gain_for(sys, Mat::zeros(sys.n_u(), sys.n()))];
    let sc = Scenario { horizon: 0.3, ..Scenario::load_step(0.1, 0.0, 0.3) };
    let sc = Scenario { noise: NoiseSpec::off(), ..sc };
    let runs = run_scenario(sys, &sys.point, &gains, &sc, None, Exec::Parallel).unwrap();
    let labels: Vec<&str> = runs.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["conventional", "h2-ode", "h2-ode-2"]);
    let opts = IntegrateOptions::default();
    let plain = integrate(sys, &sys.point, None, &sc, &opts).unwrap();
    assert_eq!(runs[0].trajectory, plain);
    for (r, g) in runs[1..].iter().zip(&gains) {
        let t = integrate(sys, &sys.point, Some(&Feedback::from_gain(g)), &sc, &opts).unwrap();
        assert_eq!(r.trajectory, t);
        assert!(t.max_deviation(&sys.point.x) <= 1e-6);
    }
}

#[test]
fn mismatched_gain_is_refused() {
    let sys = grid();
    let mut g = gain_for(sys, Mat::zeros(sys.n_u(), sys.n()));
    g.linear_hash = "0".repeat(64);
    let r = run_scenario(sys, &sys.point, &[g], &Scenario::quiet(0.1), None, Exec::Sequential);
    assert!(matches!(r, Err(SimError::HashMismatch { .. })));
}

#[test]
fn destabilizing_feedback_is_flagged() {
    let sys = grid();
    let g = gain_for(sys, speed_feedback(sys, 400.0));
    let sc = Scenario::load_step(0.1, 0.1, 5.0);
    let runs = run_scenario(sys, &sys.point, &[g], &sc, None, Exec::Sequential).unwrap();
    assert!(runs[0].metrics.stable);
    assert!(!runs[1].metrics.stable);
    assert!(runs[1].metrics.t_end < 5.0);
}

#[test]
fn constant_trajectory_metrics() {
    let sys = grid();
    let tr = integrate(sys, &sys.point, None, &Scenario::quiet(0.5), &IntegrateOptions::default()).unwrap();
    let m = compute_metrics(&tr, sys, &MetricsOptions::default());
    assert!(m.stable);
    for v in &m.nadir {
        assert!((v - 1.0).abs() < 1e-12);
    }
    assert!(m.max_rocof < 1e-9);
    assert!(m.max_freq_deviation < 1e-12);
    assert!(m.max_generator_slip.iter().all(|s| s.abs() < 1e-12));
    assert_eq!(m.settling_time, Some(0.0));
    assert_eq!(m.l2_ratio, None);
    // One machine: the weighted mean speed is its speed.
    let w = tr.state(sys.layout().gen_speed_indices()[0]);
    assert_eq!(m.series.w_e, w);
    assert_eq!(m.series.omega_inv.len(), 2);
}

#[test]
fn rocof_of_sinusoid() {
    let t: Vec<f64> = (0..=3000).map(|i| i as f64 * 1e-3).collect();
    let w: Vec<f64> = t.iter().map(|t| 1.0 - 0.01 * (2.0 * std::f64::consts::PI * t).sin()).collect();
    let r = rocof_series(&t, &w, 0.1);
    let peak = r.iter().cloned().fold(0.0, f64::max);
    let exact = 0.02 * std::f64::consts::PI;
    assert!((peak - exact).abs() <= 0.01 * exact, "{peak} vs {exact}");
}

#[test]
fn performance_output_is_recorded() {
    let sys = grid();
    let weights = PerformanceWeights::defaults(sys.layout());
    let opts = IntegrateOptions { weights: Some(weights.clone()), ..IntegrateOptions::default() };
    let sc = Scenario::load_step(0.05, 0.2, 0.2);
    let tr = integrate(sys, &sys.point, None, &sc, &opts).unwrap();
    assert_eq!(tr.z1.len(), tr.len());
    assert_eq!(tr.w_tilde[0].len(), 2 * sys.n_w());
    assert!(tr.z1[0].amax() < 1e-9);
    let m = compute_metrics(&tr, sys, &MetricsOptions::default());
    let (ze, we, de) = (m.z_energy.unwrap(), m.w_energy.unwrap(), m.dw_energy.unwrap());
    assert!(ze > 0.0 && we >= de && de > 0.0);
    assert!((m.l2_ratio.unwrap() - ze / we).abs() <= 1e-12 * (ze / we));
}

#[test]
fn scenario_validation() {
    let ok = Scenario::load_step(1.0, 0.4, 10.0);
    assert!(ok.validate().is_ok());
    assert!(Scenario::load_step(11.0, 0.4, 10.0).validate().is_err());
    let mut neg = ok.clone();
    neg.noise.measurement_var = -1.0;
    assert!(neg.validate().is_err());
    let fault = Scenario::quiet(1.0)
        .with_event(0.5, EventKind::Fault { branch: 1, alpha: 0.5, t_clear_near: 0.4, t_clear_remote: 0.6, y_f: 1e4 });
    assert!(fault.validate().is_err());
    let mut steps = ok.clone();
    steps.dt_min = 1e-3;
    assert!(steps.validate().is_err());
}

#[test]
fn scenario_json_roundtrip() {
    let text = r#"{"events": [{"t": 1.0, "kind": "load-step", "delta": 0.4},
                              {"t": 1.0, "kind": "irradiance-step", "delta": 0.2},
                              {"t": 2.0, "kind": "fault", "branch": 3, "alpha": 0.5, "t_clear_near": 2.05, "t_clear_remote": 2.1}],
                   "seed": 7, "horizon": 5.0}"#;
    let sc: Scenario = serde_json::from_str(text).unwrap();
    assert_eq!(sc.events.len(), 3);
    assert_eq!(sc.seed, 7);
    assert_eq!(sc.dt, 1e-4);
    assert!(matches!(sc.events[2].kind, EventKind::Fault { y_f, .. } if y_f == 1e4));
    let back: Scenario = serde_json::from_str(&serde_json::to_string(&sc).unwrap()).unwrap();
    assert_eq!(back, sc);
}

#[test]
fn csv_and_json_outputs() {
    let sys = grid();
    let tr = integrate(sys, &sys.point, None, &Scenario::quiet(0.01), &IntegrateOptions::default()).unwrap();
    let csv = trajectory_csv(&tr, sys.layout());
    let mut lines = csv.lines();
    let head: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(head[0], "t");
    for name in ["gen1.omega", "pv2.E_dc", "bus5.V_Re"] {
        assert!(head.contains(&name), "{name}");
    }
    assert_eq!(head.len(), 1 + sys.n() + sys.n_u() + sys.n_w());
    assert_eq!(lines.count(), tr.len());
    let m = compute_metrics(&tr, sys, &MetricsOptions::default());
    let series = series_csv(&tr, &m, sys.layout());
    assert!(series.starts_with("t,w_e,rocof,pv2.omega_inv,pv3.omega_inv,pv2.s_inv,pv3.s_inv"));
    let mut all = BTreeMap::new();
    all.insert("conventional".to_string(), m);
    let v: serde_json::Value = serde_json::from_str(&metrics_json(&all)).unwrap();
    for key in ["nadir", "max_rocof", "l2_ratio", "stable"] {
        assert!(v["conventional"].get(key).is_some(), "{key}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn feedback_difference_is_linear(seed in 0u64..1000, scale in -3.0f64..3.0) {
        let sys = grid();
        let p = &sys.point;
        let k = Mat::from_fn(sys.n_u(), sys.n(), |i, j| (((i * 31 + j * 7) as u64 + seed) % 11) as f64 - 5.0);
        let e = Vector::from_fn(sys.n(), |i, _| scale * ((i as u64 + seed) as f64).cos());
        let du = closed_loop_input(&k, &(&p.x + &e), p) - closed_loop_input(&k, &p.x, p);
        let expect = &k * &e;
        prop_assert!((du - expect).amax() <= 1e-10 * (1.0 + scale.abs()) * 100.0);
    }

    #[test]
    fn decay_error_shrinks_quadratically(a in 0.2f64..3.0) {
        let run = |dt: f64| {
            let rhs = |x: &Vector| -> Result<Vector, NdaeError> { Ok(x * -a) };
            let (_, xs, _) = integrate_dae(rhs, 1, &Vector::from_element(1, 1.0), &StepControl::fixed(1.0, dt), 1e-14).unwrap();
            (xs.last().unwrap()[0] - (-a).exp()).abs()
        };
        let r = run(0.02) / run(0.01);
        prop_assert!((3.7..4.3).contains(&r), "ratio {}", r);
    }
}
