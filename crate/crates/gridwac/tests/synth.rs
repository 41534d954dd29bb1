use gridwac::numerics::{
    finite_generalized_eigenvalues, hinf_norm, max_sym_eigenvalue, solve_lyapunov, spectral_abscissa, NumericsConfig,
};
use gridwac::synth::*;
use gridwac::{Mat, Vector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg() -> NumericsConfig {
    NumericsConfig::default()
}

fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn identity_weights(n: usize, n_u: usize, n_w: usize) -> PerformanceWeights {
    let unit: Vec<usize> = (0..n).collect();
    PerformanceWeights::diagonal(n, n_u, n_w, &unit)
}

fn three_state_plant() -> DescriptorPlant {
    let a = Mat::from_row_slice(3, 3, &[-1.0, 0.5, 0.0, 0.0, -2.0, 1.0, 0.3, 0.0, -1.5]);
    let b = Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    let b_w = Mat::from_row_slice(3, 1, &[0.5, 0.2, 0.1]);
    DescriptorPlant::new(a, b, b_w, 3).unwrap()
}

fn small_descriptor() -> DescriptorPlant {
    let a = Mat::from_row_slice(3, 3, &[-1.0, 0.5, 0.2, 0.1, -0.5, 1.0, 0.3, 0.4, -1.0]);
    let b = Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    let b_w = Mat::from_row_slice(3, 1, &[0.5, 0.2, 0.1]);
    DescriptorPlant::new(a, b, b_w, 2).unwrap()
}

// One differential state with dynamics `a`, plus a decoupled algebraic
// state so that z = [x_d; u] fits the n-row output.
fn scalar_lq_plant(a: f64) -> (DescriptorPlant, PerformanceWeights) {
    let plant = DescriptorPlant::new(
        Mat::from_row_slice(2, 2, &[a, 0.0, 0.0, -1.0]),
        Mat::from_row_slice(2, 1, &[1.0, 0.0]),
        Mat::from_row_slice(2, 1, &[1.0, 0.0]),
        1,
    )
    .unwrap();
    let w = PerformanceWeights {
        c: Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        d: Mat::from_row_slice(2, 1, &[0.0, 1.0]),
        d_w: Mat::zeros(2, 1),
    };
    (plant, w)
}

fn lifted_closed_loop_norm(plant: &DescriptorPlant, w: &PerformanceWeights, k: &Mat) -> f64 {
    let a = &plant.a + &plant.b * k;
    let c = &w.c + &w.d * k;
    hinf_norm(&a, &plant.b_hat(), &c, &w.d_hat(plant), &cfg()).unwrap()
}

#[test]
fn dae_synthesis_with_identity_descriptor_meets_its_bound() {
    let plant = three_state_plant();
    let w = identity_weights(3, 2, 1);
    let d = synth_hinf_dae(&plant, &w, &HinfDaeOptions::default()).unwrap();
    let mu = d.lambda.sqrt();
    assert_eq!(d.gain.mu, Some(mu));
    let cl = lifted_closed_loop_norm(&plant, &w, &d.gain.k);
    assert!(cl <= mu + 1e-6, "closed loop {cl} above certified {mu}");
    let lmi = bounded_real_matrix(&plant, &w, &d.s, &d.h, d.lambda);
    let top = lmi.symmetric_eigen().eigenvalues.max();
    assert!(top <= -1e-9, "LMI max eigenvalue {top}");
    assert!((top - d.lmi_max_eig).abs() <= 1e-9);
}

#[test]
fn dae_synthesis_on_small_descriptor() {
    let plant = small_descriptor();
    let w = identity_weights(3, 2, 1);
    let d = synth_hinf_dae(&plant, &w, &HinfDaeOptions::default()).unwrap();
    assert!(d.lmi_max_eig <= -1e-9);
    assert!(d.recovery_cond.is_finite());
    assert_eq!(d.s[(0, 2)], 0.0);
    assert_eq!(d.s[(1, 2)], 0.0);
    // K S = H by construction.
    assert!((&d.gain.k * &d.s - &d.h).norm() <= 1e-8 * (1.0 + d.h.norm()));
    let ev = finite_generalized_eigenvalues(&plant.e(), &(&plant.a + &plant.b * &d.gain.k), &cfg()).unwrap();
    assert_eq!(ev.len(), 2);
    assert!(ev.iter().all(|z| z.re < 0.0), "{ev:?}");
    let cl = closed_loop_hinf(&plant, &w, &d.gain.k).unwrap();
    let mu = d.gain.mu.unwrap();
    assert!(cl <= mu * (1.0 + 1e-4), "closed loop {cl} above certified {mu}");
}

#[test]
fn lmi_layout_matches_direct_assembly() {
    let plant = small_descriptor();
    let w = identity_weights(3, 2, 1);
    let lmi = build_bounded_real_lmi(&plant, &w, 1e-7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut vals: Vec<Mat> = lmi.problem.vars.iter().map(|v| rand_mat(&mut rng, v.rows, v.cols)).collect();
    vals[lmi.x11] = &vals[lmi.x11] + vals[lmi.x11].transpose();
    let s = lmi.s_matrix(&vals);
    let lam = vals[lmi.lambda][(0, 0)];
    let direct = bounded_real_matrix(&plant, &w, &s, &vals[lmi.h], lam);
    let via = &lmi.problem.evaluate(&vals)[0];
    assert!((via - &direct).norm() <= 1e-12 * (1.0 + direct.norm()));
}

#[test]
fn recovery_matrix_has_descriptor_structure() {
    let e = Mat::from_diagonal(&Vector::from_vec(vec![1.0, 1.0, 0.0]));
    let x = Mat::from_row_slice(3, 3, &[2.0, 0.5, 9.0, 0.5, 1.0, 9.0, 0.3, 0.7, 9.0]);
    let w = Mat::from_row_slice(1, 3, &[0.1, 0.2, 0.4]);
    let s = recovery_matrix(&x, &w, &e).unwrap();
    // The last column of X never enters XEᵀ.
    assert_eq!(s[(0, 2)], 0.0);
    assert_eq!(s[(1, 2)], 0.0);
    assert!((s[(2, 2)].abs() - 0.4).abs() < 1e-14);
    assert!((s[(0, 0)] - 2.0).abs() < 1e-14 && (s[(1, 0)] - 0.5).abs() < 1e-14);
}

#[test]
fn dae_synthesis_rejects_bad_weights() {
    let plant = small_descriptor();
    let mut w = identity_weights(3, 2, 1);
    w.d = Mat::zeros(3, 1);
    assert!(matches!(synth_hinf_dae(&plant, &w, &HinfDaeOptions::default()), Err(SynthError::Weights(_))));
}

// ẋ = x + u + w, z = [x; u]: the scalar H∞ CARE is
// 2p + 1 + p²(1/μ² − 1) = 0 with closed loop 1 + p(1/μ² − 1).
fn scalar_hinf_oracle(mu: f64) -> bool {
    let c = 1.0 / (mu * mu) - 1.0;
    let roots: Vec<f64> = if c.abs() < 1e-15 {
        vec![-0.5]
    } else {
        let disc = 4.0 - 4.0 * c;
        if disc < 0.0 {
            return false;
        }
        vec![(-2.0 + disc.sqrt()) / (2.0 * c), (-2.0 - disc.sqrt()) / (2.0 * c)]
    };
    roots.iter().any(|&p| p >= 0.0 && 1.0 + c * p < 0.0)
}

fn scalar_channels() -> OdeChannels {
    OdeChannels {
        a: Mat::from_element(1, 1, 1.0),
        b: Mat::from_element(1, 1, 1.0),
        b_w: Mat::from_element(1, 1, 1.0),
        c: Mat::from_row_slice(2, 1, &[1.0, 0.0]),
        d: Mat::from_row_slice(2, 1, &[0.0, 1.0]),
        d_w: Mat::zeros(2, 1),
        n_a: 0,
    }
}

#[test]
fn scalar_hinf_level_matches_grid_oracle() {
    let ch = scalar_channels();
    let bis = ch.bisect_hinf(&HinfOdeOptions::default()).unwrap();
    let grid_mu = (0..300_000)
        .map(|i| 0.5 + i as f64 * 1e-5)
        .find(|&mu| scalar_hinf_oracle(mu))
        .unwrap();
    assert!((bis.mu - grid_mu).abs() <= 1e-4, "bisection {} grid {grid_mu}", bis.mu);
    let (a, b, c, d) = ch.closed_loop(&bis.k_d);
    let cl = hinf_norm(&a, &b, &c, &d, &cfg()).unwrap();
    assert!(cl <= bis.mu * (1.0 + 1e-4), "{cl} vs {}", bis.mu);
}

fn assert_monotone(trace: &[BisectionStep]) {
    for s in trace.iter().filter(|s| s.feasible) {
        for t in trace.iter().filter(|t| t.mu > s.mu) {
            assert!(t.feasible, "feasible at {} but not at {}", s.mu, t.mu);
        }
    }
}

#[test]
fn bisection_trace_is_monotone() {
    let ch = scalar_channels();
    let bis = ch.bisect_hinf(&HinfOdeOptions::default()).unwrap();
    assert_eq!(bis.trace.len(), 61);
    assert_monotone(&bis.trace);
    let plant = small_descriptor();
    let d = synth_hinf_ode(&plant, &identity_weights(3, 2, 1), &HinfOdeOptions::default()).unwrap();
    assert_monotone(&d.trace);
}

#[test]
fn hinf_ode_gain_bounds_closed_loop_and_ignores_algebraic_states() {
    let plant = small_descriptor();
    let w = identity_weights(3, 2, 1);
    let d = synth_hinf_ode(&plant, &w, &HinfOdeOptions::default()).unwrap();
    assert!(d.care_residual <= 1e-8);
    assert!(d.gain.k.column(2).iter().all(|v| *v == 0.0));
    let (a, b, c, dd) = d.channels.closed_loop(&d.gain.k_d());
    assert!(spectral_abscissa(&a, &cfg()).unwrap() < 0.0);
    let cl = hinf_norm(&a, &b, &c, &dd, &cfg()).unwrap();
    assert!(cl <= d.mu * (1.0 + 1e-4), "{cl} vs {}", d.mu);
}

#[test]
fn hinf_ode_reports_empty_bracket() {
    let ch = scalar_channels();
    let opts = HinfOdeOptions { mu_hi: 0.9, ..Default::default() };
    assert!(matches!(ch.bisect_hinf(&opts), Err(SynthError::NoFeasibleMu { .. })));
}

#[test]
fn h2_scalar_oracles() {
    for (a, p) in [(0.0, 1.0), (-1.0, 2f64.sqrt() - 1.0), (1.0, 1.0 + 2f64.sqrt())] {
        let (plant, w) = scalar_lq_plant(a);
        let d = synth_h2_ode(&plant, &w).unwrap();
        assert!((d.x[(0, 0)] - p).abs() <= 1e-10, "a = {a}: X = {}", d.x[(0, 0)]);
        assert!((d.gain.k[(0, 0)] + p).abs() <= 1e-10);
        assert_eq!(d.gain.k[(0, 1)], 0.0);
        assert!(d.care_residual <= 1e-8);
    }
}

#[test]
fn h2_requires_input_weight() {
    let (plant, mut w) = scalar_lq_plant(0.0);
    w.d = Mat::zeros(2, 1);
    assert!(matches!(synth_h2_ode(&plant, &w), Err(SynthError::SingularInputWeight)));
}

// J(K) = tr(P) with (A+BK)ᵀP + P(A+BK) + (C+DK)ᵀ(C+DK) = 0.
fn lq_cost(ch: &OdeChannels, k: &Mat) -> Option<f64> {
    let acl = &ch.a + &ch.b * k;
    if spectral_abscissa(&acl, &cfg()).ok()? >= 0.0 {
        return None;
    }
    let ccl = &ch.c + &ch.d * k;
    let p = solve_lyapunov(&acl, &(ccl.transpose() * &ccl), &cfg()).ok()?;
    Some(p.trace())
}

#[test]
fn h2_gain_minimizes_lyapunov_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = rand_mat(&mut rng, 4, 4) - Mat::identity(4, 4) * 0.5;
    let b = rand_mat(&mut rng, 4, 2);
    let mut a = a;
    a[(3, 3)] = -2.0;
    let plant = DescriptorPlant::new(a, b, rand_mat(&mut rng, 4, 1), 3).unwrap();
    let w = identity_weights(4, 2, 1);
    let d = synth_h2_ode(&plant, &w).unwrap();
    let k = d.gain.k_d();
    let j0 = lq_cost(&d.channels, &k).unwrap();
    assert!((j0 - d.x.trace()).abs() <= 1e-8 * (1.0 + j0));
    let mut tried = 0;
    while tried < 20 {
        let dk = rand_mat(&mut rng, k.nrows(), k.ncols()) * 1e-3;
        if let Some(j) = lq_cost(&d.channels, &(&k + dk)) {
            assert!(j0 <= j + 1e-12 * j0, "{j0} > {j}");
            tried += 1;
        }
    }
}

// Double integrator with cross term, solved entry-wise:
// −s x₂² + 2a₁x₂ + q₁₁ = 0, −s x₃² + 2a₂x₃ + 2x₂ + q₂₂ = 0,
// x₁ = s x₂x₃ − a₁x₃ − a₂x₂ − q₁₂ for A₀ = [[0,1],[a₁,a₂]].
fn double_integrator_oracle(q: &Mat, n: &Mat, r: f64) -> Mat {
    let s = 1.0 / r;
    let a1 = -s * n[(0, 0)];
    let a2 = -s * n[(1, 0)];
    let q0 = q - n * n.transpose() * s;
    let mut best = None;
    for s2 in [1.0, -1.0] {
        let x2 = (a1 + s2 * (a1 * a1 + s * q0[(0, 0)]).sqrt()) / s;
        for s3 in [1.0, -1.0] {
            let disc = a2 * a2 + s * (2.0 * x2 + q0[(1, 1)]);
            if disc < 0.0 {
                continue;
            }
            let x3 = (a2 + s3 * disc.sqrt()) / s;
            let x1 = s * x2 * x3 - a1 * x3 - a2 * x2 - q0[(0, 1)];
            let x = Mat::from_row_slice(2, 2, &[x1, x2, x2, x3]);
            let acl = Mat::from_row_slice(2, 2, &[0.0, 1.0, a1 - s * x2, a2 - s * x3]);
            if spectral_abscissa(&acl, &cfg()).unwrap() < 0.0 {
                best = Some(x);
            }
        }
    }
    best.expect("one stabilizing root")
}

#[test]
fn h2_cross_term_matches_polynomial_oracle() {
    let plant = DescriptorPlant::new(
        Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        Mat::from_row_slice(2, 1, &[0.0, 1.0]),
        Mat::from_row_slice(2, 1, &[1.0, 0.0]),
        2,
    )
    .unwrap();
    let w = PerformanceWeights {
        c: Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]),
        d: Mat::from_row_slice(2, 1, &[0.3, 1.0]),
        d_w: Mat::zeros(2, 1),
    };
    let q = w.c.transpose() * &w.c;
    let n = w.c.transpose() * &w.d;
    let r = (w.d.transpose() * &w.d)[(0, 0)];
    assert!(n.norm() > 0.1);
    let oracle = double_integrator_oracle(&q, &n, r);
    let d = synth_h2_ode(&plant, &w).unwrap();
    assert!((&d.x - &oracle).norm() <= 1e-8, "{} vs {}", d.x, oracle);
    let k_oracle = -(Mat::from_row_slice(1, 2, &[0.0, 1.0]) * &oracle + n.transpose()) / r;
    assert!((&d.gain.k - k_oracle).norm() <= 1e-8);
}

#[test]
fn embed_gain_examples() {
    let k = embed_gain(&Mat::from_row_slice(1, 2, &[1.0, 2.0]), 2);
    assert_eq!(k, Mat::from_row_slice(1, 4, &[1.0, 2.0, 0.0, 0.0]));
    assert_eq!(embed_gain(&Mat::zeros(2, 3), 4), Mat::zeros(2, 7));
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let kd = rand_mat(&mut rng, 3, 4);
    let x = Vector::from_fn(7, |_, _| rng.random_range(-1.0..1.0));
    let lhs = embed_gain(&kd, 3) * &x;
    let rhs = &kd * x.rows(0, 4);
    assert!((lhs - rhs).norm() <= 1e-15);
}

#[test]
fn method_labels_roundtrip() {
    for m in Method::ALL {
        assert_eq!(m.label().parse::<Method>().unwrap(), m);
    }
    assert!("lqr".parse::<Method>().is_err());
}

fn scalar_plant(a: f64) -> (DescriptorPlant, PerformanceWeights) {
    let plant = DescriptorPlant::new(
        Mat::from_element(1, 1, a),
        Mat::from_element(1, 1, 1.0),
        Mat::from_element(1, 1, 1.0),
        1,
    )
    .unwrap();
    (plant, PerformanceWeights::diagonal(1, 1, 1, &[0]))
}

fn quick_search() -> WorstCaseOptions {
    WorstCaseOptions { starts: 3, max_evals_per_start: 400, ..Default::default() }
}

#[test]
fn empty_ball_returns_zero_perturbation() {
    let plant = small_descriptor();
    let w = identity_weights(3, 2, 1);
    let ball = UncertaintyBall::from_plant(&plant, 0.0, 1e-3);
    let wc = worst_case_perturbation(&plant, &w, &ball, &quick_search()).unwrap();
    assert_eq!(wc.delta, Mat::zeros(3, 3));
    assert_eq!(wc.score, wc.nominal);
    assert_eq!(wc.score, perturbation_score(&plant, &w, &Mat::zeros(3, 3), 1e-3));
}

#[test]
fn scalar_worst_case_matches_grid_oracle() {
    let (plant, w) = scalar_plant(-1.0);
    let ball = UncertaintyBall::from_plant(&plant, 2.0, 1e-3);
    let wc = worst_case_perturbation(&plant, &w, &ball, &quick_search()).unwrap();
    let best_grid = (0..=4000)
        .map(|i| -2.0 + i as f64 * 1e-3)
        .map(|d| (d, perturbation_score(&plant, &w, &Mat::from_element(1, 1, d), 1e-3)))
        .reduce(|a, b| if b.1.cmp_worse(&a.1).is_gt() { b } else { a })
        .unwrap();
    assert!((best_grid.0 - 2.0).abs() < 1e-12);
    assert!((wc.delta[(0, 0)] - 2.0).abs() <= 1e-9, "{}", wc.delta);
    assert!(wc.score.unstable());
    assert!((wc.score.alpha - 1.0).abs() <= 1e-9);
}

#[test]
fn nominal_gain_fails_on_destabilizing_perturbation_and_update_recovers() {
    let (plant, w) = scalar_lq_plant(-1.0);
    let nominal = synthesize(&plant, &w, Method::H2Ode).unwrap();
    let delta = Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
    let perturbed = plant.perturbed(&delta);
    assert_eq!(closed_loop_hinf(&perturbed, &w, &nominal.k).unwrap(), f64::INFINITY);
    let updated = update_controller(&plant, &delta, Method::H2Ode, &w, GainTag::UpdatedWcs).unwrap();
    assert_eq!(updated.tag, GainTag::UpdatedWcs);
    assert!(closed_loop_abscissa(&perturbed, &updated.k).unwrap() < 0.0);
    assert!(closed_loop_hinf(&perturbed, &w, &updated.k).unwrap().is_finite());
}

#[test]
fn zero_update_reproduces_nominal_gain() {
    let plant = small_descriptor();
    let w = identity_weights(3, 2, 1);
    let zero = Mat::zeros(3, 3);
    for m in [Method::H2Ode, Method::HinfOde, Method::HinfDae] {
        let a = synthesize(&plant, &w, m).unwrap();
        let b = update_controller(&plant, &zero, m, &w, GainTag::UpdatedR).unwrap();
        assert_eq!(a.k, b.k, "{}", m.label());
        assert_eq!(a.mu, b.mu);
        assert_eq!(b.tag, GainTag::UpdatedR);
    }
}

#[test]
fn gain_file_roundtrip() {
    let plant = small_descriptor();
    let w = identity_weights(3, 2, 1);
    let mut g = synthesize(&plant, &w, Method::HinfOde).unwrap();
    g.case_hash = Some("abc".into());
    let timed = render_gain(&g);
    g.seconds = 0.0;
    // Wall-clock time stays out of the file so reruns are byte-identical.
    assert_eq!(render_gain(&g), timed);
    let back = parse_gain(&render_gain(&g)).unwrap();
    assert_eq!(back, g);
    let dir = std::env::temp_dir().join(format!("gridwac-gain-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("k.gain");
    save_gain(&g, &path).unwrap();
    assert_eq!(load_gain(&path).unwrap(), g);
    std::fs::remove_dir_all(&dir).unwrap();
    assert!(parse_gain("# K 1 1\n1.0\n").is_err());
    assert!(parse_gain(&render_gain(&g).replace("# K 2 3", "# K 3 3")).is_err());
    assert!(parse_gain(&render_gain(&g).replace("\"n_d\":2", "\"n_d\":9")).is_err());
}

fn random_plant(seed: u64) -> DescriptorPlant {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 4;
    let mut a = rand_mat(&mut rng, n, n);
    a[(3, 3)] = -2.0 - rng.random_range(0.0..1.0);
    let b = rand_mat(&mut rng, n, 2);
    DescriptorPlant::new(a, b, rand_mat(&mut rng, n, 1), 3).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ode_gains_stabilize_and_use_only_dynamic_states(seed in 0u64..1000) {
        let plant = random_plant(seed);
        let w = identity_weights(4, 2, 1);
        if let Ok(red) = plant.reduce() {
            prop_assume!(red.a.iter().all(|v| v.abs() < 1e3));
            for m in [Method::H2Ode, Method::HinfOde] {
                let g = synthesize(&plant, &w, m).unwrap();
                prop_assert!(g.k.column(3).iter().all(|v| *v == 0.0));
                prop_assert!(spectral_abscissa(&(&red.a + &red.b * g.k_d()), &cfg()).unwrap() < 0.0);
            }
        }
    }

    #[test]
    fn worst_case_respects_ball_and_mask(seed in 0u64..1000, rho in 0.0f64..2.0) {
        let mut plant = random_plant(seed);
        plant.a[(0, 1)] = 0.0;
        plant.a[(2, 0)] = 0.0;
        let w = identity_weights(4, 2, 1);
        let ball = UncertaintyBall::from_plant(&plant, rho, 1e-3);
        let opts = WorstCaseOptions { starts: 2, max_evals_per_start: 60, seed, ..Default::default() };
        let wc = worst_case_perturbation(&plant, &w, &ball, &opts).unwrap();
        prop_assert!(wc.delta.norm() <= rho + 1e-12);
        for i in 0..4 {
            for j in 0..4 {
                if plant.a[(i, j)] == 0.0 {
                    prop_assert_eq!(wc.delta[(i, j)], 0.0);
                }
            }
        }
        prop_assert!(!wc.nominal.cmp_worse(&wc.score).is_gt());
    }

    #[test]
    fn dae_certificate_bounds_closed_loop(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = small_descriptor();
        let a = &base.a + rand_mat(&mut rng, 3, 3) * 0.2;
        let plant = DescriptorPlant::new(a, base.b.clone(), base.b_w.clone(), 2).unwrap();
        let w = identity_weights(3, 2, 1);
        if let Ok(d) = synth_hinf_dae(&plant, &w, &HinfDaeOptions::default()) {
            prop_assert!(max_sym_eigenvalue(&bounded_real_matrix(&plant, &w, &d.s, &d.h, d.lambda)) <= -1e-9);
            let cl = closed_loop_hinf(&plant, &w, &d.gain.k).unwrap();
            prop_assert!(cl <= d.gain.mu.unwrap() * (1.0 + 1e-4), "{} > {:?}", cl, d.gain.mu);
            prop_assert!(closed_loop_abscissa(&plant, &d.gain.k).unwrap() < 0.0);
        }
    }
}
