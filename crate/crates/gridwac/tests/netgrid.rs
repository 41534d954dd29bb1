use gridwac::netgrid::*;
use gridwac::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn bus(id: usize, kind: BusKind) -> BusSpec {
    BusSpec { id, kind, base_kv: 230.0, shunt_g: 0.0, shunt_b: 0.0 }
}

fn line(from: usize, to: usize, r: f64, x: f64, b: f64) -> BranchSpec {
    BranchSpec { from, to, r, x, b, status: BranchStatus::In }
}

fn max_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn single_branch_admittance() {
    let buses = [bus(1, BusKind::Slack), bus(2, BusKind::Load)];
    let y = build_admittance(&buses, &[line(1, 2, 0.0, 0.1, 0.0)]).unwrap();
    let expect = CMat::from_row_slice(2, 2, &[c(0.0, -10.0), c(0.0, 10.0), c(0.0, 10.0), c(0.0, -10.0)]);
    assert!(max_diff(&y, &expect) < 1e-12);
}

#[test]
fn shunt_only_admittance() {
    let mut b1 = bus(1, BusKind::Slack);
    b1.shunt_b = 0.5;
    let y = build_admittance(&[b1, bus(2, BusKind::Load)], &[]).unwrap();
    assert_eq!(y[(0, 0)], c(0.0, 0.5));
    assert_eq!(y[(1, 1)], c(0.0, 0.0));
    assert_eq!(y[(0, 1)], c(0.0, 0.0));
}

#[test]
fn admittance_errors() {
    let buses = [bus(1, BusKind::Slack), bus(1, BusKind::Load)];
    assert_eq!(build_admittance(&buses, &[]).unwrap_err(), NetError::DuplicateBus(1));
    let buses = [bus(1, BusKind::Slack), bus(2, BusKind::Load)];
    assert_eq!(build_admittance(&buses, &[line(1, 3, 0.0, 0.1, 0.0)]).unwrap_err(), NetError::UnknownBus(3));
    assert_eq!(build_admittance(&buses, &[line(1, 2, 0.0, 0.0, 0.0)]).unwrap_err(), NetError::ZeroImpedance(0));
    assert_eq!(build_admittance(&buses, &[line(2, 2, 0.0, 0.1, 0.0)]).unwrap_err(), NetError::SelfLoop(0));
}

#[test]
fn nine_bus_matches_incidence_oracle() {
    let case = GridCase::ieee9();
    let y = build_admittance(&case.buses, &case.branches).unwrap();
    // Y = Aᵀ diag(y_series) A + diag(Σ incident jb/2) with A the branch-bus incidence.
    let n = case.n_buses();
    let m = case.branches.len();
    let mut inc = CMat::zeros(m, n);
    let mut ys = CMat::zeros(m, m);
    let mut sh = CMat::zeros(n, n);
    for (k, br) in case.branches.iter().enumerate() {
        inc[(k, br.from - 1)] = c(1.0, 0.0);
        inc[(k, br.to - 1)] = c(-1.0, 0.0);
        ys[(k, k)] = c(1.0, 0.0) / c(br.r, br.x);
        sh[(br.from - 1, br.from - 1)] += c(0.0, br.b / 2.0);
        sh[(br.to - 1, br.to - 1)] += c(0.0, br.b / 2.0);
    }
    let oracle = inc.transpose() * ys * &inc + sh;
    assert!(max_diff(&y, &oracle) <= 1e-12);
    assert!(max_diff(&y, &y.transpose()) == 0.0);
}

#[test]
fn flat_no_load_takes_no_iterations() {
    let buses = [bus(1, BusKind::Slack), bus(2, BusKind::Load), bus(3, BusKind::Load)];
    let y = build_admittance(&buses, &[line(1, 2, 0.01, 0.1, 0.0), line(2, 3, 0.02, 0.2, 0.0)]).unwrap();
    let pf = [PfBus::Slack { vm: 1.0, va: 0.0 }, PfBus::Pq { p: 0.0, q: 0.0 }, PfBus::Pv { p: 0.0, vm: 1.0 }];
    let sol = newton_power_flow(&y, &pf, &PowerFlowOptions::default()).unwrap();
    assert!(sol.converged);
    assert_eq!(sol.iterations, 0);
    assert!(sol.v.iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-15));
}

#[test]
fn two_bus_matches_scalar_oracle() {
    let buses = [bus(1, BusKind::Slack), bus(2, BusKind::Load)];
    let y = build_admittance(&buses, &[line(1, 2, 0.0, 0.1, 0.0)]).unwrap();
    let pf = [PfBus::Slack { vm: 1.0, va: 0.0 }, PfBus::Pq { p: -0.5, q: 0.0 }];
    let sol = newton_power_flow(&y, &pf, &PowerFlowOptions::default()).unwrap();
    assert!(sol.converged);
    // Lossless line: P = V sinθ / x and Q = 0 gives V = cosθ, so
    // P(θ) = −sin(2θ)/(2x). Bisect on the high-voltage branch θ ∈ (−π/4, 0).
    let p = |t: f64| -(2.0 * t).sin() / 0.2 - 0.5;
    let (mut lo, mut hi) = (-std::f64::consts::FRAC_PI_4, 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let v2 = Complex64::from_polar(theta.cos(), theta);
    assert!((sol.v[1] - v2).norm() < 1e-8, "{} vs {}", sol.v[1], v2);
}

#[test]
fn nine_bus_power_flow_converges() {
    let case = GridCase::ieee9();
    let demand = case.nominal_demand().unwrap();
    let total: Complex64 = demand.iter().sum();
    assert!((total - c(0.77, 0.25)).norm() < 1e-12);
    let sp = Setpoints::from_case(&case).unwrap();
    let sol = solve_power_flow(&case, &demand, &sp, &PowerFlowOptions::default()).unwrap();
    assert!(sol.converged);
    assert!(sol.mismatch <= 1e-8);
    assert_eq!(sol.v[0].arg(), 0.0);
    assert!((sol.v[0].norm() - 1.04).abs() < 1e-12);
    assert!((sol.v[1].norm() - 1.025).abs() < 1e-12);
    // Residual of S_inj against diag(V) conj(Y V).
    let y = build_admittance(&case.buses, &case.branches).unwrap();
    let i = sol.currents(&y);
    for k in 0..9 {
        assert!((sol.s_inj[k] - sol.v[k] * i[k].conj()).norm() <= 1e-8);
    }
    // Scheduled injections hold at non-slack buses.
    assert!((sol.s_inj[1].re - 0.25).abs() <= 1e-8);
    let d = sol.s_inj[4] + demand[4];
    assert!(d.re.abs().max(d.im.abs()) <= 1e-8);
}

#[test]
fn case_round_trips_through_json() {
    let case = GridCase::ieee9();
    let back = GridCase::from_json(&case.to_json()).unwrap();
    assert_eq!(back, case);
    assert_eq!(back.content_hash(), case.content_hash());
    let mut other = case.clone();
    other.branches[1].x += 1e-6;
    assert_ne!(other.content_hash(), case.content_hash());
}

#[test]
fn shipped_case_file_matches_builtin() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../cases/ieee9.json");
    let shipped = GridCase::load(path).unwrap();
    assert_eq!(shipped, GridCase::ieee9());
}

#[test]
fn case_validation_errors() {
    let mut case = GridCase::ieee9();
    case.buses[1].kind = BusKind::Slack;
    assert_eq!(case.validate().unwrap_err(), NetError::SlackCount(2));
    let mut case = GridCase::ieee9();
    case.branches.retain(|b| !(b.from == 3 || b.to == 3));
    assert_eq!(case.validate().unwrap_err(), NetError::Unconnected(3));
    let mut case = GridCase::ieee9();
    case.motors[0].bus = 42;
    assert_eq!(case.validate().unwrap_err(), NetError::UnknownBus(42));
}

fn one_line_state() -> NetworkState {
    let buses = [bus(1, BusKind::Slack), bus(2, BusKind::Load)];
    NetworkState::new(&buses, &[line(1, 2, 0.0, 0.1, 0.0)]).unwrap()
}

#[test]
fn restore_and_remote_clear() {
    let st = one_line_state();
    let base = st.admittance().clone();
    let faulted = st.apply(&NetworkEvent::Fault { branch: 0, alpha: 0.3, y_f: 1e4 }).unwrap();
    assert!(max_diff(faulted.admittance(), &base) > 1.0);
    assert_eq!(st.admittance(), &base);
    let restored = faulted.apply(&NetworkEvent::Restore).unwrap();
    assert_eq!(restored.admittance(), &base);
    assert_eq!(restored.apply(&NetworkEvent::Restore).unwrap().admittance(), &base);
    let out = st.apply(&NetworkEvent::ClearRemote { branch: 0 }).unwrap();
    assert!(out.admittance().iter().all(|z| z.norm() < 1e-12));
}

#[test]
fn midline_fault_matches_explicit_split() {
    let st = one_line_state();
    let y_f = 1e4;
    let faulted = st.apply(&NetworkEvent::Fault { branch: 0, alpha: 0.5, y_f }).unwrap();
    // Explicit three-bus network: 1 – 3 – 2 with j0.05 sections and y_f at 3.
    let mut b3 = bus(3, BusKind::NonUnit);
    b3.shunt_g = y_f;
    let buses = [bus(1, BusKind::Slack), bus(2, BusKind::Load), b3];
    let y3 = build_admittance(&buses, &[line(1, 3, 0.0, 0.05, 0.0), line(3, 2, 0.0, 0.05, 0.0)]).unwrap();
    let mut oracle = CMat::zeros(2, 2);
    for a in 0..2 {
        for b in 0..2 {
            oracle[(a, b)] = y3[(a, b)] - y3[(a, 2)] * y3[(2, b)] / y3[(2, 2)];
        }
    }
    assert!(max_diff(faulted.admittance(), &oracle) <= 1e-12);
}

#[test]
fn near_clear_leaves_fault_fed_from_far_end() {
    let st = one_line_state();
    let near = st
        .apply(&NetworkEvent::Fault { branch: 0, alpha: 0.25, y_f: 100.0 })
        .unwrap()
        .apply(&NetworkEvent::ClearNear { branch: 0 })
        .unwrap();
    let y = near.admittance();
    assert_eq!(y[(0, 0)], c(0.0, 0.0));
    assert_eq!(y[(0, 1)], c(0.0, 0.0));
    // Bus 2 sees the far section j0.075 in series with y_f to ground.
    let expect = (c(0.0, 0.075) + c(1.0 / 100.0, 0.0)).inv();
    assert!((y[(1, 1)] - expect).norm() < 1e-12);
}

#[test]
fn event_errors() {
    let st = one_line_state();
    assert_eq!(st.apply(&NetworkEvent::Fault { branch: 0, alpha: 1.5, y_f: 1.0 }).unwrap_err(), NetError::FaultLocation(1.5));
    assert_eq!(st.apply(&NetworkEvent::ClearRemote { branch: 3 }).unwrap_err(), NetError::UnknownBranch(3));
    let out = st.apply(&NetworkEvent::ClearRemote { branch: 0 }).unwrap();
    assert_eq!(out.apply(&NetworkEvent::Fault { branch: 0, alpha: 0.5, y_f: 1.0 }).unwrap_err(), NetError::BranchOut(0));
}

proptest! {
    #[test]
    fn fault_then_remote_clear_is_branch_removal(k in 0usize..9, alpha in 0.0f64..=1.0, yf in 1.0f64..1e4) {
        let case = GridCase::ieee9();
        let st = NetworkState::new(&case.buses, &case.branches).unwrap();
        let cleared = apply_network_event(&st, &NetworkEvent::Fault { branch: k, alpha, y_f: yf })
            .and_then(|s| s.apply(&NetworkEvent::ClearRemote { branch: k }))
            .unwrap();
        let mut branches = case.branches.clone();
        branches[k].status = BranchStatus::Out;
        let direct = build_admittance(&case.buses, &branches).unwrap();
        prop_assert!(max_diff(cleared.admittance(), &direct) <= 1e-9);
    }

    #[test]
    fn admittance_is_sum_of_stamps(k in 0usize..9) {
        let case = GridCase::ieee9();
        let y = build_admittance(&case.buses, &case.branches).unwrap();
        let mut without = case.branches.clone();
        without[k].status = BranchStatus::Out;
        let y2 = build_admittance(&case.buses, &without).unwrap();
        let s = branch_stamp(&case.branches[k]);
        let (f, t) = (case.branches[k].from - 1, case.branches[k].to - 1);
        let mut d = &y - &y2;
        d[(f, f)] -= s[0][0];
        d[(f, t)] -= s[0][1];
        d[(t, f)] -= s[1][0];
        d[(t, t)] -= s[1][1];
        prop_assert!(d.iter().all(|z| z.norm() <= 1e-12));
    }
}
