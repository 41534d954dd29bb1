use gridwac::devices::*;
use gridwac::Complex64;
use proptest::prelude::*;
use std::f64::consts::FRAC_PI_2;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn swing_arithmetic() {
    let p = GeneratorParams { h: 3.0, ..Default::default() };
    // δ = π/2 aligns the machine frame with the network frame; E_d = 0,
    // E_q = 1 and v_d = 0.8 x'_q give i_d = 0, i_q = 0.8.
    let x = [FRAC_PI_2, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0];
    let v = c(0.8 * p.x_q_p, 1.0);
    let (dx, _) = gen_derivatives(&p, &x, v, [1.0, 1.0], 1.0).unwrap();
    assert!((dx[1] - 0.2 / 6.0).abs() < 1e-12, "{}", dx[1]);
    assert_eq!(dx[0], 0.0);
}

#[test]
fn exciter_saturation_matches_scalar() {
    let p = GeneratorParams::default();
    let e_fd = 2.0;
    let x = [0.3, 1.0, 0.9, 0.5, 0.5, 0.5, e_fd, 0.0, 1.7];
    let (dx, _) = gen_derivatives(&p, &x, c(1.0, 0.1), [1.0, 0.5], 1.0).unwrap();
    let s_e = 0.0039 * (1.555f64 * 2.0).exp();
    let expect = -(p.k_e + s_e * e_fd - 1.7) / p.t_fd;
    assert!((dx[6] - expect).abs() < 1e-12);
}

#[test]
fn generator_rejects_bad_input() {
    let p = GeneratorParams::default();
    let mut x = [0.0; GEN_STATES];
    x[2] = f64::NAN;
    assert!(gen_derivatives(&p, &x, c(1.0, 0.0), [1.0, 0.0], 1.0).is_err());
    assert!(gen_derivatives(&p, &x[..5], c(1.0, 0.0), [1.0, 0.0], 1.0).is_err());
    let bad = GeneratorParams { t_do: 0.0, ..Default::default() };
    assert!(bad.validate().is_err());
    assert!(GeneratorParams::default().validate().is_ok());
}

proptest! {
    #[test]
    fn air_gap_torque_equals_terminal_power(
        delta in -3.0f64..3.0, e_q in 0.5f64..1.5, e_d in -0.5f64..0.5,
        vr in 0.8f64..1.1, vi in -0.5f64..0.5,
    ) {
        let p = GeneratorParams::default();
        let x = [delta, 1.0, e_q, e_d, 0.5, 0.5, 1.5, 0.2, 1.0];
        let v = c(vr, vi);
        let (_, i) = gen_derivatives(&p, &x, v, [1.0, 0.5], 1.0).unwrap();
        let (i_d, i_q) = p.stator_currents(delta, e_q, e_d, v);
        let t_e = e_d * i_d + e_q * i_q;
        let p_term = (v * i.conj()).re;
        prop_assert!((t_e - p_term).abs() < 1e-10 * (1.0 + t_e.abs()));
    }
}

#[test]
fn droop_frequency() {
    let p = PvParams { k_p: 0.05, ..Default::default() };
    let mut x = [0.0; PV_STATES];
    x[0] = 1.0;
    x[6] = 1.2;
    let (dx, _) = pv_derivatives(&p, &x, c(1.0, 0.0), [1.0, 1.0], 1000.0, 1.0).unwrap();
    // δ̇_c = ω_b (ω_c − 1) with ω_c = 0.99.
    assert!((dx[5] / p.omega_b - (0.99 - 1.0)).abs() < 1e-12);
}

#[test]
fn dc_link_balance() {
    // Choose P_avail so that P_pv = 1.0 at E_dc = e_ref, and converter
    // states giving P_c = 0.9.
    let p = PvParams { b_dc: 0.1, p_avail: 1.0, kappa_pv: 0.0, kappa_p: 0.0, ..Default::default() };
    let mut x = [0.0; PV_STATES];
    x[0] = 1.0;
    x[1] = 0.9; // i_df
    x[10] = 1.0; // z_df, so v_df = v_do + z_df = 1.0 at δ_c = 0, V = 0
    let (dx, _) = pv_derivatives(&p, &x, c(0.0, 0.0), [1.0, 0.0], 1000.0, 1.0).unwrap();
    assert!((dx[0] - 1.0).abs() < 1e-12, "{}", dx[0]);
}

#[test]
fn pv_array_proportional_in_irradiance() {
    let p = PvParams::default();
    let full = pv_array_power(&p, 1000.0, 1.1);
    assert!((pv_array_power(&p, 700.0, 1.1) - 0.7 * full).abs() < 1e-15);
    assert!((pv_array_power(&p, 1000.0, p.e_ref) - p.p_avail).abs() < 1e-15);
}

#[test]
fn pv_rejects_negative_irradiance() {
    let p = PvParams::default();
    let x = [0.0; PV_STATES];
    let r = pv_derivatives(&p, &x, c(1.0, 0.0), [1.0, 0.0], -1.0, 1.0);
    assert_eq!(r.unwrap_err(), DeviceError::NegativeIrradiance(-1.0));
}

#[test]
fn pv_coupling_sign_flips_q_axis_only() {
    let std = PvParams::default();
    let printed = PvParams { coupling: Coupling::AsPrinted, ..Default::default() };
    let x = [1.1, 0.3, -0.2, 1.0, 0.1, 0.05, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0];
    let v = c(1.0, 0.05);
    let (a, _) = pv_derivatives(&std, &x, v, [1.0, 0.25], 1000.0, 1.0).unwrap();
    let (b, _) = pv_derivatives(&printed, &x, v, [1.0, 0.25], 1000.0, 1.0).unwrap();
    for k in [0, 1, 3, 5, 6, 7, 8, 9, 10, 11] {
        assert_eq!(a[k], b[k]);
    }
    assert!((a[2] - b[2]).abs() > 1.0);
    assert!((a[4] - b[4]).abs() > 1.0);
}

/// Ratio of successive central-difference corrections under step halving,
/// or `None` when the differences agree to rounding (polynomial of degree ≤ 2).
fn richardson_ratio(f: impl Fn(f64) -> f64, x: f64, h: f64) -> Option<f64> {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let (d1, d2, d3) = (d(h), d(h / 2.0), d(h / 4.0));
    if (d1 - d2).abs() < 1e-9 * (1.0 + d1.abs()) {
        return None;
    }
    Some((d1 - d2) / (d2 - d3))
}

#[test]
fn device_derivatives_converge_at_second_order() {
    let g = GeneratorParams::default();
    let xg = [0.7, 1.0, 0.9, 0.6, 0.5, 0.5, 1.4, 0.2, 1.1];
    for j in [0, 2, 3, 6] {
        let f = |t: f64| {
            let mut x = xg;
            x[j] = t;
            let (dx, i) = gen_derivatives(&g, &x, c(1.0, 0.2), [1.05, 0.4], 1.0).unwrap();
            dx[1] + dx[6] + i.re
        };
        if let Some(r) = richardson_ratio(f, xg[j], 0.05) {
            assert!((r - 4.0).abs() < 0.2, "gen state {j}: ratio {r}");
        }
    }
    let p = PvParams::default();
    let xp = [1.19, 0.25, 0.49, 1.02, -0.02, 0.008, 0.25, -0.4, 0.0, 0.0, -0.05, 0.03];
    for j in [0, 1, 5, 6] {
        let f = |t: f64| {
            let mut x = xp;
            x[j] = t;
            let (dx, i) = pv_derivatives(&p, &x, c(1.02, 0.05), [1.02, 0.25], 1000.0, 1.0).unwrap();
            dx[0] + dx[1] * 1e-3 + dx[2] * 1e-3 + i.im
        };
        if let Some(r) = richardson_ratio(f, xp[j], 0.05) {
            assert!((r - 4.0).abs() < 0.2, "pv state {j}: ratio {r}");
        }
    }
}

#[test]
fn motor_balance_and_arithmetic() {
    let mut m = MotorParams { h_m: 0.5, ..Default::default() };
    let omega_m = 0.98;
    let el = motor_electrical(&m, 1.0 - omega_m, c(1.0, 0.0)).unwrap();
    m.torque = TorqueLaw::Constant { t_m: el.torque };
    let (dw, i) = motor_derivative(&m, omega_m, c(1.0, 0.0), 1.0).unwrap();
    assert!(dw.abs() < 1e-15);
    assert_eq!(i, -el.stator_current);
    m.torque = TorqueLaw::Constant { t_m: el.torque - 0.1 };
    let (dw, _) = motor_derivative(&m, omega_m, c(1.0, 0.0), 1.0).unwrap();
    assert!((dw - 0.1).abs() < 1e-12);
}

#[test]
fn motor_torque_matches_thevenin() {
    let m = MotorParams::default();
    let s = 0.02;
    for v in [c(1.0, 0.0), c(0.95, -0.2), c(0.5, 0.4)] {
        let el = motor_electrical(&m, s, v).unwrap();
        let den = c(m.r_s, m.x_s + m.x_m);
        let v_th = v * c(0.0, m.x_m) / den;
        let z_th = c(0.0, m.x_m) * c(m.r_s, m.x_s) / den;
        let z = z_th + c(m.r_r / s, m.x_r);
        let t_th = v_th.norm_sqr() * (m.r_r / s) / z.norm_sqr();
        assert!((el.torque - t_th).abs() < 1e-10, "{} vs {}", el.torque, t_th);
    }
}

#[test]
fn motor_slip_singularity() {
    let m = MotorParams { r_r: 0.0, ..Default::default() };
    assert_eq!(motor_derivative(&m, 1.0, c(1.0, 0.0), 1.0).unwrap_err(), DeviceError::SlipSingularity);
    // Zero slip with resistive rotor is regular: no torque, magnetizing current only.
    let el = motor_electrical(&MotorParams::default(), 0.0, c(1.0, 0.0)).unwrap();
    assert_eq!(el.torque, 0.0);
}

#[test]
fn static_load_cases() {
    let z = StaticLoadSpec { bus: 1, kind: StaticLoadKind::ConstantImpedance { z_re: 0.0, z_im: 1.0 } };
    assert!(static_load_residual(&z, c(1.0, 0.0), c(0.0, 1.0)).norm() < 1e-15);
    let pq = StaticLoadSpec { bus: 1, kind: StaticLoadKind::ConstantPower { p: 1.0, q: 0.0 } };
    assert!(static_load_residual(&pq, c(1.0, 0.0), c(-1.0, 0.0)).norm() < 1e-15);
    let zero = StaticLoadSpec { bus: 1, kind: StaticLoadKind::ConstantImpedance { z_re: 0.0, z_im: 0.0 } };
    assert_eq!(zero.validate().unwrap_err(), DeviceError::ZeroImpedance);
}

proptest! {
    #[test]
    fn impedance_load_consistent_points(
        vr in -2.0f64..2.0, vi in -2.0f64..2.0, zr in 0.01f64..5.0, zi in -5.0f64..5.0,
    ) {
        let spec = StaticLoadSpec { bus: 3, kind: StaticLoadKind::ConstantImpedance { z_re: zr, z_im: zi } };
        let v = c(vr, vi);
        let i = spec.impedance_injection(v).unwrap();
        prop_assert!(static_load_residual(&spec, v, i).norm() <= 1e-14 * (1.0 + v.norm()));
    }
}
