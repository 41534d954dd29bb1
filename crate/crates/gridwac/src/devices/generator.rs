use super::{positive, DeviceError, OMEGA_B_60HZ};
use crate::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Number of generator states: δ, ω, E_q, E_d, T_M, P_v, E_fd, r_f, v_a.
pub const GEN_STATES: usize = 9;

/// Prime mover model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TurbineKind {
    #[default]
    Thermal,
    Hydro,
}

/// Subscript convention of the transient-voltage and exciter equations.
///
/// `Printed` drives `E_d` with the field voltage and writes the exciter as
/// `−(k_e + S_e E_fd − v_a)/t_fd`. `Standard` is the usual two-axis model
/// with `E_fd` driving `E_q` and `−((k_e + S_e) E_fd − v_a)/t_fd`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    #[default]
    Printed,
    Standard,
}

/// Synchronous machine, turbine-governor and exciter parameters (system pu).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub h: f64,
    pub x_d: f64,
    pub x_q: f64,
    pub x_d_p: f64,
    pub x_q_p: f64,
    pub t_do: f64,
    pub t_qo: f64,
    pub t_ch: f64,
    #[serde(default = "default_t_w")]
    pub t_w: f64,
    pub t_v: f64,
    pub r_d: f64,
    pub t_fd: f64,
    pub t_f: f64,
    pub t_a: f64,
    pub k_e: f64,
    pub k_f: f64,
    pub k_a: f64,
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub r_s: f64,
    #[serde(default)]
    pub turbine: TurbineKind,
    #[serde(default)]
    pub convention: Convention,
    #[serde(default = "default_omega_b")]
    pub omega_b: f64,
}

fn default_t_w() -> f64 {
    1.0
}

fn default_omega_b() -> f64 {
    OMEGA_B_60HZ
}

impl GeneratorParams {
    /// Reject non-physical parameter sets.
    pub fn validate(&self) -> Result<(), DeviceError> {
        let d = "generator";
        for (name, v) in [
            ("H", self.h),
            ("x'_d", self.x_d_p),
            ("x'_q", self.x_q_p),
            ("t_do", self.t_do),
            ("t_qo", self.t_qo),
            ("t_ch", self.t_ch),
            ("t_w", self.t_w),
            ("t_v", self.t_v),
            ("R_d", self.r_d),
            ("t_fd", self.t_fd),
            ("t_f", self.t_f),
            ("t_a", self.t_a),
            ("omega_b", self.omega_b),
        ] {
            positive(d, name, v)?;
        }
        Ok(())
    }

    /// Stator currents in the machine frame for terminal voltage `v`.
    pub fn stator_currents(&self, delta: f64, e_q: f64, e_d: f64, v: Complex64) -> (f64, f64) {
        // V_d + jV_q = V e^{-j(δ − π/2)}
        let vdq = v * Complex64::from_polar(1.0, -(delta - FRAC_PI_2));
        let (vd, vq) = (vdq.re, vdq.im);
        // [−r_s  x'_q; −x'_d  −r_s] [i_d; i_q] = [v_d − E_d; v_q − E_q]
        let (m11, m12, m21, m22) = (-self.r_s, self.x_q_p, -self.x_d_p, -self.r_s);
        let det = m11 * m22 - m12 * m21;
        let (r1, r2) = (vd - e_d, vq - e_q);
        ((r1 * m22 - m12 * r2) / det, (m11 * r2 - m21 * r1) / det)
    }
}

/// Generator derivatives and injected current.
///
/// `x` is `[δ, ω, E_q, E_d, T_M, P_v, E_fd, r_f, v_a]`, `u` is `[V*, P_v*]`.
pub fn gen_derivatives(
    p: &GeneratorParams,
    x: &[f64],
    v: Complex64,
    u: [f64; 2],
    omega0: f64,
) -> Result<([f64; GEN_STATES], Complex64), DeviceError> {
    if x.len() != GEN_STATES || x.iter().any(|z| !z.is_finite()) || !v.re.is_finite() || !v.im.is_finite() {
        return Err(DeviceError::NonFinite("generator"));
    }
    let [delta, omega, e_q, e_d, t_m, p_v, e_fd, r_f, v_a] = [x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], x[8]];
    let (v_star, pv_star) = (u[0], u[1]);
    let (i_d, i_q) = p.stator_currents(delta, e_q, e_d, v);
    let current = Complex64::new(i_d, i_q) * Complex64::from_polar(1.0, delta - FRAC_PI_2);
    let t_e = e_d * i_d + e_q * i_q;

    let mut dx = [0.0; GEN_STATES];
    dx[0] = p.omega_b * (omega - omega0);
    dx[1] = (t_m - t_e) / (2.0 * p.h);
    match p.convention {
        Convention::Printed => {
            dx[2] = -(e_q - (p.x_q_p - p.x_q) * i_d) / p.t_qo;
            dx[3] = -(e_d + (p.x_d_p - p.x_d) * i_q - e_fd) / p.t_do;
        }
        Convention::Standard => {
            dx[2] = (-e_q - (p.x_d - p.x_d_p) * i_d + e_fd) / p.t_do;
            dx[3] = (-e_d + (p.x_q - p.x_q_p) * i_q) / p.t_qo;
        }
    }
    dx[5] = -(p_v - pv_star + (omega - 1.0) / p.r_d) / p.t_v;
    dx[4] = match (p.turbine, p.convention) {
        (TurbineKind::Thermal, _) => -(t_m - p_v) / p.t_ch,
        (TurbineKind::Hydro, Convention::Printed) => -(2.0 / p.t_w) * (t_m - p_v + p.t_ch * dx[5]),
        (TurbineKind::Hydro, Convention::Standard) => -(2.0 / p.t_w) * (t_m - p_v + p.t_w * dx[5]),
    };
    let s_e = p.a * (p.b * e_fd).exp();
    dx[6] = match p.convention {
        Convention::Printed => -(p.k_e + s_e * e_fd - v_a) / p.t_fd,
        Convention::Standard => -((p.k_e + s_e) * e_fd - v_a) / p.t_fd,
    };
    dx[7] = -(r_f - p.k_f / p.t_f * e_fd) / p.t_f;
    let v_e = v_star - v.norm() + r_f - p.k_f / p.t_f * e_fd;
    dx[8] = -(v_a - p.k_a * v_e) / p.t_a;
    Ok((dx, current))
}

impl Default for GeneratorParams {
    /// Slack machine of the shipped 9-bus case.
    fn default() -> Self {
        Self {
            h: 23.64,
            x_d: 0.146,
            x_q: 0.0969,
            x_d_p: 0.0608,
            x_q_p: 0.0608,
            t_do: 8.96,
            t_qo: 0.31,
            t_ch: 0.3,
            t_w: default_t_w(),
            t_v: 0.1,
            r_d: 0.05,
            t_fd: 0.314,
            t_f: 0.35,
            t_a: 0.2,
            k_e: 1.0,
            k_f: 0.063,
            k_a: 20.0,
            a: 0.0039,
            b: 1.555,
            r_s: 0.0,
            turbine: TurbineKind::Thermal,
            convention: Convention::Printed,
            omega_b: OMEGA_B_60HZ,
        }
    }
}
