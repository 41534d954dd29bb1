use super::{positive, DeviceError, OMEGA_B_60HZ};
use crate::Complex64;
use serde::{Deserialize, Serialize};

/// Number of PV plant states.
pub const PV_STATES: usize = 12;

/// Sign pattern of the dq cross-coupling terms in the filter equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `+ω X i_q` in the d equation and `−ω X i_d` in the q equation.
    #[default]
    Standard,
    /// `+ω X` coupling in both axes.
    AsPrinted,
}

/// Grid-forming PV plant parameters (system pu unless noted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvParams {
    /// DC-link capacitance B_C.
    pub b_dc: f64,
    pub r_f: f64,
    pub x_f: f64,
    /// AC filter capacitor susceptance B_c.
    pub b_c: f64,
    /// Damping resistance in series with the filter capacitor.
    pub r_c: f64,
    pub k_p: f64,
    pub tau_s: f64,
    pub k_d: f64,
    pub kappa_pv: f64,
    pub kappa_p: f64,
    pub tau_v: f64,
    pub tau_i: f64,
    /// Array output at 1000 W/m² and E_dc = e_ref.
    pub p_avail: f64,
    #[serde(default = "one")]
    pub e_ref: f64,
    /// Curvature of the array power curve in E_dc.
    #[serde(default = "default_curve")]
    pub curve_k: f64,
    #[serde(default)]
    pub coupling: Coupling,
    #[serde(default = "default_omega_b")]
    pub omega_b: f64,
}

fn one() -> f64 {
    1.0
}

fn default_curve() -> f64 {
    4.0
}

fn default_omega_b() -> f64 {
    OMEGA_B_60HZ
}

impl PvParams {
    /// Reject non-physical parameter sets.
    pub fn validate(&self) -> Result<(), DeviceError> {
        let d = "pv";
        for (name, v) in [
            ("B_C", self.b_dc),
            ("X_f", self.x_f),
            ("B_c", self.b_c),
            ("r_c", self.r_c),
            ("tau_s", self.tau_s),
            ("tau_v", self.tau_v),
            ("tau_i", self.tau_i),
            ("e_ref", self.e_ref),
            ("omega_b", self.omega_b),
        ] {
            positive(d, name, v)?;
        }
        Ok(())
    }
}

/// Array power for irradiance `ir` (W/m²) at DC-link energy `e_dc`.
///
/// Proportional in irradiance, quadratic in E_dc with its maximum at
/// `e_ref`.
pub fn pv_array_power(p: &PvParams, ir: f64, e_dc: f64) -> f64 {
    let e = e_dc / p.e_ref - 1.0;
    p.p_avail * ir / 1000.0 * (1.0 - p.curve_k * e * e)
}

/// PV plant derivatives and injected current.
///
/// State order: `[E_dc, i_df, i_qf, v_dc, v_qc, δ_c, P̃_e, Q̃_e, z_do, z_qo,
/// z_df, z_qf]`; `u = [V_s*, P_s*]`; `ir` is the irradiance in W/m².
pub fn pv_derivatives(
    p: &PvParams,
    x: &[f64],
    v: Complex64,
    u: [f64; 2],
    ir: f64,
    omega0: f64,
) -> Result<([f64; PV_STATES], Complex64), DeviceError> {
    if ir < 0.0 {
        return Err(DeviceError::NegativeIrradiance(ir));
    }
    if x.len() != PV_STATES || x.iter().any(|z| !z.is_finite()) || !v.re.is_finite() || !v.im.is_finite() {
        return Err(DeviceError::NonFinite("pv"));
    }
    let [e_dc, i_df, i_qf, v_dc, v_qc, delta_c, p_t, q_t, z_do, z_qo, z_df, z_qf] =
        [x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], x[8], x[9], x[10], x[11]];
    let (v_set, p_set) = (u[0], u[1]);

    let rot = Complex64::from_polar(1.0, delta_c);
    let vo = v / rot;
    let (v_do, v_qo) = (vo.re, vo.im);
    let ic = (vo - Complex64::new(v_dc, v_qc)) / p.r_c;
    let ig = Complex64::new(i_df, i_qf) - ic;
    let (i_dg, i_qg) = (ig.re, ig.im);
    let p_e = v_do * i_dg + v_qo * i_qg;
    let q_e = v_qo * i_dg - v_do * i_qg;

    let omega_c = 1.0 - p.k_p * (p_t - p_set);
    let v_do_ref = v_set + p.k_d * i_qg;
    let v_qo_ref = 0.0;
    let i_df_ref = p.kappa_pv * (v_do_ref - v_do + z_do + i_dg + ic.re);
    let i_qf_ref = p.kappa_pv * (v_qo_ref - v_qo + z_qo + i_qg + ic.im);
    let v_df = v_do + p.kappa_p * (i_df_ref - i_df) + z_df;
    let v_qf = v_qo + p.kappa_p * (i_qf_ref - i_qf) + z_qf;
    let p_c = v_df * i_df + v_qf * i_qf;

    let sgn = match p.coupling {
        Coupling::Standard => -1.0,
        Coupling::AsPrinted => 1.0,
    };
    let wb = p.omega_b;
    let mut dx = [0.0; PV_STATES];
    dx[0] = (pv_array_power(p, ir, e_dc) - p_c) / p.b_dc;
    dx[1] = wb / p.x_f * (-p.r_f * i_df + omega_c * p.x_f * i_qf + v_df - v_do);
    dx[2] = wb / p.x_f * (-p.r_f * i_qf + sgn * omega_c * p.x_f * i_df + v_qf - v_qo);
    dx[3] = wb / p.b_c * (omega_c * p.b_c * v_qc + i_df - i_dg);
    dx[4] = wb / p.b_c * (sgn * omega_c * p.b_c * v_dc + i_qf - i_qg);
    dx[5] = wb * (omega_c - omega0);
    dx[6] = (p_e - p_t) / p.tau_s;
    dx[7] = (q_e - q_t) / p.tau_s;
    dx[8] = p.kappa_pv / p.tau_v * (v_do_ref - v_do);
    dx[9] = p.kappa_pv / p.tau_v * (v_qo_ref - v_qo);
    dx[10] = p.kappa_p / p.tau_i * (i_df_ref - i_df);
    dx[11] = p.kappa_p / p.tau_i * (i_qf_ref - i_qf);
    Ok((dx, ig * rot))
}

impl Default for PvParams {
    fn default() -> Self {
        Self {
            b_dc: 0.1,
            r_f: 0.01,
            x_f: 0.1,
            b_c: 0.1,
            r_c: 0.2,
            k_p: 0.05,
            tau_s: 0.05,
            k_d: 0.05,
            kappa_pv: 1.0,
            kappa_p: 1.0,
            tau_v: 0.1,
            tau_i: 0.01,
            p_avail: 0.50,
            e_ref: 1.0,
            curve_k: default_curve(),
            coupling: Coupling::Standard,
            omega_b: OMEGA_B_60HZ,
        }
    }
}
