use super::{positive, DeviceError};
use crate::Complex64;
use serde::{Deserialize, Serialize};

/// Mechanical load torque as a function of rotor speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TorqueLaw {
    Constant { t_m: f64 },
}

impl TorqueLaw {
    pub fn torque(&self, _omega_m: f64) -> f64 {
        match self {
            TorqueLaw::Constant { t_m } => *t_m,
        }
    }
}

/// Induction motor equivalent circuit and inertia (system pu).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorParams {
    pub h_m: f64,
    pub r_s: f64,
    pub x_s: f64,
    pub r_r: f64,
    pub x_r: f64,
    pub x_m: f64,
    pub torque: TorqueLaw,
}

impl MotorParams {
    /// Reject non-physical parameter sets.
    pub fn validate(&self) -> Result<(), DeviceError> {
        positive("motor", "H_m", self.h_m)?;
        positive("motor", "x_m", self.x_m)?;
        if self.r_r < 0.0 || self.r_s < 0.0 {
            return Err(DeviceError::NonPositive { device: "motor", name: "r", value: self.r_r.min(self.r_s) });
        }
        Ok(())
    }
}

/// Steady-state electrical quantities of the motor at a given slip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorElectrical {
    /// Stator current drawn from the bus.
    pub stator_current: Complex64,
    /// Air-gap torque.
    pub torque: f64,
}

/// Equivalent-circuit current and torque at slip `s` and voltage `v`.
pub fn motor_electrical(p: &MotorParams, s: f64, v: Complex64) -> Result<MotorElectrical, DeviceError> {
    if p.r_r == 0.0 && s == 0.0 {
        return Err(DeviceError::SlipSingularity);
    }
    // Rotor branch admittance s / (r_r + j s x_r), finite at s = 0.
    let y_r = Complex64::new(s, 0.0) / Complex64::new(p.r_r, s * p.x_r);
    let y_m = Complex64::new(0.0, -1.0 / p.x_m);
    let z_in = Complex64::new(p.r_s, p.x_s) + (y_m + y_r).inv();
    let i_s = v / z_in;
    let e_m = i_s / (y_m + y_r);
    let torque = e_m.norm_sqr() * s * p.r_r / (p.r_r * p.r_r + s * s * p.x_r * p.x_r);
    Ok(MotorElectrical { stator_current: i_s, torque })
}

/// Rotor acceleration `(T_e − T_m)/(2H_m)` and the injected current.
pub fn motor_derivative(p: &MotorParams, omega_m: f64, v: Complex64, omega0: f64) -> Result<(f64, Complex64), DeviceError> {
    if !omega_m.is_finite() || !v.re.is_finite() || !v.im.is_finite() {
        return Err(DeviceError::NonFinite("motor"));
    }
    let s = (omega0 - omega_m) / omega0;
    let el = motor_electrical(p, s, v)?;
    let t_m = p.torque.torque(omega_m);
    Ok(((el.torque - t_m) / (2.0 * p.h_m), -el.stator_current))
}

impl Default for MotorParams {
    /// Small induction motor drawing 0.10 pu at nominal voltage.
    fn default() -> Self {
        Self {
            h_m: 0.1,
            r_s: 0.31,
            x_s: 1.0,
            r_r: 0.18,
            x_r: 1.8,
            x_m: 32.0,
            torque: TorqueLaw::Constant { t_m: 0.095_768_020_864_387_61 },
        }
    }
}
