//! Per-device nonlinear dynamics.
//!
//! Each evaluator takes the device state, its terminal voltage phasor
//! (network frame, system per-unit) and its inputs, and returns the state
//! derivatives together with the current phasor the device injects into
//! the network.

mod generator;
mod load;
mod motor;
mod pv;

pub use generator::{gen_derivatives, Convention, GeneratorParams, TurbineKind, GEN_STATES};
pub use load::{static_load_residual, StaticLoadKind, StaticLoadSpec};
pub use motor::{motor_derivative, motor_electrical, MotorElectrical, MotorParams, TorqueLaw};
pub use pv::{pv_array_power, pv_derivatives, Coupling, PvParams, PV_STATES};

use thiserror::Error;

/// Base angular frequency (rad/s) for a 60 Hz system.
pub const OMEGA_B_60HZ: f64 = 120.0 * std::f64::consts::PI;

/// Device-level failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("{device}: parameter `{name}` must be positive (got {value})")]
    NonPositive { device: &'static str, name: &'static str, value: f64 },
    #[error("{0}: non-finite state or input")]
    NonFinite(&'static str),
    #[error("negative irradiance {0}")]
    NegativeIrradiance(f64),
    #[error("motor slip singularity: zero slip with zero rotor resistance")]
    SlipSingularity,
    #[error("impedance load with zero impedance")]
    ZeroImpedance,
}

pub(crate) fn positive(device: &'static str, name: &'static str, value: f64) -> Result<(), DeviceError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(DeviceError::NonPositive { device, name, value })
    }
}
