use super::DeviceError;
use crate::Complex64;
use serde::{Deserialize, Serialize};

/// Static load model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StaticLoadKind {
    /// Constant power demand `P + jQ`.
    ConstantPower { p: f64, q: f64 },
    /// Constant impedance `Z = re + j im`.
    ConstantImpedance { z_re: f64, z_im: f64 },
}

/// A static load attached to a bus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticLoadSpec {
    pub bus: usize,
    #[serde(flatten)]
    pub kind: StaticLoadKind,
}

impl StaticLoadSpec {
    pub fn validate(&self) -> Result<(), DeviceError> {
        if let StaticLoadKind::ConstantImpedance { z_re, z_im } = self.kind {
            if z_re == 0.0 && z_im == 0.0 {
                return Err(DeviceError::ZeroImpedance);
            }
        }
        Ok(())
    }

    /// Current the load injects into the network (impedance loads only).
    pub fn impedance_injection(&self, v: Complex64) -> Option<Complex64> {
        match self.kind {
            StaticLoadKind::ConstantImpedance { z_re, z_im } => Some(-v / Complex64::new(z_re, z_im)),
            StaticLoadKind::ConstantPower { .. } => None,
        }
    }
}

/// Residual of the load equation for load current `i` (injected into the
/// network) at voltage `v`: `conj(I)·V + (P + jQ)` or `V + I·Z`.
pub fn static_load_residual(spec: &StaticLoadSpec, v: Complex64, i: Complex64) -> Complex64 {
    match spec.kind {
        StaticLoadKind::ConstantPower { p, q } => i.conj() * v + Complex64::new(p, q),
        StaticLoadKind::ConstantImpedance { z_re, z_im } => v + i * Complex64::new(z_re, z_im),
    }
}
