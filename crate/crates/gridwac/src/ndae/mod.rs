//! Global NDAE assembly, equilibria, linearization and Kron reduction.
//!
//! The model is `E ẋ = F(x, u, w)` with `E = diag(I_{n_d}, 0_{n_a})`. After
//! assembly the residual is split as `F = A x + f(x, u, w) + B u + B_w w`
//! where `A`, `B`, `B_w` are the Jacobians at the nominal equilibrium.

mod equilibrium;
mod layout;
mod linear;
mod model;

pub use equilibrium::{find_equilibrium, refine_equilibrium, seed_equilibrium, OperatingPoint};
pub use layout::DaeLayout;
pub use linear::{check_regularity, jacobian_fd, kron_reduce, linearize, Linearization, ReducedSystem, Regularity};
pub use model::DaeModel;

use crate::devices::DeviceError;
use crate::io::matrices_hash;
use crate::netgrid::{GridCase, NetError};
use crate::numerics::NumericsError;
use crate::par::Exec;
use crate::{Mat, Vector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NdaeError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite Jacobian entry")]
    NonFinite,
    #[error("algebraic block is singular (condition estimate {cond:e})")]
    SingularAlgebraic { cond: f64 },
    #[error("equilibrium: {0}")]
    Equilibrium(String),
}

/// Assembled NDAE: residual evaluator, nominal equilibrium and linear parts.
#[derive(Debug, Clone)]
pub struct DaeSystem {
    pub model: DaeModel,
    pub point: OperatingPoint,
    pub a: Mat,
    pub b: Mat,
    pub b_w: Mat,
}

impl DaeSystem {
    pub fn layout(&self) -> &DaeLayout {
        &self.model.layout
    }

    pub fn n_d(&self) -> usize {
        self.model.layout.n_d()
    }

    pub fn n_a(&self) -> usize {
        self.model.layout.n_a()
    }

    pub fn n(&self) -> usize {
        self.model.layout.n()
    }

    pub fn n_u(&self) -> usize {
        self.model.layout.n_u()
    }

    pub fn n_w(&self) -> usize {
        self.model.layout.n_w()
    }

    pub fn e(&self) -> Mat {
        Mat::from_diagonal(&self.model.e_diag())
    }

    /// `f(x, u, w) = F(x, u, w) − A x − B u − B_w w`.
    pub fn nonlinear_part(&self, x: &Vector, u: &Vector, w: &Vector) -> Result<Vector, NdaeError> {
        let full = self.model.residual(x.as_slice(), u.as_slice(), w.as_slice())?;
        Ok(full - &self.a * x - &self.b * u - &self.b_w * w)
    }

    /// `A x + f(x, u, w) + B u + B_w w`.
    pub fn rhs(&self, x: &Vector, u: &Vector, w: &Vector) -> Result<Vector, NdaeError> {
        let f = self.nonlinear_part(x, u, w)?;
        Ok(&self.a * x + f + &self.b * u + &self.b_w * w)
    }

    pub fn reduce(&self) -> Result<ReducedSystem, NdaeError> {
        kron_reduce(&self.a, &self.b, &self.b_w, self.n_d())
    }

    /// Hash over `(A, B, B_w)`; ties gains to the linearization they came from.
    pub fn linear_hash(&self) -> String {
        matrices_hash(&[&self.a, &self.b, &self.b_w])
    }

    pub fn case_hash(&self) -> String {
        self.model.case.content_hash()
    }
}

/// Build the NDAE for `case`, solve the nominal equilibrium and linearize there.
pub fn assemble_system(case: &GridCase) -> Result<DaeSystem, NdaeError> {
    assemble_system_with(case, Exec::default())
}

pub fn assemble_system_with(case: &GridCase, exec: Exec) -> Result<DaeSystem, NdaeError> {
    let model = DaeModel::new(case)?;
    let w = model.nominal_disturbance();
    let point = find_equilibrium(&model, &w)?;
    let lin = linearize(&model, &point, exec)?;
    Ok(DaeSystem { model, point, a: lin.a, b: lin.b, b_w: lin.b_w })
}
