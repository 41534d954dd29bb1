//! Power-grid NDAE modeling, robust wide-area controller synthesis and
//! closed-loop transient simulation.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense kernels (matrix sign, CARE, H∞ norm, eigenvalues).
//! - [`netgrid`]: case description, admittance matrix, power flow, faults.
//! - [`devices`]: generator, grid-forming PV plant, motor and static loads.
//! - [`ndae`]: global assembly, equilibrium, linearization, Kron reduction.
//! - [`sdp`]: small dense interior-point LMI solver.
//! - [`synth`]: H∞-DAE, H∞-ODE, H2-ODE gains and worst-case uncertainty.
//! - [`sim`]: implicit trapezoidal integration, scenarios and metrics.

pub mod devices;
pub mod io;
pub mod ndae;
pub mod netgrid;
pub mod numerics;
pub mod par;
pub mod sdp;
pub mod sim;
pub mod synth;

pub use num_complex::Complex64;

/// Dense real matrix used throughout the crate.
pub type Mat = nalgebra::DMatrix<f64>;
/// Dense real vector used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
