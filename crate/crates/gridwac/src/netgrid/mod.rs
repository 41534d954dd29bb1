//! Network description, admittance matrix, power flow and network events.

mod case;
mod events;
mod powerflow;
mod ybus;

pub use case::{
    BranchSpec, BranchStatus, BusKind, BusSpec, GeneratorSpec, GridCase, MotorSpec, PvPlantSpec,
};
pub use events::{apply_network_event, BranchCondition, NetworkEvent, NetworkState, DEFAULT_FAULT_ADMITTANCE};
pub use powerflow::{
    newton_power_flow, solve_power_flow, PfBus, PowerFlowOptions, PowerFlowSolution, Setpoints,
};
pub use ybus::{branch_stamp, build_admittance, CMat};

use thiserror::Error;

/// Network-level failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("duplicate bus id {0}")]
    DuplicateBus(usize),
    #[error("unknown bus id {0}")]
    UnknownBus(usize),
    #[error("branch {0}: from and to bus are the same")]
    SelfLoop(usize),
    #[error("branch {0}: zero series impedance")]
    ZeroImpedance(usize),
    #[error("expected exactly one slack bus, found {0}")]
    SlackCount(usize),
    #[error("bus {0} is not connected to the slack bus")]
    Unconnected(usize),
    #[error("power-flow Jacobian is singular at iteration {0}")]
    SingularJacobian(usize),
    #[error("branch index {0} out of range")]
    UnknownBranch(usize),
    #[error("branch {0} is out of service")]
    BranchOut(usize),
    #[error("fault location {0} outside [0, 1]")]
    FaultLocation(f64),
    #[error("invalid case: {0}")]
    Invalid(String),
    #[error("case parse error: {0}")]
    Parse(String),
}
