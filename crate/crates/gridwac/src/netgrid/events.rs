use super::ybus::bus_positions;
use super::{branch_stamp, build_admittance, BranchSpec, BranchStatus, BusSpec, CMat, NetError};
use crate::Complex64;
use serde::{Deserialize, Serialize};

/// Default fault admittance to ground (pu), a near-bolted fault.
pub const DEFAULT_FAULT_ADMITTANCE: f64 = 1e4;

/// Discrete network event. Branches are addressed by index into the case list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NetworkEvent {
    /// Line-to-ground fault at fraction `alpha` of the branch measured from its `from` end.
    Fault {
        branch: usize,
        alpha: f64,
        #[serde(default = "default_yf")]
        y_f: f64,
    },
    /// Open the `from`-end breaker; the fault stays fed from the `to` end.
    ClearNear { branch: usize },
    /// Open both breakers; the branch is out of service.
    ClearRemote { branch: usize },
    /// Return every branch to its base condition.
    Restore,
}

fn default_yf() -> f64 {
    DEFAULT_FAULT_ADMITTANCE
}

/// Present condition of one branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchCondition {
    Normal,
    Faulted { alpha: f64, y_f: f64 },
    NearOpen { alpha: f64, y_f: f64 },
    Out,
}

/// Network topology with per-branch conditions. Events return new values.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    buses: Vec<BusSpec>,
    branches: Vec<BranchSpec>,
    conditions: Vec<BranchCondition>,
    y: CMat,
}

impl NetworkState {
    pub fn new(buses: &[BusSpec], branches: &[BranchSpec]) -> Result<Self, NetError> {
        let y = build_admittance(buses, branches)?;
        let conditions = branches
            .iter()
            .map(|b| if b.status == BranchStatus::Out { BranchCondition::Out } else { BranchCondition::Normal })
            .collect();
        Ok(Self { buses: buses.to_vec(), branches: branches.to_vec(), conditions, y })
    }

    pub fn admittance(&self) -> &CMat {
        &self.y
    }

    pub fn condition(&self, branch: usize) -> Option<BranchCondition> {
        self.conditions.get(branch).copied()
    }

    /// Apply `event` and return the resulting state; `self` is unchanged.
    pub fn apply(&self, event: &NetworkEvent) -> Result<Self, NetError> {
        let mut next = self.clone();
        match *event {
            NetworkEvent::Restore => return Self::new(&self.buses, &self.branches),
            NetworkEvent::Fault { branch, alpha, y_f } => {
                if !(0.0..=1.0).contains(&alpha) || !alpha.is_finite() {
                    return Err(NetError::FaultLocation(alpha));
                }
                match self.condition(branch).ok_or(NetError::UnknownBranch(branch))? {
                    BranchCondition::Normal => next.conditions[branch] = BranchCondition::Faulted { alpha, y_f },
                    _ => return Err(NetError::BranchOut(branch)),
                }
            }
            NetworkEvent::ClearNear { branch } => match self.condition(branch).ok_or(NetError::UnknownBranch(branch))? {
                BranchCondition::Faulted { alpha, y_f } => next.conditions[branch] = BranchCondition::NearOpen { alpha, y_f },
                BranchCondition::Normal => next.conditions[branch] = BranchCondition::NearOpen { alpha: 0.0, y_f: 0.0 },
                _ => return Err(NetError::BranchOut(branch)),
            },
            NetworkEvent::ClearRemote { branch } => match self.condition(branch).ok_or(NetError::UnknownBranch(branch))? {
                BranchCondition::Out => return Err(NetError::BranchOut(branch)),
                _ => next.conditions[branch] = BranchCondition::Out,
            },
        }
        next.y = next.assemble()?;
        Ok(next)
    }

    fn assemble(&self) -> Result<CMat, NetError> {
        let pos = bus_positions(&self.buses)?;
        let mut y = build_admittance(&self.buses, &self.branches)?;
        for (br, cond) in self.branches.iter().zip(&self.conditions) {
            if br.status == BranchStatus::Out || *cond == BranchCondition::Normal {
                continue;
            }
            let f = *pos.get(&br.from).ok_or(NetError::UnknownBus(br.from))?;
            let t = *pos.get(&br.to).ok_or(NetError::UnknownBus(br.to))?;
            let s = branch_stamp(br);
            y[(f, f)] -= s[0][0];
            y[(f, t)] -= s[0][1];
            y[(t, f)] -= s[1][0];
            y[(t, t)] -= s[1][1];
            let reduced = match *cond {
                BranchCondition::Faulted { alpha, y_f } => split_reduced(br, alpha, y_f, true),
                BranchCondition::NearOpen { alpha, y_f } => split_reduced(br, alpha, y_f, false),
                BranchCondition::Out | BranchCondition::Normal => continue,
            };
            y[(f, f)] += reduced[0][0];
            y[(f, t)] += reduced[0][1];
            y[(t, f)] += reduced[1][0];
            y[(t, t)] += reduced[1][1];
        }
        Ok(y)
    }
}

/// Two-port admittance between the branch ends after splitting at `alpha`,
/// grounding the split node through `y_f` and eliminating internal nodes.
/// With `near_closed = false` the `from`-end breaker is open.
fn split_reduced(br: &BranchSpec, alpha: f64, y_f: f64, near_closed: bool) -> [[Complex64; 2]; 2] {
    let z = Complex64::new(br.r, br.x);
    // Nodes: 0 from bus, 1 to bus, 2 split point, 3 line side of the near breaker.
    let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
    let mut stamp = |a: usize, b: usize, frac: f64| {
        let ys = (z * frac).inv();
        let yh = Complex64::new(0.0, br.b * frac / 2.0);
        m[a][a] += ys + yh;
        m[b][b] += ys + yh;
        m[a][b] -= ys;
        m[b][a] -= ys;
    };
    let line_end = if near_closed { 0 } else { 3 };
    let split = if alpha == 0.0 {
        line_end
    } else if alpha == 1.0 {
        1
    } else {
        2
    };
    if alpha > 0.0 {
        stamp(line_end, split, alpha);
    }
    if alpha < 1.0 {
        stamp(split, 1, 1.0 - alpha);
    }
    m[split][split] += Complex64::new(y_f, 0.0);
    for k in [3, 2] {
        let d = m[k][k];
        if d.norm() == 0.0 {
            continue;
        }
        for a in 0..k {
            for b in 0..k {
                let upd = m[a][k] * m[k][b] / d;
                m[a][b] -= upd;
            }
        }
    }
    [[m[0][0], m[0][1]], [m[1][0], m[1][1]]]
}

/// Value-semantics wrapper over [`NetworkState::apply`].
pub fn apply_network_event(state: &NetworkState, event: &NetworkEvent) -> Result<NetworkState, NetError> {
    state.apply(event)
}
