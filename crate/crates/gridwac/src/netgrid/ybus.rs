use super::{BranchSpec, BranchStatus, BusSpec, NetError};
use crate::Complex64;
use nalgebra::DMatrix;
use std::collections::HashMap;

/// Dense complex matrix.
pub type CMat = DMatrix<Complex64>;

/// 2×2 nodal stamp `[[y + jb/2, −y], [−y, y + jb/2]]` of a branch.
pub fn branch_stamp(br: &BranchSpec) -> [[Complex64; 2]; 2] {
    let y = Complex64::new(br.r, br.x).inv();
    let half = Complex64::new(0.0, br.b / 2.0);
    [[y + half, -y], [-y, y + half]]
}

pub(crate) fn bus_positions(buses: &[BusSpec]) -> Result<HashMap<usize, usize>, NetError> {
    let mut ids: Vec<usize> = buses.iter().map(|b| b.id).collect();
    ids.sort_unstable();
    for w in ids.windows(2) {
        if w[0] == w[1] {
            return Err(NetError::DuplicateBus(w[0]));
        }
    }
    Ok(ids.into_iter().enumerate().map(|(k, id)| (id, k)).collect())
}

/// Nodal admittance matrix. Rows follow ascending bus id.
pub fn build_admittance(buses: &[BusSpec], branches: &[BranchSpec]) -> Result<CMat, NetError> {
    let pos = bus_positions(buses)?;
    let n = buses.len();
    let mut y = CMat::zeros(n, n);
    for b in buses {
        let k = pos[&b.id];
        y[(k, k)] += Complex64::new(b.shunt_g, b.shunt_b);
    }
    for (idx, br) in branches.iter().enumerate() {
        let f = *pos.get(&br.from).ok_or(NetError::UnknownBus(br.from))?;
        let t = *pos.get(&br.to).ok_or(NetError::UnknownBus(br.to))?;
        if f == t {
            return Err(NetError::SelfLoop(idx));
        }
        if br.r == 0.0 && br.x == 0.0 {
            return Err(NetError::ZeroImpedance(idx));
        }
        if br.status == BranchStatus::Out {
            continue;
        }
        let s = branch_stamp(br);
        y[(f, f)] += s[0][0];
        y[(f, t)] += s[0][1];
        y[(t, f)] += s[1][0];
        y[(t, t)] += s[1][1];
    }
    Ok(y)
}
