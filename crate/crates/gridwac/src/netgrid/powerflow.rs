use super::{build_admittance, BusKind, CMat, GridCase, NetError};
use crate::Complex64;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Bus specification for the power-flow problem. Powers are net injections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PfBus {
    Slack { vm: f64, va: f64 },
    Pv { p: f64, vm: f64 },
    Pq { p: f64, q: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 30 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    pub v: Vec<Complex64>,
    /// `diag(V) conj(Y V)`.
    pub s_inj: Vec<Complex64>,
    pub converged: bool,
    /// Newton corrections applied.
    pub iterations: usize,
    /// Max absolute P/Q mismatch at the returned iterate.
    pub mismatch: f64,
}

impl PowerFlowSolution {
    /// Bus current injections `Y V`.
    pub fn currents(&self, y: &CMat) -> Vec<Complex64> {
        let v = DVector::from_column_slice(&self.v);
        (y * v).iter().copied().collect()
    }
}

/// Generation setpoints: slack voltage and `(bus id, P, |V|)` per voltage-controlled unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Setpoints {
    pub slack_vm: f64,
    pub pv: Vec<(usize, f64, f64)>,
}

impl Setpoints {
    pub fn from_case(case: &GridCase) -> Result<Self, NetError> {
        let slack = case.slack_bus()?;
        let slack_vm = case
            .generators
            .iter()
            .find(|g| g.bus == slack)
            .map(|g| g.v_set)
            .ok_or_else(|| NetError::Invalid("no generator at slack bus".into()))?;
        let mut pv: Vec<_> = case
            .generators
            .iter()
            .filter(|g| g.bus != slack)
            .map(|g| (g.bus, g.p_set, g.v_set))
            .collect();
        pv.extend(case.pv_plants.iter().map(|p| (p.bus, p.p_set, p.v_set)));
        Ok(Self { slack_vm, pv })
    }
}

fn injections(y: &CMat, v: &[Complex64]) -> Vec<Complex64> {
    let vv = DVector::from_column_slice(v);
    let i = y * &vv;
    v.iter().zip(i.iter()).map(|(a, b)| a * b.conj()).collect()
}

/// Full Newton power flow in polar coordinates from a flat start.
pub fn newton_power_flow(y: &CMat, buses: &[PfBus], opts: &PowerFlowOptions) -> Result<PowerFlowSolution, NetError> {
    let n = buses.len();
    if y.nrows() != n || y.ncols() != n {
        return Err(NetError::Invalid(format!("admittance is {}x{}, {} buses", y.nrows(), y.ncols(), n)));
    }
    let mut vm = vec![1.0; n];
    let mut va = vec![0.0; n];
    let mut angle_idx = Vec::new();
    let mut mag_idx = Vec::new();
    let mut sp = vec![Complex64::new(0.0, 0.0); n];
    for (k, b) in buses.iter().enumerate() {
        match *b {
            PfBus::Slack { vm: m, va: a } => {
                vm[k] = m;
                va[k] = a;
            }
            PfBus::Pv { p, vm: m } => {
                vm[k] = m;
                sp[k] = Complex64::new(p, 0.0);
                angle_idx.push(k);
            }
            PfBus::Pq { p, q } => {
                sp[k] = Complex64::new(p, q);
                angle_idx.push(k);
                mag_idx.push(k);
            }
        }
    }
    let (na, nm) = (angle_idx.len(), mag_idx.len());
    let volts = |vm: &[f64], va: &[f64]| -> Vec<Complex64> {
        vm.iter().zip(va).map(|(&m, &a)| Complex64::from_polar(m, a)).collect()
    };
    let mismatch_of = |s: &[Complex64]| -> DVector<f64> {
        let mut f = DVector::zeros(na + nm);
        for (r, &k) in angle_idx.iter().enumerate() {
            f[r] = sp[k].re - s[k].re;
        }
        for (r, &k) in mag_idx.iter().enumerate() {
            f[na + r] = sp[k].im - s[k].im;
        }
        f
    };

    let mut iterations = 0;
    loop {
        let v = volts(&vm, &va);
        let s = injections(y, &v);
        let f = mismatch_of(&s);
        let err = f.amax();
        if err <= opts.tol || iterations >= opts.max_iter || !err.is_finite() {
            return Ok(PowerFlowSolution { s_inj: s, v, converged: err <= opts.tol, iterations, mismatch: err });
        }
        // dS/dθ = j diag(V) conj(diag(I) − Y diag(V)),
        // dS/d|V| = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|).
        let vv = DVector::from_column_slice(&v);
        let cur = y * &vv;
        let j = Complex64::new(0.0, 1.0);
        let mut jac = DMatrix::<f64>::zeros(na + nm, na + nm);
        let ds_dva = |i: usize, k: usize| -> Complex64 {
            let mut t = -y[(i, k)] * v[k];
            if i == k {
                t += cur[i];
            }
            j * v[i] * t.conj()
        };
        let ds_dvm = |i: usize, k: usize| -> Complex64 {
            let vn = v[k] / v[k].norm();
            let mut t = v[i] * (y[(i, k)] * vn).conj();
            if i == k {
                t += cur[i].conj() * vn;
            }
            t
        };
        for (r, &i) in angle_idx.iter().enumerate() {
            for (c, &k) in angle_idx.iter().enumerate() {
                jac[(r, c)] = ds_dva(i, k).re;
            }
            for (c, &k) in mag_idx.iter().enumerate() {
                jac[(r, na + c)] = ds_dvm(i, k).re;
            }
        }
        for (r, &i) in mag_idx.iter().enumerate() {
            for (c, &k) in angle_idx.iter().enumerate() {
                jac[(na + r, c)] = ds_dva(i, k).im;
            }
            for (c, &k) in mag_idx.iter().enumerate() {
                jac[(na + r, na + c)] = ds_dvm(i, k).im;
            }
        }
        let dz = jac.lu().solve(&f).ok_or(NetError::SingularJacobian(iterations))?;
        for (r, &k) in angle_idx.iter().enumerate() {
            va[k] += dz[r];
        }
        for (r, &k) in mag_idx.iter().enumerate() {
            vm[k] += dz[na + r];
        }
        iterations += 1;
    }
}

/// Power flow of `case` for per-bus complex `demand` (consumption, indexed by
/// bus position) and generation `setpoints`.
pub fn solve_power_flow(
    case: &GridCase,
    demand: &[Complex64],
    setpoints: &Setpoints,
    opts: &PowerFlowOptions,
) -> Result<PowerFlowSolution, NetError> {
    let y = build_admittance(&case.buses, &case.branches)?;
    let pos = case.bus_positions()?;
    if demand.len() != pos.len() {
        return Err(NetError::Invalid(format!("demand has {} entries for {} buses", demand.len(), pos.len())));
    }
    let slack = case.slack_bus()?;
    let mut buses: Vec<PfBus> = demand.iter().map(|d| PfBus::Pq { p: -d.re, q: -d.im }).collect();
    buses[pos[&slack]] = PfBus::Slack { vm: setpoints.slack_vm, va: 0.0 };
    for &(bus, p, vm) in &setpoints.pv {
        let k = *pos.get(&bus).ok_or(NetError::UnknownBus(bus))?;
        if case.buses.iter().any(|b| b.id == bus && b.kind == BusKind::Slack) {
            continue;
        }
        buses[k] = PfBus::Pv { p: p - demand[k].re, vm };
    }
    newton_power_flow(&y, &buses, opts)
}
