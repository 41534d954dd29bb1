use super::ybus::bus_positions;
use super::NetError;
use crate::devices::{
    GeneratorParams, MotorParams, PvParams, StaticLoadKind, StaticLoadSpec,
};
use crate::io::sha256_hex;
use crate::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use std::path::Path;

/// Role of a bus in the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BusKind {
    Slack,
    Generator,
    PvPlant,
    Load,
    NonUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusSpec {
    pub id: usize,
    pub kind: BusKind,
    #[serde(default)]
    pub base_kv: f64,
    #[serde(default)]
    pub shunt_g: f64,
    #[serde(default)]
    pub shunt_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BranchStatus {
    #[default]
    In,
    Out,
}

/// Pi-model branch with series impedance `r + jx` and total charging `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub status: BranchStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub bus: usize,
    /// Terminal voltage magnitude setpoint.
    pub v_set: f64,
    /// Active power setpoint, ignored at the slack bus.
    #[serde(default)]
    pub p_set: f64,
    pub params: GeneratorParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvPlantSpec {
    pub bus: usize,
    pub v_set: f64,
    pub p_set: f64,
    /// Nominal irradiance in W/m².
    #[serde(default = "standard_irradiance")]
    pub irradiance: f64,
    pub params: PvParams,
}

fn standard_irradiance() -> f64 {
    1000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorSpec {
    pub bus: usize,
    /// Demand used to seed the power flow.
    pub p_nominal: f64,
    pub q_nominal: f64,
    pub params: MotorParams,
}

/// Complete description of a test system on a common per-unit base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCase {
    pub name: String,
    #[serde(default = "default_base")]
    pub base_mva: f64,
    pub buses: Vec<BusSpec>,
    pub branches: Vec<BranchSpec>,
    #[serde(default)]
    pub generators: Vec<GeneratorSpec>,
    #[serde(default)]
    pub pv_plants: Vec<PvPlantSpec>,
    #[serde(default)]
    pub motors: Vec<MotorSpec>,
    #[serde(default)]
    pub loads: Vec<StaticLoadSpec>,
}

fn default_base() -> f64 {
    100.0
}

impl GridCase {
    pub fn from_json(text: &str) -> Result<Self, NetError> {
        let case: Self = serde_json::from_str(text).map_err(|e| NetError::Parse(e.to_string()))?;
        case.validate()?;
        Ok(case)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| NetError::Parse(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn content_hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("case serializes").as_bytes())
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    /// Map from bus id to matrix position (ascending id order).
    pub fn bus_positions(&self) -> Result<HashMap<usize, usize>, NetError> {
        bus_positions(&self.buses)
    }

    pub fn slack_bus(&self) -> Result<usize, NetError> {
        let slacks: Vec<_> = self.buses.iter().filter(|b| b.kind == BusKind::Slack).collect();
        if slacks.len() != 1 {
            return Err(NetError::SlackCount(slacks.len()));
        }
        Ok(slacks[0].id)
    }

    /// Index of the first in-service branch joining `a` and `b`.
    pub fn branch_index(&self, a: usize, b: usize) -> Option<usize> {
        self.branches
            .iter()
            .position(|br| (br.from == a && br.to == b) || (br.from == b && br.to == a))
    }

    /// Structural checks: ids, references, slack, connectivity, parameters.
    pub fn validate(&self) -> Result<(), NetError> {
        let pos = self.bus_positions()?;
        let slack = self.slack_bus()?;
        for (k, br) in self.branches.iter().enumerate() {
            for id in [br.from, br.to] {
                if !pos.contains_key(&id) {
                    return Err(NetError::UnknownBus(id));
                }
            }
            if br.from == br.to {
                return Err(NetError::SelfLoop(k));
            }
            if br.r == 0.0 && br.x == 0.0 {
                return Err(NetError::ZeroImpedance(k));
            }
        }
        let device_buses = self
            .generators
            .iter()
            .map(|g| g.bus)
            .chain(self.pv_plants.iter().map(|p| p.bus))
            .chain(self.motors.iter().map(|m| m.bus))
            .chain(self.loads.iter().map(|l| l.bus));
        for id in device_buses {
            if !pos.contains_key(&id) {
                return Err(NetError::UnknownBus(id));
            }
        }
        if !self.generators.iter().any(|g| g.bus == slack) {
            return Err(NetError::Invalid(format!("no generator at slack bus {slack}")));
        }
        let inv = |e: crate::devices::DeviceError| NetError::Invalid(e.to_string());
        for g in &self.generators {
            g.params.validate().map_err(inv)?;
        }
        for p in &self.pv_plants {
            p.params.validate().map_err(inv)?;
        }
        for m in &self.motors {
            m.params.validate().map_err(inv)?;
        }
        for l in &self.loads {
            l.validate().map_err(inv)?;
        }
        self.check_connected(&pos, slack)
    }

    fn check_connected(&self, pos: &HashMap<usize, usize>, slack: usize) -> Result<(), NetError> {
        let n = pos.len();
        let mut adj = vec![Vec::new(); n];
        for br in self.branches.iter().filter(|b| b.status == BranchStatus::In) {
            let (f, t) = (pos[&br.from], pos[&br.to]);
            adj[f].push(t);
            adj[t].push(f);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([pos[&slack]]);
        seen[pos[&slack]] = true;
        while let Some(k) = queue.pop_front() {
            for &m in &adj[k] {
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        let mut ids: Vec<_> = pos.iter().collect();
        ids.sort();
        for (&id, &k) in ids {
            if !seen[k] {
                return Err(NetError::Unconnected(id));
            }
        }
        Ok(())
    }

    /// Constant-power loads in case order, as `(bus, P + jQ)`.
    pub fn constant_power_loads(&self) -> Vec<(usize, Complex64)> {
        self.loads
            .iter()
            .filter_map(|l| match l.kind {
                StaticLoadKind::ConstantPower { p, q } => Some((l.bus, Complex64::new(p, q))),
                StaticLoadKind::ConstantImpedance { .. } => None,
            })
            .collect()
    }

    /// Nominal complex demand per bus position: static loads at 1 pu
    /// voltage plus motor nominal draw.
    pub fn nominal_demand(&self) -> Result<Vec<Complex64>, NetError> {
        let pos = self.bus_positions()?;
        let mut d = vec![Complex64::new(0.0, 0.0); pos.len()];
        for l in &self.loads {
            d[pos[&l.bus]] += match l.kind {
                StaticLoadKind::ConstantPower { p, q } => Complex64::new(p, q),
                StaticLoadKind::ConstantImpedance { z_re, z_im } => Complex64::new(z_re, z_im).inv().conj(),
            };
        }
        for m in &self.motors {
            d[pos[&m.bus]] += Complex64::new(m.p_nominal, m.q_nominal);
        }
        Ok(d)
    }

    /// Built-in 9-bus case with one synchronous machine, two PV plants and
    /// a composite load at bus 8.
    pub fn ieee9() -> Self {
        let bus = |id, kind, base_kv| BusSpec { id, kind, base_kv, shunt_g: 0.0, shunt_b: 0.0 };
        let br = |from, to, r, x, b| BranchSpec { from, to, r, x, b, status: BranchStatus::In };
        let z_load = Complex64::new(0.05, 0.02).conj().inv();
        let pv = |bus| PvPlantSpec { bus, v_set: 1.025, p_set: 0.25, irradiance: 1000.0, params: PvParams::default() };
        let cp = |bus, p, q| StaticLoadSpec { bus, kind: StaticLoadKind::ConstantPower { p, q } };
        Self {
            name: "ieee9-pv".into(),
            base_mva: 100.0,
            buses: vec![
                bus(1, BusKind::Slack, 16.5),
                bus(2, BusKind::PvPlant, 18.0),
                bus(3, BusKind::PvPlant, 13.8),
                bus(4, BusKind::NonUnit, 230.0),
                bus(5, BusKind::Load, 230.0),
                bus(6, BusKind::Load, 230.0),
                bus(7, BusKind::NonUnit, 230.0),
                bus(8, BusKind::Load, 230.0),
                bus(9, BusKind::NonUnit, 230.0),
            ],
            branches: vec![
                br(1, 4, 0.0, 0.0576, 0.0),
                br(4, 5, 0.010, 0.085, 0.176),
                br(4, 6, 0.017, 0.092, 0.158),
                br(5, 7, 0.032, 0.161, 0.306),
                br(6, 9, 0.039, 0.170, 0.358),
                br(7, 8, 0.0085, 0.072, 0.149),
                br(8, 9, 0.0119, 0.1008, 0.209),
                br(2, 7, 0.0, 0.0625, 0.0),
                br(3, 9, 0.0, 0.0586, 0.0),
            ],
            generators: vec![GeneratorSpec { bus: 1, v_set: 1.04, p_set: 0.0, params: GeneratorParams::default() }],
            pv_plants: vec![pv(2), pv(3)],
            motors: vec![MotorSpec { bus: 8, p_nominal: 0.10, q_nominal: 0.03, params: MotorParams::default() }],
            loads: vec![
                cp(5, 0.30, 0.10),
                cp(6, 0.22, 0.07),
                cp(8, 0.10, 0.03),
                StaticLoadSpec { bus: 8, kind: StaticLoadKind::ConstantImpedance { z_re: z_load.re, z_im: z_load.im } },
            ],
        }
    }
}
