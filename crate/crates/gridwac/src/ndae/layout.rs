use crate::devices::{GEN_STATES, PV_STATES};
use crate::netgrid::GridCase;
use serde::{Deserialize, Serialize};

const GEN_SYMBOLS: [&str; GEN_STATES] = ["delta", "omega", "E_q", "E_d", "T_M", "P_v", "E_fd", "r_f", "v_a"];
const PV_SYMBOLS: [&str; PV_STATES] = [
    "E_dc", "i_df", "i_qf", "v_dc", "v_qc", "delta_c", "P_e", "Q_e", "z_do", "z_qo", "z_df", "z_qf",
];

/// Global ordering of states, inputs and disturbances.
///
/// States: `[x_G | x_R | x_m | I_Re | I_Im | V_Re | V_Im]`. Inputs:
/// `[V*_G | P_v*_G | V_s*_R | P_s*_R]`. Disturbances: `[I_r per plant |
/// P_d per constant-power load]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaeLayout {
    pub n_gen: usize,
    pub n_pv: usize,
    pub n_motor: usize,
    pub n_bus: usize,
    pub n_cp_load: usize,
    /// Bus id of every generator, PV plant and motor, in case order.
    pub gen_buses: Vec<usize>,
    pub pv_buses: Vec<usize>,
    pub motor_buses: Vec<usize>,
    pub cp_load_buses: Vec<usize>,
    /// Bus ids in matrix order.
    pub bus_ids: Vec<usize>,
}

impl DaeLayout {
    pub fn from_case(case: &GridCase) -> Self {
        let mut bus_ids: Vec<usize> = case.buses.iter().map(|b| b.id).collect();
        bus_ids.sort_unstable();
        let cp_load_buses = case.constant_power_loads().iter().map(|(b, _)| *b).collect::<Vec<_>>();
        Self {
            n_gen: case.generators.len(),
            n_pv: case.pv_plants.len(),
            n_motor: case.motors.len(),
            n_bus: case.buses.len(),
            n_cp_load: cp_load_buses.len(),
            gen_buses: case.generators.iter().map(|g| g.bus).collect(),
            pv_buses: case.pv_plants.iter().map(|p| p.bus).collect(),
            motor_buses: case.motors.iter().map(|m| m.bus).collect(),
            cp_load_buses,
            bus_ids,
        }
    }

    pub fn n_d(&self) -> usize {
        GEN_STATES * self.n_gen + PV_STATES * self.n_pv + self.n_motor
    }

    pub fn n_a(&self) -> usize {
        4 * self.n_bus
    }

    pub fn n(&self) -> usize {
        self.n_d() + self.n_a()
    }

    pub fn n_u(&self) -> usize {
        2 * self.n_gen + 2 * self.n_pv
    }

    pub fn n_w(&self) -> usize {
        self.n_pv + self.n_cp_load
    }

    pub fn gen_offset(&self, g: usize) -> usize {
        GEN_STATES * g
    }

    pub fn pv_offset(&self, k: usize) -> usize {
        GEN_STATES * self.n_gen + PV_STATES * k
    }

    pub fn motor_offset(&self, m: usize) -> usize {
        GEN_STATES * self.n_gen + PV_STATES * self.n_pv + m
    }

    pub fn i_re(&self, bus_pos: usize) -> usize {
        self.n_d() + bus_pos
    }

    pub fn i_im(&self, bus_pos: usize) -> usize {
        self.n_d() + self.n_bus + bus_pos
    }

    pub fn v_re(&self, bus_pos: usize) -> usize {
        self.n_d() + 2 * self.n_bus + bus_pos
    }

    pub fn v_im(&self, bus_pos: usize) -> usize {
        self.n_d() + 3 * self.n_bus + bus_pos
    }

    /// Input positions `(V*, P*)` of generator `g`.
    pub fn gen_inputs(&self, g: usize) -> (usize, usize) {
        (g, self.n_gen + g)
    }

    /// Input positions `(V_s*, P_s*)` of PV plant `k`.
    pub fn pv_inputs(&self, k: usize) -> (usize, usize) {
        (2 * self.n_gen + k, 2 * self.n_gen + self.n_pv + k)
    }

    pub fn bus_position(&self, id: usize) -> Option<usize> {
        self.bus_ids.binary_search(&id).ok()
    }

    /// Positions of the machine speed states (generator ω).
    pub fn gen_speed_indices(&self) -> Vec<usize> {
        (0..self.n_gen).map(|g| self.gen_offset(g) + 1).collect()
    }

    pub fn gen_angle_indices(&self) -> Vec<usize> {
        (0..self.n_gen).map(|g| self.gen_offset(g)).collect()
    }

    /// Positions of the inverter angle states δ_c.
    pub fn pv_angle_indices(&self) -> Vec<usize> {
        (0..self.n_pv).map(|k| self.pv_offset(k) + 5).collect()
    }

    pub fn motor_speed_indices(&self) -> Vec<usize> {
        (0..self.n_motor).map(|m| self.motor_offset(m)).collect()
    }

    /// Names like `gen1.omega`, `pv2.E_dc`, `motor8.omega_m`, `bus5.V_Re`.
    pub fn state_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n());
        for &b in &self.gen_buses {
            names.extend(GEN_SYMBOLS.iter().map(|s| format!("gen{b}.{s}")));
        }
        for &b in &self.pv_buses {
            names.extend(PV_SYMBOLS.iter().map(|s| format!("pv{b}.{s}")));
        }
        for &b in &self.motor_buses {
            names.push(format!("motor{b}.omega_m"));
        }
        for part in ["I_Re", "I_Im", "V_Re", "V_Im"] {
            names.extend(self.bus_ids.iter().map(|b| format!("bus{b}.{part}")));
        }
        names
    }

    pub fn input_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_u());
        names.extend(self.gen_buses.iter().map(|b| format!("gen{b}.V_ref")));
        names.extend(self.gen_buses.iter().map(|b| format!("gen{b}.P_ref")));
        names.extend(self.pv_buses.iter().map(|b| format!("pv{b}.V_ref")));
        names.extend(self.pv_buses.iter().map(|b| format!("pv{b}.P_ref")));
        names
    }

    pub fn disturbance_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.pv_buses.iter().map(|b| format!("pv{b}.I_r")).collect();
        names.extend(self.cp_load_buses.iter().map(|b| format!("load{b}.P_d")));
        names
    }
}
