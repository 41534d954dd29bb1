use super::{DaeLayout, NdaeError};
use crate::devices::{
    gen_derivatives, motor_derivative, pv_derivatives, StaticLoadKind, GEN_STATES, PV_STATES,
};
use crate::netgrid::{build_admittance, CMat, GridCase};
use crate::{Complex64, Vector};

/// Nonlinear residual evaluator for a validated case.
///
/// `residual(x, u, w)` returns `F` with `E ẋ = F(x, u, w)`: device
/// derivatives in the differential rows, network and injection balances in
/// the algebraic rows.
#[derive(Debug, Clone)]
pub struct DaeModel {
    pub case: GridCase,
    pub layout: DaeLayout,
    y: CMat,
    gen_pos: Vec<usize>,
    pv_pos: Vec<usize>,
    motor_pos: Vec<usize>,
    /// `(bus position, nominal S)` per constant-power load.
    cp_loads: Vec<(usize, Complex64)>,
    /// `(bus position, Z)` per impedance load.
    z_loads: Vec<(usize, Complex64)>,
    has_cp: Vec<bool>,
}

impl DaeModel {
    pub fn new(case: &GridCase) -> Result<Self, NdaeError> {
        case.validate()?;
        let layout = DaeLayout::from_case(case);
        let y = build_admittance(&case.buses, &case.branches)?;
        let pos = |id: usize| layout.bus_position(id).expect("validated bus id");
        let mut cp_loads = Vec::new();
        let mut z_loads = Vec::new();
        for l in &case.loads {
            match l.kind {
                StaticLoadKind::ConstantPower { p, q } => cp_loads.push((pos(l.bus), Complex64::new(p, q))),
                StaticLoadKind::ConstantImpedance { z_re, z_im } => z_loads.push((pos(l.bus), Complex64::new(z_re, z_im))),
            }
        }
        let mut has_cp = vec![false; layout.n_bus];
        for &(k, _) in &cp_loads {
            has_cp[k] = true;
        }
        Ok(Self {
            gen_pos: case.generators.iter().map(|g| pos(g.bus)).collect(),
            pv_pos: case.pv_plants.iter().map(|p| pos(p.bus)).collect(),
            motor_pos: case.motors.iter().map(|m| pos(m.bus)).collect(),
            case: case.clone(),
            layout,
            y,
            cp_loads,
            z_loads,
            has_cp,
        })
    }

    pub fn admittance(&self) -> &CMat {
        &self.y
    }

    /// Diagonal of the 0/1 structure matrix E.
    pub fn e_diag(&self) -> Vector {
        let (nd, n) = (self.layout.n_d(), self.layout.n());
        Vector::from_fn(n, |i, _| if i < nd { 1.0 } else { 0.0 })
    }

    /// Nominal disturbance: plant irradiance and constant-power demand.
    pub fn nominal_disturbance(&self) -> Vector {
        let mut w: Vec<f64> = self.case.pv_plants.iter().map(|p| p.irradiance).collect();
        w.extend(self.cp_loads.iter().map(|(_, s)| s.re));
        Vector::from_vec(w)
    }

    /// Complex demand of constant-power load `k` for scheduled real power `p_d`
    /// at the nominal power factor.
    pub fn cp_demand(&self, k: usize, p_d: f64) -> Complex64 {
        let s0 = self.cp_loads[k].1;
        if s0.re == 0.0 {
            Complex64::new(p_d, s0.im)
        } else {
            Complex64::new(p_d, p_d * s0.im / s0.re)
        }
    }

    pub(crate) fn cp_load_buses(&self) -> &[(usize, Complex64)] {
        &self.cp_loads
    }

    pub fn voltages(&self, x: &[f64]) -> Vec<Complex64> {
        let l = &self.layout;
        (0..l.n_bus).map(|k| Complex64::new(x[l.v_re(k)], x[l.v_im(k)])).collect()
    }

    pub fn currents(&self, x: &[f64]) -> Vec<Complex64> {
        let l = &self.layout;
        (0..l.n_bus).map(|k| Complex64::new(x[l.i_re(k)], x[l.i_im(k)])).collect()
    }

    pub fn residual(&self, x: &[f64], u: &[f64], w: &[f64]) -> Result<Vector, NdaeError> {
        self.residual_with(&self.y, x, u, w)
    }

    /// Residual under network admittance `y` (post-event topology).
    pub fn residual_with(&self, y: &CMat, x: &[f64], u: &[f64], w: &[f64]) -> Result<Vector, NdaeError> {
        let l = &self.layout;
        if x.len() != l.n() || u.len() != l.n_u() || w.len() != l.n_w() {
            return Err(NdaeError::Dimension(format!(
                "x {}, u {}, w {} (expected {}, {}, {})",
                x.len(),
                u.len(),
                w.len(),
                l.n(),
                l.n_u(),
                l.n_w()
            )));
        }
        let nb = l.n_bus;
        let v = self.voltages(x);
        let cur = self.currents(x);
        let mut inj = vec![Complex64::new(0.0, 0.0); nb];
        let mut f = Vector::zeros(l.n());

        for (g, spec) in self.case.generators.iter().enumerate() {
            let o = l.gen_offset(g);
            let (iv, ip) = l.gen_inputs(g);
            let bus = self.gen_pos[g];
            let (dx, i) = gen_derivatives(&spec.params, &x[o..o + GEN_STATES], v[bus], [u[iv], u[ip]], 1.0)?;
            f.rows_mut(o, GEN_STATES).copy_from_slice(&dx);
            inj[bus] += i;
        }
        for (k, spec) in self.case.pv_plants.iter().enumerate() {
            let o = l.pv_offset(k);
            let (iv, ip) = l.pv_inputs(k);
            let bus = self.pv_pos[k];
            let (dx, i) = pv_derivatives(&spec.params, &x[o..o + PV_STATES], v[bus], [u[iv], u[ip]], w[k], 1.0)?;
            f.rows_mut(o, PV_STATES).copy_from_slice(&dx);
            inj[bus] += i;
        }
        for (m, spec) in self.case.motors.iter().enumerate() {
            let o = l.motor_offset(m);
            let bus = self.motor_pos[m];
            let (dw, i) = motor_derivative(&spec.params, x[o], v[bus], 1.0)?;
            f[o] = dw;
            inj[bus] += i;
        }
        for &(bus, z) in &self.z_loads {
            inj[bus] -= v[bus] / z;
        }

        let mut dev: Vec<Complex64> = (0..nb).map(|k| cur[k] - inj[k]).collect();
        let mut s_bus = vec![Complex64::new(0.0, 0.0); nb];
        for (k, &(bus, _)) in self.cp_loads.iter().enumerate() {
            s_bus[bus] += self.cp_demand(k, w[l.n_pv + k]);
        }
        for k in 0..nb {
            if self.has_cp[k] {
                dev[k] = dev[k].conj() * v[k] + s_bus[k];
            }
        }
        for k in 0..nb {
            let mut yv = Complex64::new(0.0, 0.0);
            for j in 0..nb {
                yv += y[(k, j)] * v[j];
            }
            let net = cur[k] - yv;
            f[l.i_re(k)] = net.re;
            f[l.i_im(k)] = net.im;
            f[l.v_re(k)] = dev[k].re;
            f[l.v_im(k)] = dev[k].im;
        }
        Ok(f)
    }
}
