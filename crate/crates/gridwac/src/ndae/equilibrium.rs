use super::{DaeModel, NdaeError};
use crate::devices::{gen_derivatives, motor_electrical, pv_derivatives, TorqueLaw, GEN_STATES, PV_STATES};
use crate::io::matrices_hash;
use crate::netgrid::{solve_power_flow, PowerFlowOptions, Setpoints};
use crate::numerics::{newton_solve, NewtonOptions};
use crate::{Complex64, Mat, Vector};

/// Equilibrium `(x⁰, u_ref, w)` of the NDAE.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub x: Vector,
    pub u: Vector,
    pub w: Vector,
}

impl OperatingPoint {
    pub fn x_d(&self, n_d: usize) -> Vector {
        self.x.rows(0, n_d).into_owned()
    }

    pub fn x_a(&self, n_d: usize) -> Vector {
        self.x.rows(n_d, self.x.len() - n_d).into_owned()
    }

    /// SHA-256 over the bit patterns of `x`, `u`, `w`.
    pub fn content_hash(&self) -> String {
        let as_mat = |v: &Vector| Mat::from_column_slice(v.len(), 1, v.as_slice());
        matrices_hash(&[&as_mat(&self.x), &as_mat(&self.u), &as_mat(&self.w)])
    }
}

/// Constraint rows that pin the free inputs: voltage magnitude at every
/// unit, the angle reference at the slack bus, and active power elsewhere.
fn setpoint_rows(model: &DaeModel, x: &[f64], u: &[f64]) -> Result<Vec<f64>, NdaeError> {
    let case = &model.case;
    let l = &model.layout;
    let v = model.voltages(x);
    let slack = case.slack_bus()?;
    let mut rows = Vec::with_capacity(l.n_u());
    for (g, spec) in case.generators.iter().enumerate() {
        let k = l.bus_position(spec.bus).expect("validated bus");
        rows.push(v[k].norm() - spec.v_set);
        if spec.bus == slack {
            rows.push(v[k].im);
        } else {
            let o = l.gen_offset(g);
            let (iv, ip) = l.gen_inputs(g);
            let (_, i) = gen_derivatives(&spec.params, &x[o..o + GEN_STATES], v[k], [u[iv], u[ip]], 1.0)?;
            rows.push((v[k] * i.conj()).re - spec.p_set);
        }
    }
    for (p, spec) in case.pv_plants.iter().enumerate() {
        let k = l.bus_position(spec.bus).expect("validated bus");
        rows.push(v[k].norm() - spec.v_set);
        rows.push(u[l.pv_inputs(p).1] - spec.p_set);
    }
    Ok(rows)
}

fn joint_residual(model: &DaeModel, z: &Vector, w: &Vector) -> Vector {
    let n = model.layout.n();
    let (x, u) = (&z.as_slice()[..n], &z.as_slice()[n..]);
    let Ok(f) = model.residual(x, u, w.as_slice()) else {
        return Vector::from_element(z.len(), f64::NAN);
    };
    let Ok(c) = setpoint_rows(model, x, u) else {
        return Vector::from_element(z.len(), f64::NAN);
    };
    let mut out = Vector::zeros(z.len());
    out.rows_mut(0, n).copy_from(&f);
    out.rows_mut(n, c.len()).copy_from_slice(&c);
    out
}

fn newton_opts() -> NewtonOptions {
    NewtonOptions { tol: 1e-11, max_iter: 40, fd_step: 1e-7 }
}

/// Slip at which the motor torque meets its load on the stable branch.
fn motor_slip(model: &DaeModel, m: usize, v: Complex64) -> Result<f64, NdaeError> {
    let p = &model.case.motors[m].params;
    let t_m = match p.torque {
        TorqueLaw::Constant { t_m } => t_m,
    };
    let excess = |s: f64| motor_electrical(p, s, v).map(|e| e.torque - t_m);
    let mut lo = 0.0;
    let mut hi = None;
    let mut s = 1e-6;
    while s < 1.0 {
        if excess(s)? > 0.0 {
            hi = Some(s);
            break;
        }
        lo = s;
        s *= 1.2;
    }
    let mut hi = hi.ok_or_else(|| NdaeError::Equilibrium(format!("motor {m} stalls: load torque above breakdown")))?;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if excess(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Seed from the power flow and per-device local solves.
pub fn seed_equilibrium(model: &DaeModel, w: &Vector) -> Result<OperatingPoint, NdaeError> {
    let case = &model.case;
    let l = &model.layout;
    if w.len() != l.n_w() {
        return Err(NdaeError::Dimension(format!("w has {} entries, expected {}", w.len(), l.n_w())));
    }
    let mut demand = vec![Complex64::new(0.0, 0.0); l.n_bus];
    for (k, &(bus, _)) in model.cp_load_buses().iter().enumerate() {
        demand[bus] += model.cp_demand(k, w[l.n_pv + k]);
    }
    let nominal = case.nominal_demand()?;
    let cp_nominal = {
        let mut d = vec![Complex64::new(0.0, 0.0); l.n_bus];
        for &(bus, s) in model.cp_load_buses() {
            d[bus] += s;
        }
        d
    };
    for k in 0..l.n_bus {
        demand[k] += nominal[k] - cp_nominal[k];
    }
    let pf = solve_power_flow(case, &demand, &Setpoints::from_case(case)?, &PowerFlowOptions { tol: 1e-11, max_iter: 30 })?;
    if !pf.converged {
        return Err(NdaeError::Equilibrium(format!("power flow mismatch {:e}", pf.mismatch)));
    }
    let i_bus = pf.currents(model.admittance());
    let mut units_at = vec![0usize; l.n_bus];
    for &b in l.gen_buses.iter().chain(&l.pv_buses) {
        units_at[l.bus_position(b).unwrap()] += 1;
    }
    let unit_current = |k: usize| ((pf.s_inj[k] + demand[k]) / pf.v[k]).conj() / units_at[k] as f64;

    let mut x = Vector::zeros(l.n());
    let mut u = Vector::zeros(l.n_u());
    let opts = newton_opts();
    for (g, spec) in case.generators.iter().enumerate() {
        let k = l.bus_position(spec.bus).unwrap();
        let (vk, ik) = (pf.v[k], unit_current(k));
        let p = &spec.params;
        let f = |z: &Vector| {
            let zs = z.as_slice();
            match gen_derivatives(p, &zs[..GEN_STATES], vk, [zs[9], zs[10]], 1.0) {
                Ok((dx, i)) => {
                    let mut r = Vector::zeros(11);
                    r.rows_mut(0, GEN_STATES).copy_from_slice(&dx);
                    r[9] = (i - ik).re;
                    r[10] = (i - ik).im;
                    r
                }
                Err(_) => Vector::from_element(11, f64::NAN),
            }
        };
        let s = vk * ik.conj();
        let d0 = (vk + Complex64::new(0.0, p.x_q) * ik).arg();
        let e_fd = 1.5;
        let z0 = Vector::from_vec(vec![d0, 1.0, 0.8, 0.4, s.re, s.re, e_fd, p.k_f / p.t_f * e_fd, 1.1, 1.1, s.re]);
        let sol = newton_solve(&f, &z0, &opts).map_err(|e| NdaeError::Equilibrium(format!("generator {g} seed: {e}")))?;
        let o = l.gen_offset(g);
        x.rows_mut(o, GEN_STATES).copy_from(&sol.x.rows(0, GEN_STATES));
        let (iv, ip) = l.gen_inputs(g);
        u[iv] = sol.x[9];
        u[ip] = sol.x[10];
    }
    for (pi, spec) in case.pv_plants.iter().enumerate() {
        let k = l.bus_position(spec.bus).unwrap();
        let (vk, ik) = (pf.v[k], unit_current(k));
        let p = &spec.params;
        let irr = w[pi];
        let f = |z: &Vector| {
            let zs = z.as_slice();
            match pv_derivatives(p, &zs[..PV_STATES], vk, [zs[12], zs[13]], irr, 1.0) {
                Ok((dx, i)) => {
                    let mut r = Vector::zeros(14);
                    r.rows_mut(0, PV_STATES).copy_from_slice(&dx);
                    r[12] = (i - ik).re;
                    r[13] = (i - ik).im;
                    r
                }
                Err(_) => Vector::from_element(14, f64::NAN),
            }
        };
        let dc = vk.arg();
        let ig = ik * Complex64::from_polar(1.0, -dc);
        let e0 = p.e_ref * 1.2;
        let z0 = Vector::from_vec(vec![
            e0, ig.re, ig.im + 0.1, vk.norm(), 0.0, dc, spec.p_set, 0.0, 0.0, 0.0, 0.0, 0.0, vk.norm(), spec.p_set,
        ]);
        let sol = newton_solve(&f, &z0, &opts).map_err(|e| NdaeError::Equilibrium(format!("PV plant {pi} seed: {e}")))?;
        let o = l.pv_offset(pi);
        x.rows_mut(o, PV_STATES).copy_from(&sol.x.rows(0, PV_STATES));
        let (iv, ip) = l.pv_inputs(pi);
        u[iv] = sol.x[12];
        u[ip] = sol.x[13];
    }
    for m in 0..l.n_motor {
        let k = l.bus_position(l.motor_buses[m]).unwrap();
        x[l.motor_offset(m)] = 1.0 - motor_slip(model, m, pf.v[k])?;
    }
    for k in 0..l.n_bus {
        x[l.i_re(k)] = i_bus[k].re;
        x[l.i_im(k)] = i_bus[k].im;
        x[l.v_re(k)] = pf.v[k].re;
        x[l.v_im(k)] = pf.v[k].im;
    }
    Ok(OperatingPoint { x, u, w: w.clone() })
}

/// Newton solve of `0 = F(x, u, w)` plus setpoint rows, starting at `seed`.
pub fn refine_equilibrium(model: &DaeModel, seed: &OperatingPoint) -> Result<OperatingPoint, NdaeError> {
    let n = model.layout.n();
    let mut z0 = Vector::zeros(n + model.layout.n_u());
    z0.rows_mut(0, n).copy_from(&seed.x);
    z0.rows_mut(n, seed.u.len()).copy_from(&seed.u);
    let w = seed.w.clone();
    let f = |z: &Vector| joint_residual(model, z, &w);
    let sol = newton_solve(&f, &z0, &newton_opts()).map_err(|e| NdaeError::Equilibrium(e.to_string()))?;
    Ok(OperatingPoint { x: sol.x.rows(0, n).into_owned(), u: sol.x.rows(n, sol.x.len() - n).into_owned(), w })
}

/// Equilibrium for disturbance `w`: power-flow seed, then a joint Newton
/// solve with the unit setpoints as side conditions.
pub fn find_equilibrium(model: &DaeModel, w: &Vector) -> Result<OperatingPoint, NdaeError> {
    let seed = seed_equilibrium(model, w)?;
    let point = refine_equilibrium(model, &seed)?;
    let r = model.residual(point.x.as_slice(), point.u.as_slice(), w.as_slice())?.amax();
    if r > 1e-8 {
        return Err(NdaeError::Equilibrium(format!("residual {r:e} after Newton")));
    }
    Ok(point)
}
