use super::scenario::Action;
use super::{Outcome, Scenario, SimError, SolverStats, Trajectory};
use crate::ndae::{jacobian_fd, DaeSystem, NdaeError, OperatingPoint};
use crate::netgrid::{CMat, NetworkState};
use crate::par::Exec;
use crate::synth::{ControllerGain, PerformanceWeights};
use crate::{Mat, Vector};
use nalgebra::{Dyn, LU};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// `u_cl = u_ref + K (x − x⁰)`.
pub fn closed_loop_input(k: &Mat, x: &Vector, point: &OperatingPoint) -> Vector {
    &point.u + k * (x - &point.x)
}

/// State feedback with optional per-input box limits.
#[derive(Debug, Clone, PartialEq)]
pub struct Feedback {
    pub k: Mat,
    pub limits: Option<Vec<(f64, f64)>>,
}

impl Feedback {
    pub fn new(k: Mat) -> Self {
        Self { k, limits: None }
    }

    pub fn from_gain(g: &ControllerGain) -> Self {
        Self::new(g.k.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions {
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Any `|x_i|` above this ends the run as diverged.
    pub guard: f64,
    /// Largest admissible spread of machine angles.
    pub angle_spread: f64,
    pub weights: Option<PerformanceWeights>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { newton_tol: 1e-9, max_newton: 12, guard: 1e3, angle_spread: 2.0 * PI, weights: None }
    }
}

/// Step-size limits and output grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub horizon: f64,
    pub dt: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub output_dt: f64,
}

impl StepControl {
    /// Fixed step `dt`, sampled every step.
    pub fn fixed(horizon: f64, dt: f64) -> Self {
        Self { horizon, dt, dt_min: dt, dt_max: dt, output_dt: dt }
    }
}

impl From<&Scenario> for StepControl {
    fn from(s: &Scenario) -> Self {
        Self { horizon: s.horizon, dt: s.dt, dt_min: s.dt_min, dt_max: s.dt_max, output_dt: s.output_dt }
    }
}

type Rhs<'r> = dyn Fn(&Vector) -> Result<Vector, NdaeError> + Sync + 'r;

/// Newton machinery of the trapezoidal step, shared by every caller.
struct Core {
    n_d: usize,
    tol: f64,
    max_newton: usize,
    jac: Mat,
    jac_fresh: bool,
    have_jac: bool,
    iter: Option<(f64, LU<f64, Dyn, Dyn>)>,
    stats: SolverStats,
}

/// Outcome of advancing to a breakpoint.
enum Advance {
    Reached,
    Diverged,
    Failed,
}

fn amax_range(v: &Vector, lo: usize, hi: usize) -> f64 {
    if hi > lo {
        v.rows(lo, hi - lo).amax()
    } else {
        0.0
    }
}

impl Core {
    fn new(n: usize, n_d: usize, tol: f64, max_newton: usize) -> Self {
        Self {
            n_d,
            tol,
            max_newton,
            jac: Mat::zeros(n, n),
            jac_fresh: false,
            have_jac: false,
            iter: None,
            stats: SolverStats { min_step: f64::INFINITY, ..SolverStats::default() },
        }
    }

    fn invalidate(&mut self) {
        self.jac_fresh = false;
        self.iter = None;
    }

    fn refresh(&mut self, rhs: &Rhs, x: &Vector) -> Result<(), NdaeError> {
        let n = x.len();
        self.jac = jacobian_fd(|xs| rhs(&Vector::from_column_slice(xs)), x.as_slice(), n, Exec::Sequential)?;
        self.jac_fresh = true;
        self.have_jac = true;
        self.iter = None;
        self.stats.jacobian_updates += 1;
        Ok(())
    }

    /// `[I − (h/2) J_d; J_a]`, factored once per `(J, h)`.
    fn iteration_matrix(&mut self, h: f64) -> &LU<f64, Dyn, Dyn> {
        if self.iter.as_ref().map(|(hh, _)| *hh != h).unwrap_or(true) {
            let mut m = self.jac.clone();
            for i in 0..self.n_d {
                for j in 0..m.ncols() {
                    m[(i, j)] *= -0.5 * h;
                }
                m[(i, i)] += 1.0;
            }
            self.iter = Some((h, m.lu()));
        }
        &self.iter.as_ref().expect("factored above").1
    }

    /// Newton on `G(X) = [X_d − x_d − (h/2)(f_d + F_d(X)); F_a(X)]`.
    fn newton(&mut self, rhs: &Rhs, x: &Vector, f: &Vector, h: f64, guess: Vector) -> Option<(Vector, Vector, usize)> {
        let mut xn = guess;
        let mut prev = f64::INFINITY;
        for it in 0..=self.max_newton {
            let fx = rhs(&xn).ok()?;
            let mut g = fx.clone();
            for i in 0..self.n_d {
                g[i] = xn[i] - x[i] - 0.5 * h * (f[i] + fx[i]);
            }
            let r = g.amax();
            if r <= self.tol {
                self.stats.newton_iterations += it;
                return Some((xn, fx, it));
            }
            if it == self.max_newton || !r.is_finite() || (it >= 2 && r > prev) {
                self.stats.newton_iterations += it;
                return None;
            }
            prev = r;
            let dx = self.iteration_matrix(h).solve(&g)?;
            xn -= dx;
        }
        None
    }

    /// Re-solve the algebraic rows with the differential states frozen.
    fn reinit(&mut self, rhs: &Rhs, x: &mut Vector, stale: bool) -> Result<Vector, NdaeError> {
        let (nd, n) = (self.n_d, x.len());
        let na = n - nd;
        for attempt in 0..2 {
            if !self.have_jac || (attempt == 0 && stale) || (attempt == 1 && !self.jac_fresh) {
                self.refresh(rhs, x)?;
            }
            let lu = self.jac.view((nd, nd), (na, na)).into_owned().lu();
            let mut xa = x.clone();
            let mut f = rhs(&xa)?;
            let mut r = amax_range(&f, nd, n);
            for _ in 0..40 {
                if r <= self.tol {
                    *x = xa;
                    self.stats.max_algebraic_residual = self.stats.max_algebraic_residual.max(r);
                    return Ok(f);
                }
                if !r.is_finite() {
                    break;
                }
                let Some(d) = lu.solve(&f.rows(nd, na).into_owned()) else { break };
                let mut lambda = 1.0;
                let mut accepted = false;
                for _ in 0..12 {
                    let mut xt = xa.clone();
                    let mut xs = xt.rows_mut(nd, na);
                    xs -= &d * lambda;
                    if let Ok(ft) = rhs(&xt) {
                        let rt = amax_range(&ft, nd, n);
                        if rt < r {
                            (xa, f, r) = (xt, ft, rt);
                            accepted = true;
                            break;
                        }
                    }
                    lambda *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
        }
        Err(NdaeError::Equilibrium("algebraic reinitialization did not converge".into()))
    }
}

/// Integration state between breakpoints.
struct Walker {
    t: f64,
    x: Vector,
    f: Vector,
    h: f64,
    prev: Option<(Vector, f64)>,
    refresh_next: bool,
}

impl Walker {
    /// Accepted steps until `t = bp`; halves on failure and doubles after
    /// easy steps.
    fn advance(&mut self, core: &mut Core, rhs: &Rhs, bp: f64, ctl: &StepControl, diverged: &dyn Fn(&Vector) -> bool) -> Advance {
        let eps = 1e-12 * ctl.horizon.max(1.0);
        let n = self.x.len();
        while self.t < bp - eps {
            if self.refresh_next {
                if core.refresh(rhs, &self.x).is_err() {
                    return Advance::Failed;
                }
                self.refresh_next = false;
            }
            let rem = bp - self.t;
            let h_try = if rem <= self.h * (1.0 + 1e-6) { rem } else { self.h };
            let guess = match &self.prev {
                Some((xp, hp)) => &self.x + (&self.x - xp) * (h_try / hp),
                None => self.x.clone(),
            };
            match core.newton(rhs, &self.x, &self.f, h_try, guess) {
                Some((xn, fx, its)) => {
                    let r = amax_range(&fx, core.n_d, n);
                    core.stats.max_algebraic_residual = core.stats.max_algebraic_residual.max(r);
                    core.stats.steps += 1;
                    core.stats.min_step = core.stats.min_step.min(h_try);
                    self.prev = Some((std::mem::replace(&mut self.x, xn), h_try));
                    self.f = fx;
                    self.t = if h_try == rem { bp } else { self.t + h_try };
                    core.jac_fresh = false;
                    if its > 6 {
                        self.refresh_next = true;
                    }
                    if h_try == self.h && its <= 4 {
                        self.h = (2.0 * self.h).min(ctl.dt_max);
                    }
                    if diverged(&self.x) {
                        return Advance::Diverged;
                    }
                }
                None => {
                    core.stats.rejected += 1;
                    if !core.jac_fresh {
                        self.refresh_next = true;
                        continue;
                    }
                    self.h *= 0.5;
                    if self.h < ctl.dt_min * (1.0 - 1e-9) {
                        return Advance::Failed;
                    }
                    self.prev = None;
                }
            }
        }
        Advance::Reached
    }
}

/// Trapezoidal integration of `E ẋ = F(x)` with `E = diag(I_{n_d}, 0)`
/// from a consistent `x0`, sampled every `output_dt`.
pub fn integrate_dae<F>(
    rhs: F,
    n_d: usize,
    x0: &Vector,
    ctl: &StepControl,
    tol: f64,
) -> Result<(Vec<f64>, Vec<Vector>, SolverStats), SimError>
where
    F: Fn(&Vector) -> Result<Vector, NdaeError> + Sync,
{
    if !(ctl.dt_min > 0.0 && ctl.dt_min <= ctl.dt && ctl.dt <= ctl.dt_max && ctl.output_dt > 0.0) {
        return Err(SimError::Scenario("invalid step control".into()));
    }
    let n = x0.len();
    let f0 = rhs(x0)?;
    let r0 = amax_range(&f0, n_d, n);
    if r0 > 1e-6 {
        return Err(SimError::InconsistentInitial { residual: r0 });
    }
    let mut core = Core::new(n, n_d, tol, 12);
    let mut wk = Walker { t: 0.0, x: x0.clone(), f: f0, h: ctl.dt, prev: None, refresh_next: true };
    let (mut ts, mut xs) = (vec![0.0], vec![x0.clone()]);
    let mut k: u64 = 1;
    let eps = 1e-12 * ctl.horizon.max(1.0);
    while wk.t < ctl.horizon - eps {
        let bp = ctl.horizon.min(k as f64 * ctl.output_dt);
        match wk.advance(&mut core, &rhs, bp, ctl, &|x: &Vector| x.iter().any(|v| !v.is_finite())) {
            Advance::Reached => {}
            Advance::Diverged => return Err(SimError::Model(NdaeError::NonFinite)),
            Advance::Failed => {
                let partial = Trajectory::from_samples(ts, xs, core.stats, Outcome::SolverFailure { t: wk.t });
                return Err(SimError::NewtonFailure { t: wk.t, partial: Box::new(partial) });
            }
        }
        ts.push(wk.t);
        xs.push(wk.x.clone());
        k += 1;
    }
    Ok((ts, xs, core.stats))
}

struct Noise {
    rng: ChaCha8Rng,
    irr: Vec<f64>,
    load: Vec<f64>,
    meas: Vec<f64>,
}

impl Noise {
    fn new(seed: u64, n_pv: usize, n_cp: usize, n: usize) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), irr: vec![0.0; n_pv], load: vec![0.0; n_cp], meas: vec![0.0; n] }
    }

    fn draw(&mut self) {
        for v in self.irr.iter_mut().chain(self.load.iter_mut()).chain(self.meas.iter_mut()) {
            *v = self.rng.sample(StandardNormal);
        }
    }
}

/// Closed-loop grid residual under the present topology and disturbance.
struct Plant<'a> {
    sys: &'a DaeSystem,
    point: &'a OperatingPoint,
    fb: Option<&'a Feedback>,
    opts: &'a IntegrateOptions,
    y: CMat,
    w: Vector,
    meas: Vector,
}

impl Plant<'_> {
    fn input(&self, x: &Vector) -> Vector {
        let Some(fb) = self.fb else {
            return self.point.u.clone();
        };
        let mut u = &self.point.u + &fb.k * (x + &self.meas - &self.point.x);
        if let Some(lim) = &fb.limits {
            for (ui, &(lo, hi)) in u.iter_mut().zip(lim) {
                *ui = ui.clamp(lo, hi);
            }
        }
        u
    }

    fn rhs(&self, x: &Vector) -> Result<Vector, NdaeError> {
        let u = self.input(x);
        let f = self.sys.model.residual_with(&self.y, x.as_slice(), u.as_slice(), self.w.as_slice())?;
        if f.iter().any(|v| !v.is_finite()) {
            return Err(NdaeError::NonFinite);
        }
        Ok(f)
    }

    /// Apply the scenario disturbance; true when `w` or the measurement
    /// noise changed.
    fn disturb(&mut self, scenario: &Scenario, noise: &Noise, dd: f64, di: f64) -> bool {
        let npv = self.sys.layout().n_pv;
        let w0 = &self.point.w;
        let spec = &scenario.noise;
        let on = spec.enabled;
        let sd = if on { (spec.load_scale * dd.abs()).sqrt() } else { 0.0 };
        let si = if on { (spec.irradiance_scale * di.abs()).sqrt() } else { 0.0 };
        let sm = if on { spec.measurement_var.sqrt() } else { 0.0 };
        let mut w = w0.clone();
        for k in 0..npv {
            w[k] = w0[k] * (1.0 - di + si * noise.irr[k]);
        }
        for j in 0..w.len() - npv {
            w[npv + j] = w0[npv + j] * (1.0 + dd + sd * noise.load[j]);
        }
        let meas = Vector::from_iterator(noise.meas.len(), noise.meas.iter().map(|v| sm * v));
        let changed = w != self.w || meas != self.meas;
        self.w = w;
        self.meas = meas;
        changed
    }

    fn divergence(&self, x: &Vector) -> Option<String> {
        if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !v.is_finite() || v.abs() > self.opts.guard) {
            return Some(format!("state {i} reached {v:e}"));
        }
        let l = self.sys.layout();
        let angles: Vec<f64> = l.gen_angle_indices().into_iter().chain(l.pv_angle_indices()).map(|i| x[i]).collect();
        if angles.len() > 1 {
            let lo = angles.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = angles.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo > self.opts.angle_spread {
                return Some(format!("machine angle spread {:.3} rad", hi - lo));
            }
        }
        None
    }
}

struct Recorder {
    traj: Trajectory,
    b_w_pinv: Option<Mat>,
}

impl Recorder {
    fn push(&mut self, p: &Plant, t: f64, x: &Vector, f: &Vector) {
        let u = p.input(x);
        if let (Some(wts), Some(pinv)) = (&p.opts.weights, &self.b_w_pinv) {
            let sys = p.sys;
            let dx = x - &p.point.x;
            let du = &u - &p.point.u;
            let dw = &p.w - &p.point.w;
            let rem = f - &sys.a * &dx - &sys.b * &du - &sys.b_w * &dw;
            let wf = pinv * rem;
            let mut wt = Vector::zeros(dw.len() + wf.len());
            wt.rows_mut(0, dw.len()).copy_from(&dw);
            wt.rows_mut(dw.len(), wf.len()).copy_from(&wf);
            self.traj.z1.push(&wts.c * &dx + &wts.d * &du + &wts.d_w * &dw);
            self.traj.w_tilde.push(wt);
        }
        self.traj.t.push(t);
        self.traj.x.push(x.clone());
        self.traj.u.push(u);
        self.traj.w.push(p.w.clone());
    }

    fn finish(mut self, core: Core, outcome: Outcome) -> Trajectory {
        self.traj.stats = core.stats;
        self.traj.outcome = outcome;
        self.traj
    }
}

/// Trapezoidal integration of the closed loop over `scenario`.
///
/// Steps start at `scenario.dt`, halve on Newton failure down to
/// `dt_min` and double after easy steps up to `dt_max`. Events, noise
/// holds and output samples are hit exactly; whenever the network or the
/// disturbance changes the algebraic states are re-solved before the
/// next step.
pub fn integrate(
    system: &DaeSystem,
    point: &OperatingPoint,
    feedback: Option<&Feedback>,
    scenario: &Scenario,
    opts: &IntegrateOptions,
) -> Result<Trajectory, SimError> {
    scenario.validate()?;
    let l = system.layout();
    let (n, nd) = (system.n(), system.n_d());
    if point.x.len() != n || point.u.len() != system.n_u() || point.w.len() != system.n_w() {
        return Err(SimError::Dimension("operating point does not match the system".into()));
    }
    if let Some(fb) = feedback {
        if fb.k.shape() != (system.n_u(), n) {
            return Err(SimError::Dimension(format!("gain is {:?}, expected ({}, {n})", fb.k.shape(), system.n_u())));
        }
    }
    if let Some(w) = &opts.weights {
        if w.c.ncols() != n || w.d.shape() != (w.c.nrows(), system.n_u()) || w.d_w.shape() != (w.c.nrows(), system.n_w()) {
            return Err(SimError::Dimension("performance weights do not match the system".into()));
        }
    }
    let case = &system.model.case;
    let mut net = NetworkState::new(&case.buses, &case.branches)?;
    let mut plant =
        Plant { sys: system, point, fb: feedback, opts, y: net.admittance().clone(), w: point.w.clone(), meas: Vector::zeros(n) };
    let mut core = Core::new(n, nd, opts.newton_tol, opts.max_newton);
    let mut noise = Noise::new(scenario.seed, l.n_pv, system.n_w() - l.n_pv, n);
    let mut rec = Recorder {
        traj: Trajectory::from_samples(Vec::new(), Vec::new(), SolverStats::default(), Outcome::Completed),
        b_w_pinv: opts.weights.as_ref().and_then(|_| system.b_w.clone().pseudo_inverse(1e-12).ok()),
    };

    let f0 = plant.rhs(&point.x)?;
    let r0 = amax_range(&f0, nd, n);
    if r0 > 1e-6 {
        return Err(SimError::InconsistentInitial { residual: r0 });
    }

    let ctl = StepControl::from(scenario);
    let timeline = scenario.timeline();
    let hold = scenario.noise.hold;
    let noisy = scenario.noise.enabled;
    let eps = 1e-12 * ctl.horizon.max(1.0);
    let (mut dd, mut di) = (0.0, 0.0);
    let (mut ie, mut ks, mut kh) = (0usize, 0u64, 0u64);
    let mut wk = Walker { t: 0.0, x: point.x.clone(), f: f0, h: ctl.dt, prev: None, refresh_next: true };

    loop {
        let t = wk.t;
        let mut changed = false;
        let mut net_changed = false;
        while ie < timeline.len() && timeline[ie].0 <= t + eps {
            match timeline[ie].1 {
                Action::Load(d) => dd = d,
                Action::Irradiance(d) => di = d,
                Action::Network(ev) => {
                    net = net.apply(&ev)?;
                    plant.y = net.admittance().clone();
                    core.invalidate();
                    net_changed = true;
                }
            }
            if rec.traj.event_times.last() != Some(&timeline[ie].0) {
                rec.traj.event_times.push(timeline[ie].0);
            }
            changed = true;
            ie += 1;
        }
        if noisy && (kh as f64) * hold <= t + eps {
            noise.draw();
            kh += 1;
            changed = true;
        }
        let dist_changed = changed && plant.disturb(scenario, &noise, dd, di);
        if dist_changed || net_changed {
            let rhs = |x: &Vector| plant.rhs(x);
            match core.reinit(&rhs, &mut wk.x, net_changed) {
                Ok(fx) => wk.f = fx,
                Err(_) => {
                    rec.push(&plant, t, &wk.x, &wk.f);
                    let traj = rec.finish(core, Outcome::SolverFailure { t });
                    return Err(SimError::NewtonFailure { t, partial: Box::new(traj) });
                }
            }
            wk.prev = None;
            wk.refresh_next |= net_changed;
        }
        if (ks as f64) * ctl.output_dt <= t + eps {
            rec.push(&plant, t, &wk.x, &wk.f);
            ks += 1;
        }
        if let Some(reason) = plant.divergence(&wk.x) {
            if rec.traj.t.last() != Some(&t) {
                rec.push(&plant, t, &wk.x, &wk.f);
            }
            return Ok(rec.finish(core, Outcome::Diverged { t, reason }));
        }
        if t >= ctl.horizon - eps {
            return Ok(rec.finish(core, Outcome::Completed));
        }

        let mut bp = ctl.horizon.min(ks as f64 * ctl.output_dt);
        if ie < timeline.len() {
            bp = bp.min(timeline[ie].0);
        }
        if noisy {
            bp = bp.min(kh as f64 * hold);
        }
        let rhs = |x: &Vector| plant.rhs(x);
        let div = |x: &Vector| plant.divergence(x).is_some();
        match wk.advance(&mut core, &rhs, bp, &ctl, &div) {
            Advance::Reached | Advance::Diverged => {}
            Advance::Failed => {
                let t = wk.t;
                rec.push(&plant, t, &wk.x, &wk.f);
                let traj = rec.finish(core, Outcome::SolverFailure { t });
                return Err(SimError::NewtonFailure { t, partial: Box::new(traj) });
            }
        }
    }
}
