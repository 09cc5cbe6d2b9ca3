//! Backward Euler in time, monolithic Newton in `(rho, mu)` per step.
//!
//! Unknowns are interleaved per node: `rho_k` at `2k`, `mu_k` at `2k + 1`.
//! The nodal equations are the weak forms tested with nodal hat functions:
//!
//! ```text
//! R1 = M (rho - rho_old) / dt + A mu - C(rho_old, u_old)
//! R2 = T (rho - rho_old) / dt + A rho + w_b F(rho) + w_s F_G(rho) - M mu
//! ```
//!
//! with `M = w_b + w_s`, `T = tau_O w_b + tau_G w_s`, `A` the bulk-surface
//! stiffness and `C` the explicit convection load.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::diagnostics::{DiagnosticsRecord, Recorder, TrajectorySink};
use crate::geometry::{BulkSurfaceField, DualPair, Stiffness, StripMesh};
use crate::initial::InitialData;
use crate::linalg::{BandLu, BandMatrix};
use crate::potentials::{PotentialSpec, Regularization};
use crate::velocity::{sample_velocity, Velocity};
use crate::{Error, Result};

/// Bulk and surface potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialPair {
    pub bulk: PotentialSpec,
    pub surface: PotentialSpec,
}

impl PotentialPair {
    pub fn new(bulk: PotentialSpec, surface: PotentialSpec) -> Self {
        Self { bulk, surface }
    }

    pub fn check_admissible(&self, reg: Regularization) -> Result<()> {
        reg.check_admissible(&self.bulk)?;
        reg.check_admissible(&self.surface)
    }

    /// Nodal loads `w_b (beta_eps + pi)(rho) + w_s (beta_G,eps + pi_G)(rho)`
    /// and their derivatives.
    pub(crate) fn nodal_force(
        &self,
        mesh: &StripMesh,
        reg: Regularization,
        rho: &[f64],
        force: &mut [f64],
        slope: &mut [f64],
    ) {
        let nx = mesh.nx();
        for j in 0..mesh.ny() {
            let wb = mesh.bulk_weight(j);
            let ws = mesh.surface_weight(j);
            for i in 0..nx {
                let k = j * nx + i;
                let r = rho[k];
                let (b, db) = self.bulk.selection(reg, r);
                let mut f = wb * (b + self.bulk.pi(r));
                let mut s = wb * (db + self.bulk.pi_derivative(r));
                if ws > 0.0 {
                    let (g, dg) = self.surface.selection(reg, r);
                    f += ws * (g + self.surface.pi(r));
                    s += ws * (dg + self.surface.pi_derivative(r));
                }
                force[k] = f;
                slope[k] = s;
            }
        }
    }

    /// Pointwise `(beta_eps(rho), beta_G,eps(rho_G))`.
    pub fn zeta(&self, mesh: &StripMesh, reg: Regularization, rho: &BulkSurfaceField) -> Result<DualPair> {
        rho.check(mesh)?;
        let bulk = rho.bulk().iter().map(|&r| self.bulk.selection(reg, r).0).collect();
        let bottom = rho.bottom().iter().map(|&r| self.surface.selection(reg, r).0).collect();
        let top = rho.top().iter().map(|&r| self.surface.selection(reg, r).0).collect();
        DualPair::new(mesh, bulk, bottom, top)
    }

    /// `E = a(rho, rho) / 2 + int f_eps(rho) + int_G f_G,eps(rho_G)`.
    pub fn energy(&self, mesh: &StripMesh, reg: Regularization, rho: &BulkSurfaceField) -> Result<f64> {
        rho.check(mesh)?;
        Ok(energy_raw(&Stiffness::new(mesh), mesh, self, reg, rho.bulk()))
    }
}

pub(crate) fn energy_raw(
    stiffness: &Stiffness,
    mesh: &StripMesh,
    pots: &PotentialPair,
    reg: Regularization,
    rho: &[f64],
) -> f64 {
    let nx = mesh.nx();
    let mut e = 0.5 * stiffness.form(mesh, rho, rho);
    for j in 0..mesh.ny() {
        let wb = mesh.bulk_weight(j);
        let ws = mesh.surface_weight(j);
        let mut row = 0.0;
        for &r in &rho[j * nx..(j + 1) * nx] {
            row += wb * pots.bulk.energy_density(reg, r);
            if ws > 0.0 {
                row += ws * pots.surface.energy_density(reg, r);
            }
        }
        e += row;
    }
    e
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tau_omega: f64,
    pub tau_gamma: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Yosida parameter; `0` evaluates smooth potentials exactly.
    pub eps: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub linear_tol: f64,
    /// Cap on successive dt halvings after a failed step.
    pub max_halvings: u32,
    /// Time between emitted records; `0` records every step.
    pub sample_interval: f64,
}

impl SolverConfig {
    pub fn new(tau_omega: f64, tau_gamma: f64, dt: f64, t_end: f64, eps: f64) -> Result<Self> {
        let cfg = Self {
            tau_omega,
            tau_gamma,
            dt,
            t_end,
            eps,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            linear_tol: 1e-12,
            max_halvings: 10,
            sample_interval: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau_omega", self.tau_omega),
            ("tau_gamma", self.tau_gamma),
            ("dt", self.dt),
            ("newton_tol", self.newton_tol),
            ("linear_tol", self.linear_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter { name, reason: format!("must be positive, got {v}") });
            }
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter { name: "t_end", reason: format!("must be nonnegative, got {}", self.t_end) });
        }
        if !(self.sample_interval >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "sample_interval",
                reason: format!("must be nonnegative, got {}", self.sample_interval),
            });
        }
        if self.newton_max_iter == 0 {
            return Err(Error::InvalidParameter { name: "newton_max_iter", reason: "must be at least 1".into() });
        }
        Regularization::from_eps(self.eps)?;
        Ok(())
    }

    pub fn regularization(&self) -> Result<Regularization> {
        Regularization::from_eps(self.eps)
    }
}

/// A discrete solution snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub rho: BulkSurfaceField,
    pub mu: BulkSurfaceField,
    /// `(beta_eps(rho), beta_G,eps(rho_G))`; bulk and surface selections
    /// differ on the boundary rows, so this is not trace-coupled.
    pub zeta: DualPair,
    pub t: f64,
}

/// Explicit convection loads `sum_k w_b rho_k u_k . (D e_m)_k`.
pub(crate) fn convection_loads(mesh: &StripMesh, rho: &[f64], u1: &[f64], u2: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let (nx, ny) = (mesh.nx(), mesh.ny());
    let (hx, hy) = (mesh.hx(), mesh.hy());
    for j in 0..ny {
        let wb = mesh.bulk_weight(j);
        for i in 0..nx {
            let k = j * nx + i;
            let q = wb * rho[k];
            if u1[k] != 0.0 {
                let c = q * u1[k] / (2.0 * hx);
                out[j * nx + mesh.east(i)] += c;
                out[j * nx + mesh.west(i)] -= c;
            }
            if u2[k] != 0.0 {
                if j == 0 {
                    let c = q * u2[k] / hy;
                    out[k + nx] += c;
                    out[k] -= c;
                } else if j == ny - 1 {
                    let c = q * u2[k] / hy;
                    out[k] += c;
                    out[k - nx] -= c;
                } else {
                    let c = q * u2[k] / (2.0 * hy);
                    out[k + nx] += c;
                    out[k - nx] -= c;
                }
            }
        }
    }
}

/// Counters accumulated by a [`Stepper`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NewtonStats {
    pub steps: usize,
    pub iterations: usize,
    pub factorizations: usize,
    pub halvings: usize,
}

/// Reusable per-mesh workspace for implicit steps.
///
/// The Jacobian factorization is kept across Newton iterations and time steps
/// and only rebuilt when convergence slows down.
pub struct Stepper<'a> {
    mesh: StripMesh,
    pots: &'a PotentialPair,
    velocity: &'a dyn Velocity,
    cfg: SolverConfig,
    reg: Regularization,
    stiffness: Stiffness,
    mass: Vec<f64>,
    visc: Vec<f64>,
    lu: Option<(BandLu, f64)>,
    stats: NewtonStats,
    last_convective_work: f64,
}

struct Eval {
    r: Vec<f64>,
    slope: Vec<f64>,
    norm: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(
        mesh: &StripMesh,
        pots: &'a PotentialPair,
        velocity: &'a dyn Velocity,
        cfg: &SolverConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let reg = cfg.regularization()?;
        pots.check_admissible(reg)?;
        let nx = mesh.nx();
        let mut mass = vec![0.0; mesh.nodes()];
        let mut visc = vec![0.0; mesh.nodes()];
        for j in 0..mesh.ny() {
            let m = mesh.mass_weight(j);
            let t = cfg.tau_omega * mesh.bulk_weight(j) + cfg.tau_gamma * mesh.surface_weight(j);
            mass[j * nx..(j + 1) * nx].iter_mut().for_each(|v| *v = m);
            visc[j * nx..(j + 1) * nx].iter_mut().for_each(|v| *v = t);
        }
        Ok(Self {
            mesh: mesh.clone(),
            pots,
            velocity,
            cfg: *cfg,
            reg,
            stiffness: Stiffness::new(mesh),
            mass,
            visc,
            lu: None,
            stats: NewtonStats::default(),
            last_convective_work: 0.0,
        })
    }

    pub fn stats(&self) -> NewtonStats {
        self.stats
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// `<C(rho_old, u_old), mu_new>` of the last accepted step.
    pub fn last_convective_work(&self) -> f64 {
        self.last_convective_work
    }

    fn convection(&self, rho_old: &[f64], t: f64) -> Result<Option<Vec<f64>>> {
        if self.velocity.is_zero() {
            return Ok(None);
        }
        let u = sample_velocity(self.velocity, &self.mesh, t)?;
        if u.is_zero() {
            return Ok(None);
        }
        let mut c = vec![0.0; self.mesh.nodes()];
        convection_loads(&self.mesh, rho_old, &u.u1, &u.u2, &mut c);
        Ok(Some(c))
    }

    fn evaluate(&self, x: &[f64], rho_old: &[f64], conv: Option<&[f64]>, dt: f64, ev: &mut Eval, scratch: &mut Scratch) {
        let n = self.mesh.nodes();
        for k in 0..n {
            scratch.rho[k] = x[2 * k];
            scratch.mu[k] = x[2 * k + 1];
        }
        self.stiffness.apply(&self.mesh, &scratch.mu, &mut scratch.a_mu);
        self.stiffness.apply(&self.mesh, &scratch.rho, &mut scratch.a_rho);
        self.pots.nodal_force(&self.mesh, self.reg, &scratch.rho, &mut scratch.force, &mut ev.slope);
        let mut norm: f64 = 0.0;
        for k in 0..n {
            let d = (scratch.rho[k] - rho_old[k]) / dt;
            let mut r1 = self.mass[k] * d + scratch.a_mu[k];
            if let Some(c) = conv {
                r1 -= c[k];
            }
            let r2 = self.visc[k] * d + scratch.a_rho[k] + scratch.force[k] - self.mass[k] * scratch.mu[k];
            ev.r[2 * k] = r1;
            ev.r[2 * k + 1] = r2;
            let s = f64::max(r1.abs(), r2.abs()) / self.mass[k];
            norm = if s.is_nan() { f64::NAN } else { norm.max(s) };
        }
        ev.norm = norm;
    }

    fn jacobian(&self, slope: &[f64], dt: f64) -> BandMatrix {
        let n = self.mesh.nodes();
        let w = 2 * self.mesh.nx() + 1;
        let mut jac = BandMatrix::zeros(2 * n, w, w);
        self.stiffness.assemble(&self.mesh, &mut jac, 2, 0, 1, 1.0);
        self.stiffness.assemble(&self.mesh, &mut jac, 2, 1, 0, 1.0);
        for k in 0..n {
            jac.add(2 * k, 2 * k, self.mass[k] / dt);
            jac.add(2 * k + 1, 2 * k, self.visc[k] / dt + slope[k]);
            jac.add(2 * k + 1, 2 * k + 1, -self.mass[k]);
        }
        jac
    }

    fn refactor(&mut self, slope: &[f64], dt: f64) -> Result<()> {
        self.lu = None;
        let lu = self.jacobian(slope, dt).factor()?;
        self.stats.factorizations += 1;
        self.lu = Some((lu, dt));
        Ok(())
    }

    /// One implicit step of size `dt` with no step-size control.
    pub fn step_with_dt(&mut self, state: &State, dt: f64) -> Result<State> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter { name: "dt", reason: format!("must be positive, got {dt}") });
        }
        state.rho.check(&self.mesh)?;
        state.mu.check(&self.mesh)?;
        let n = self.mesh.nodes();
        let rho_old = state.rho.bulk();
        let conv = self.convection(rho_old, state.t)?;
        let mut x = vec![0.0; 2 * n];
        for k in 0..n {
            x[2 * k] = rho_old[k];
            x[2 * k + 1] = state.mu.bulk()[k];
        }
        let mut scratch = Scratch::new(n);
        let mut cur = Eval { r: vec![0.0; 2 * n], slope: vec![0.0; n], norm: 0.0 };
        let mut trial = Eval { r: vec![0.0; 2 * n], slope: vec![0.0; n], norm: 0.0 };
        let mut xt = vec![0.0; 2 * n];
        let mut dx = vec![0.0; 2 * n];
        self.evaluate(&x, rho_old, conv.as_deref(), dt, &mut cur, &mut scratch);
        if !cur.norm.is_finite() {
            return Err(Error::NewtonDivergence { iterations: 0, residual: cur.norm });
        }
        let mut iterations = 0;
        let mut fresh = false;
        while cur.norm > self.cfg.newton_tol {
            if iterations >= self.cfg.newton_max_iter {
                self.lu = None;
                return Err(Error::NewtonDivergence { iterations, residual: cur.norm });
            }
            let stale = !matches!(&self.lu, Some((_, d)) if (*d - dt).abs() <= 1e-9 * dt);
            if stale {
                self.refactor(&cur.slope, dt)?;
                fresh = true;
            }
            let (lu, _) = self.lu.as_ref().expect("factorization present");
            dx.iter_mut().zip(&cur.r).for_each(|(d, r)| *d = -r);
            lu.solve_in_place(&mut dx);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..=30 {
                xt.iter_mut().zip(x.iter().zip(&dx)).for_each(|(t, (a, d))| *t = a + alpha * d);
                self.evaluate(&xt, rho_old, conv.as_deref(), dt, &mut trial, &mut scratch);
                if trial.norm < cur.norm {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            iterations += 1;
            self.stats.iterations += 1;
            if !accepted {
                if fresh {
                    self.lu = None;
                    return Err(Error::NewtonDivergence { iterations, residual: cur.norm });
                }
                self.refactor(&cur.slope, dt)?;
                fresh = true;
                continue;
            }
            let slow = trial.norm > 0.5 * cur.norm;
            core::mem::swap(&mut x, &mut xt);
            core::mem::swap(&mut cur, &mut trial);
            if slow && !fresh {
                self.lu = None;
            }
            fresh = false;
        }
        self.stats.steps += 1;
        let mut rho = Vec::with_capacity(n);
        let mut mu = Vec::with_capacity(n);
        for k in 0..n {
            rho.push(x[2 * k]);
            mu.push(x[2 * k + 1]);
        }
        self.last_convective_work = conv.map_or(0.0, |c| c.iter().zip(&mu).map(|(a, b)| a * b).sum());
        let rho = BulkSurfaceField::from_bulk(&self.mesh, rho)?;
        let mu = BulkSurfaceField::from_bulk(&self.mesh, mu)?;
        let zeta = self.pots.zeta(&self.mesh, self.reg, &rho)?;
        Ok(State { rho, mu, zeta, t: state.t + dt })
    }

    /// One step of the configured size.
    pub fn step(&mut self, state: &State) -> Result<State> {
        self.step_with_dt(state, self.cfg.dt)
    }

    /// Advances by `dt`, splitting into `2^h` substeps after failures.
    /// Returns the new state and the convective work summed over substeps.
    pub fn advance(&mut self, state: &State, dt: f64) -> Result<(State, f64)> {
        for h in 0..=self.cfg.max_halvings {
            let parts = 1usize << h;
            let sub = dt / parts as f64;
            let mut s = state.clone();
            let mut work = 0.0;
            let mut ok = true;
            for p in 0..parts {
                match self.step_with_dt(&s, sub) {
                    Ok(mut next) => {
                        work += sub * self.last_convective_work;
                        if p + 1 == parts {
                            next.t = state.t + dt;
                        }
                        s = next;
                    }
                    Err(Error::NewtonDivergence { .. } | Error::SingularMatrix { .. }) => {
                        ok = false;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            if ok {
                return Ok((s, work));
            }
            self.stats.halvings += 1;
        }
        Err(Error::StepRejected { t: state.t, halvings: self.cfg.max_halvings })
    }

    /// State at `t = 0`: `rho0` with `mu` from the linearized pair
    /// `M w + A mu = C`, `T w - M mu = -(A rho0 + F(rho0))`.
    pub fn initial_state(&mut self, initial: &InitialData) -> Result<State> {
        let rho0 = initial.rho0();
        rho0.check(&self.mesh)?;
        let n = self.mesh.nodes();
        let rho = rho0.bulk();
        let mut force = vec![0.0; n];
        let mut slope = vec![0.0; n];
        self.pots.nodal_force(&self.mesh, self.reg, rho, &mut force, &mut slope);
        let mut a_rho = vec![0.0; n];
        self.stiffness.apply(&self.mesh, rho, &mut a_rho);
        let conv = self.convection(rho, 0.0)?;
        let w = 2 * self.mesh.nx() + 1;
        let mut sys = BandMatrix::zeros(2 * n, w, w);
        self.stiffness.assemble(&self.mesh, &mut sys, 2, 0, 1, 1.0);
        let mut b = vec![0.0; 2 * n];
        for k in 0..n {
            sys.add(2 * k, 2 * k, self.mass[k]);
            sys.add(2 * k + 1, 2 * k, self.visc[k]);
            sys.add(2 * k + 1, 2 * k + 1, -self.mass[k]);
            b[2 * k] = conv.as_ref().map_or(0.0, |c| c[k]);
            b[2 * k + 1] = -(a_rho[k] + force[k]);
        }
        let lu = sys.clone().factor()?;
        let mut x = b.clone();
        lu.solve_in_place(&mut x);
        refine(&sys, &lu, &b, &mut x);
        let mu: Vec<f64> = (0..n).map(|k| x[2 * k + 1]).collect();
        let mu = BulkSurfaceField::from_bulk(&self.mesh, mu)?;
        let zeta = self.pots.zeta(&self.mesh, self.reg, rho0)?;
        Ok(State { rho: rho0.clone(), mu, zeta, t: 0.0 })
    }
}

fn refine(sys: &BandMatrix, lu: &BandLu, b: &[f64], x: &mut [f64]) {
    let mut r = vec![0.0; b.len()];
    sys.mul_vec(x, &mut r);
    r.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
    lu.solve_in_place(&mut r);
    x.iter_mut().zip(&r).for_each(|(x, d)| *x += d);
}

struct Scratch {
    rho: Vec<f64>,
    mu: Vec<f64>,
    a_rho: Vec<f64>,
    a_mu: Vec<f64>,
    force: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self { rho: vec![0.0; n], mu: vec![0.0; n], a_rho: vec![0.0; n], a_mu: vec![0.0; n], force: vec![0.0; n] }
    }
}

/// Residual densities `(R1, R2)` of the implicit step from `state_old` to
/// `state_new`. The step size is `state_new.t - state_old.t` when positive,
/// otherwise `config.dt`.
pub fn residual(
    state_new: &State,
    state_old: &State,
    config: &SolverConfig,
    mesh: &StripMesh,
    pots: &PotentialPair,
    velocity: &dyn Velocity,
) -> Result<(DualPair, DualPair)> {
    for f in [&state_new.rho, &state_new.mu, &state_old.rho] {
        f.check(mesh)?;
    }
    let reg = config.regularization()?;
    let dt = if state_new.t > state_old.t { state_new.t - state_old.t } else { config.dt };
    let n = mesh.nodes();
    let nx = mesh.nx();
    let rho = state_new.rho.bulk();
    let mu = state_new.mu.bulk();
    let old = state_old.rho.bulk();
    let conv = if velocity.is_zero() {
        vec![0.0; n]
    } else {
        let u = sample_velocity(velocity, mesh, state_old.t)?;
        let mut c = vec![0.0; n];
        convection_loads(mesh, old, &u.u1, &u.u2, &mut c);
        c
    };
    let lap_mu = crate::geometry::bulk_laplacian(&state_new.mu, mesh)?;
    let lap_rho = crate::geometry::bulk_laplacian(&state_new.rho, mesh)?;
    let sl_mu = crate::geometry::surface_laplacian(&state_new.mu, mesh)?;
    let sl_rho = crate::geometry::surface_laplacian(&state_new.rho, mesh)?;
    let dn_mu = crate::geometry::normal_derivative(&state_new.mu, mesh)?;
    let dn_rho = crate::geometry::normal_derivative(&state_new.rho, mesh)?;
    let mut r1 = vec![0.0; n];
    let mut r2 = vec![0.0; n];
    for k in 0..n {
        let wb = mesh.bulk_weight(k / nx);
        let d = (rho[k] - old[k]) / dt;
        let (b, _) = pots.bulk.selection(reg, rho[k]);
        r1[k] = d - lap_mu[k] - conv[k] / wb;
        r2[k] = config.tau_omega * d - lap_rho[k] + b + pots.bulk.pi(rho[k]) - mu[k];
    }
    let surf = |row: usize, part: usize| -> (Vec<f64>, Vec<f64>) {
        let (lm, lr, nm, nr) = if part == 0 {
            (&sl_mu.bottom, &sl_rho.bottom, &dn_mu.bottom, &dn_rho.bottom)
        } else {
            (&sl_mu.top, &sl_rho.top, &dn_mu.top, &dn_rho.top)
        };
        let mut a = Vec::with_capacity(nx);
        let mut c = Vec::with_capacity(nx);
        for i in 0..nx {
            let k = row * nx + i;
            let d = (rho[k] - old[k]) / dt;
            let (g, _) = pots.surface.selection(reg, rho[k]);
            a.push(d + nm[i] - lm[i]);
            c.push(config.tau_gamma * d + nr[i] - lr[i] + g + pots.surface.pi(rho[k]) - mu[k]);
        }
        (a, c)
    };
    let (b1, b2) = surf(0, 0);
    let (t1, t2) = surf(mesh.ny() - 1, 1);
    Ok((DualPair::new(mesh, r1, b1, t1)?, DualPair::new(mesh, r2, b2, t2)?))
}

/// One implicit step with a fresh workspace.
pub fn step(
    state: &State,
    config: &SolverConfig,
    mesh: &StripMesh,
    pots: &PotentialPair,
    velocity: &dyn Velocity,
) -> Result<State> {
    Stepper::new(mesh, pots, velocity, config)?.step(state)
}

/// Outcome of [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub initial: DiagnosticsRecord,
    pub last: DiagnosticsRecord,
    pub final_state: State,
    pub newton: NewtonStats,
    /// Largest `|mean(rho(t)) - m0|` over all steps.
    pub max_mean_drift: f64,
    /// Largest one-step energy increase `E(n+1) - E(n)`, or the most
    /// negative decrease if energy never rose.
    pub max_energy_increase: f64,
    pub max_energy: f64,
    /// `sum dt <C(rho_n, u_n), mu_(n+1)>`.
    pub convective_work: f64,
    /// Exact discrete dissipation `sum dt (a(mu, mu) + |dtrho|_T^2)`.
    pub dissipation: f64,
}

/// Advances `initial` to `config.t_end`, emitting a record every
/// `config.sample_interval` (and at both ends) and every state to `sink`.
pub fn run(
    initial: &InitialData,
    config: &SolverConfig,
    mesh: &StripMesh,
    pots: &PotentialPair,
    velocity: &dyn Velocity,
    sink: &mut dyn TrajectorySink,
) -> Result<RunSummary> {
    let mut stepper = Stepper::new(mesh, pots, velocity, config)?;
    let recorder = Recorder::new(mesh, pots, config)?;
    let mut state = stepper.initial_state(initial)?;
    let first = recorder.record(&state, &state)?;
    sink.on_record(&first)?;
    sink.on_state(&state)?;
    let nsteps = if config.t_end > 0.0 { libm::ceil(config.t_end / config.dt - 1e-9) as usize } else { 0 };
    let every = if config.sample_interval > 0.0 {
        usize::max(1, libm::round(config.sample_interval / config.dt) as usize)
    } else {
        1
    };
    let reg = config.regularization()?;
    let m0 = initial.m0();
    let mut energy = first.energy;
    let mut summary = RunSummary {
        steps: 0,
        initial: first.clone(),
        last: first,
        final_state: state.clone(),
        newton: NewtonStats::default(),
        max_mean_drift: 0.0,
        max_energy_increase: f64::NEG_INFINITY,
        max_energy: energy,
        convective_work: 0.0,
        dissipation: 0.0,
    };
    for n in 1..=nsteps {
        let t_next = f64::min(n as f64 * config.dt, config.t_end);
        let h = t_next - state.t;
        let (mut next, work) = stepper.advance(&state, h)?;
        next.t = t_next;
        summary.convective_work += work;
        let e = energy_raw(&stepper.stiffness, mesh, pots, reg, next.rho.bulk());
        summary.max_energy_increase = summary.max_energy_increase.max(e - energy);
        summary.max_energy = summary.max_energy.max(e);
        energy = e;
        summary.dissipation += h * recorder.step_dissipation(&next, &state);
        let mean = crate::geometry::generalized_mean(&next.rho, mesh)?;
        summary.max_mean_drift = summary.max_mean_drift.max((mean - m0).abs());
        sink.on_state(&next)?;
        if n % every == 0 || n == nsteps {
            let rec = recorder.record(&next, &state)?;
            sink.on_record(&rec)?;
            summary.last = rec;
        }
        state = next;
    }
    if nsteps == 0 {
        summary.max_energy_increase = 0.0;
    }
    summary.steps = nsteps;
    summary.newton = stepper.stats();
    summary.final_state = state;
    Ok(summary)
}
