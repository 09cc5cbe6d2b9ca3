//! Per-step scalars, trajectory sinks and the omega-limit check.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{generalized_mean, BulkSurfaceField, DualPair, NOperator, Stiffness, StripMesh, N_TOLERANCE};
use crate::potentials::Regularization;
use crate::solver::{energy_raw, PotentialPair, SolverConfig, State};
use crate::stationary::{best_fit_mu, stationary_residual, StationarySolver};
use crate::{Error, Result};

/// Scalars recorded at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mean_rho: f64,
    pub energy: f64,
    /// `sqrt(|grad mu|^2 + |grad_G mu_G|^2)`.
    pub grad_mu_norm: f64,
    /// `H` norm of the backward difference quotient of `rho`.
    pub dtrho_norm: f64,
    pub mean_mu: f64,
    pub hstar_dtrho: f64,
    pub stat_residual: f64,
    /// Bulk and surface parts of `dtrho_norm`.
    pub dtrho_bulk: f64,
    pub dtrho_surf: f64,
}

impl DiagnosticsRecord {
    pub const FIELDS: [&'static str; 10] = [
        "t",
        "mean_rho",
        "energy",
        "grad_mu_norm",
        "dtrho_norm",
        "mean_mu",
        "hstar_dtrho",
        "stat_residual",
        "dtrho_bulk",
        "dtrho_surf",
    ];

    pub fn values(&self) -> [f64; 10] {
        [
            self.t,
            self.mean_rho,
            self.energy,
            self.grad_mu_norm,
            self.dtrho_norm,
            self.mean_mu,
            self.hstar_dtrho,
            self.stat_residual,
            self.dtrho_bulk,
            self.dtrho_surf,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

/// Receives records and states from the stepping loop.
pub trait TrajectorySink {
    fn on_record(&mut self, record: &DiagnosticsRecord) -> Result<()>;

    fn on_state(&mut self, _state: &State) -> Result<()> {
        Ok(())
    }
}

impl TrajectorySink for Vec<DiagnosticsRecord> {
    fn on_record(&mut self, record: &DiagnosticsRecord) -> Result<()> {
        self.push(record.clone());
        Ok(())
    }
}

/// Discards everything.
impl TrajectorySink for () {
    fn on_record(&mut self, _record: &DiagnosticsRecord) -> Result<()> {
        Ok(())
    }
}

/// Fans out to two sinks.
impl<A: TrajectorySink, B: TrajectorySink> TrajectorySink for (A, B) {
    fn on_record(&mut self, record: &DiagnosticsRecord) -> Result<()> {
        self.0.on_record(record)?;
        self.1.on_record(record)
    }

    fn on_state(&mut self, state: &State) -> Result<()> {
        self.0.on_state(state)?;
        self.1.on_state(state)
    }
}

/// Snapshot times `t_end / 10 * 1.5^k` up to `t_end`.
pub fn snapshot_schedule(t_end: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if !(t_end > 0.0) {
        return out;
    }
    let mut t = t_end / 10.0;
    while t < t_end * (1.0 - 1e-12) {
        out.push(t);
        t *= 1.5;
    }
    out.push(t_end);
    out
}

/// Keeps every record, the states at the snapshot schedule and the final
/// state.
#[derive(Debug, Clone)]
pub struct TrajectoryRecorder {
    schedule: Vec<f64>,
    next: usize,
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<State>,
    pub last: Option<State>,
}

impl TrajectoryRecorder {
    pub fn new(t_end: f64) -> Self {
        Self { schedule: snapshot_schedule(t_end), next: 0, records: Vec::new(), snapshots: Vec::new(), last: None }
    }
}

impl TrajectorySink for TrajectoryRecorder {
    fn on_record(&mut self, record: &DiagnosticsRecord) -> Result<()> {
        self.records.push(record.clone());
        Ok(())
    }

    fn on_state(&mut self, state: &State) -> Result<()> {
        while self.next < self.schedule.len() {
            let ts = self.schedule[self.next];
            if state.t + 1e-9 * f64::max(1.0, ts) < ts {
                break;
            }
            if self.snapshots.last().map_or(true, |s| s.t != state.t) {
                self.snapshots.push(state.clone());
            }
            self.next += 1;
        }
        self.last = Some(state.clone());
        Ok(())
    }
}

/// Precomputed operators for [`record`].
#[derive(Debug, Clone)]
pub struct Recorder {
    mesh: StripMesh,
    pots: PotentialPair,
    config: SolverConfig,
    reg: Regularization,
    stiffness: Stiffness,
    n_op: NOperator,
}

impl Recorder {
    pub fn new(mesh: &StripMesh, pots: &PotentialPair, config: &SolverConfig) -> Result<Self> {
        Ok(Self {
            mesh: mesh.clone(),
            pots: pots.clone(),
            config: *config,
            reg: config.regularization()?,
            stiffness: Stiffness::new(mesh),
            n_op: NOperator::new(mesh)?,
        })
    }

    fn difference(&self, state: &State, prev: &State) -> Vec<f64> {
        let dt = state.t - prev.t;
        if dt > 0.0 {
            state.rho.bulk().iter().zip(prev.rho.bulk()).map(|(a, b)| (a - b) / dt).collect()
        } else {
            vec![0.0; self.mesh.nodes()]
        }
    }

    /// `a(mu, mu) + tau_O |dtrho|^2 + tau_G |dtrho_G|^2` for one step.
    pub fn step_dissipation(&self, state: &State, prev: &State) -> f64 {
        let d = self.difference(state, prev);
        let mu = state.mu.bulk();
        let nx = self.mesh.nx();
        let mut s = self.stiffness.form(&self.mesh, mu, mu);
        for (k, v) in d.iter().enumerate() {
            let j = k / nx;
            let t = self.config.tau_omega * self.mesh.bulk_weight(j) + self.config.tau_gamma * self.mesh.surface_weight(j);
            s += t * v * v;
        }
        s
    }

    pub fn record(&self, state: &State, prev: &State) -> Result<DiagnosticsRecord> {
        let mesh = &self.mesh;
        state.rho.check(mesh)?;
        state.mu.check(mesh)?;
        prev.rho.check(mesh)?;
        let nx = mesh.nx();
        let d = self.difference(state, prev);
        let (mut bulk, mut surf) = (0.0, 0.0);
        for (k, v) in d.iter().enumerate() {
            let j = k / nx;
            bulk += mesh.bulk_weight(j) * v * v;
            surf += mesh.surface_weight(j) * v * v;
        }
        let dfield = BulkSurfaceField::from_bulk(mesh, d)?;
        let hstar = self.n_op.h_star_norm(&DualPair::from_field(&dfield).without_mean(mesh)?, N_TOLERANCE)?;
        let mu = state.mu.bulk();
        let eps = self.config.eps;
        let mu_fit = best_fit_mu(&state.rho, mesh, &self.pots, eps)?;
        Ok(DiagnosticsRecord {
            t: state.t,
            mean_rho: generalized_mean(&state.rho, mesh)?,
            energy: energy_raw(&self.stiffness, mesh, &self.pots, self.reg, state.rho.bulk()),
            grad_mu_norm: libm::sqrt(self.stiffness.form(mesh, mu, mu)),
            dtrho_norm: libm::sqrt(bulk + surf),
            mean_mu: generalized_mean(&state.mu, mesh)?,
            hstar_dtrho: hstar,
            stat_residual: stationary_residual(&state.rho, mu_fit, mesh, &self.pots, eps)?,
            dtrho_bulk: libm::sqrt(bulk),
            dtrho_surf: libm::sqrt(surf),
        })
    }
}

/// Diagnostics of `state`, with time derivatives from `state_prev`.
pub fn record(
    state: &State,
    state_prev: &State,
    mesh: &StripMesh,
    pots: &PotentialPair,
    config: &SolverConfig,
) -> Result<DiagnosticsRecord> {
    Recorder::new(mesh, pots, config)?.record(state, state_prev)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaTolerances {
    pub tol_dist: f64,
    pub tol_flat: f64,
    /// Largest final `dtrho_norm` accepted as converged.
    pub staleness: f64,
}

impl Default for OmegaTolerances {
    fn default() -> Self {
        Self { tol_dist: 1e-3, tol_flat: 1e-4, staleness: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaLimitReport {
    pub sample_times: Vec<f64>,
    /// Weighted `L2` distance from each snapshot to the matched solution.
    pub distances: Vec<f64>,
    pub endpoint_distance: f64,
    pub mu_flatness: f64,
    pub matched_mu_s: f64,
    pub stationary_residual: f64,
    pub passed: bool,
}

fn weighted_distance(mesh: &StripMesh, a: &BulkSurfaceField, b: &BulkSurfaceField) -> f64 {
    let nx = mesh.nx();
    let s: f64 = a
        .bulk()
        .iter()
        .zip(b.bulk())
        .enumerate()
        .map(|(k, (x, y))| mesh.mass_weight(k / nx) * (x - y) * (x - y))
        .sum();
    libm::sqrt(s)
}

/// Weighted standard deviation of `mu` about its generalized mean.
pub fn mu_flatness(mu: &BulkSurfaceField, mesh: &StripMesh) -> Result<f64> {
    let mean = generalized_mean(mu, mesh)?;
    let nx = mesh.nx();
    let s: f64 = mu.bulk().iter().enumerate().map(|(k, v)| mesh.mass_weight(k / nx) * (v - mean) * (v - mean)).sum();
    Ok(libm::sqrt(s / mesh.total_measure()))
}

/// Matches the end of a recorded trajectory against a stationary solution
/// seeded from its last snapshot.
pub fn verify_omega_limit(
    trajectory: &TrajectoryRecorder,
    solver: &StationarySolver,
    tolerances: &OmegaTolerances,
) -> Result<OmegaLimitReport> {
    let mesh = &solver.mesh;
    let last = trajectory.last.as_ref().ok_or_else(|| Error::Sink(String::from("trajectory has no states")))?;
    let dtrho = trajectory.records.last().map_or(f64::INFINITY, |r| r.dtrho_norm);
    if !(dtrho <= tolerances.staleness) {
        return Err(Error::Staleness { dtrho, threshold: tolerances.staleness });
    }
    let m0 = generalized_mean(&last.rho, mesh)?;
    let sol = solver.solve(m0, Some(&last.rho))?;
    let mut sample_times = Vec::new();
    let mut distances = Vec::new();
    for s in trajectory.snapshots.iter() {
        sample_times.push(s.t);
        distances.push(weighted_distance(mesh, &s.rho, &sol.rho_s));
    }
    if sample_times.last() != Some(&last.t) {
        sample_times.push(last.t);
        distances.push(weighted_distance(mesh, &last.rho, &sol.rho_s));
    }
    let endpoint_distance = *distances.last().expect("at least the final state");
    let flat = mu_flatness(&last.mu, mesh)?;
    let passed = endpoint_distance <= tolerances.tol_dist && flat <= tolerances.tol_flat && sol.mu_s.is_finite();
    Ok(OmegaLimitReport {
        sample_times,
        distances,
        endpoint_distance,
        mu_flatness: flat,
        matched_mu_s: sol.mu_s,
        stationary_residual: sol.residual_norm,
        passed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetReport {
    /// `sum dt (grad_mu_norm^2 + tau_O dtrho_bulk^2 + tau_G dtrho_surf^2)`.
    pub dissipated: f64,
    /// `E0 - E_final + bound`.
    pub available: f64,
    pub passed: bool,
}

/// Checks the dissipated amount against the energy drop with 1% slack.
/// Records are expected once per step.
pub fn dissipation_budget(
    records: &[DiagnosticsRecord],
    e0: f64,
    velocity_bound: f64,
    tau_omega: f64,
    tau_gamma: f64,
) -> Result<BudgetReport> {
    let Some(last) = records.last() else {
        return Err(Error::Sink(format!("empty record stream")));
    };
    let mut dissipated = 0.0;
    for w in records.windows(2) {
        let dt = w[1].t - w[0].t;
        let r = &w[1];
        dissipated += dt
            * (r.grad_mu_norm * r.grad_mu_norm
                + tau_omega * r.dtrho_bulk * r.dtrho_bulk
                + tau_gamma * r.dtrho_surf * r.dtrho_surf);
    }
    let available = e0 - last.energy + velocity_bound;
    let passed = dissipated <= 1.01 * available + 1e-12;
    Ok(BudgetReport { dissipated, available, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_is_geometric() {
        let s = snapshot_schedule(200.0);
        assert_eq!(s[0], 20.0);
        assert_eq!(s[1], 30.0);
        assert_eq!(*s.last().unwrap(), 200.0);
        assert!(s.windows(2).all(|w| w[1] > w[0]));
        assert!(snapshot_schedule(0.0).is_empty());
    }

    fn rec(t: f64, energy: f64, g: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            mean_rho: 0.0,
            energy,
            grad_mu_norm: g,
            dtrho_norm: 0.0,
            mean_mu: 0.0,
            hstar_dtrho: 0.0,
            stat_residual: 0.0,
            dtrho_bulk: 0.0,
            dtrho_surf: 0.0,
        }
    }

    #[test]
    fn budget_accepts_stationary_and_rejects_injection() {
        let r = dissipation_budget(&[rec(0.0, 1.0, 0.0)], 1.0, 0.0, 1.0, 1.0).unwrap();
        assert!(r.passed);
        // energy went up while dissipating
        let stream = [rec(0.0, 1.0, 0.0), rec(1.0, 2.0, 1.0)];
        assert!(!dissipation_budget(&stream, 1.0, 0.0, 1.0, 1.0).unwrap().passed);
    }
}
