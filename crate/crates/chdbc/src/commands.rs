//! The four subcommands. Each writes into an output directory and returns a
//! report that is also serialized there.

use std::path::{Path, PathBuf};

use serde::Serialize;

use chdbc_core::diagnostics::{verify_omega_limit, TrajectoryRecorder, TrajectorySink};
use chdbc_core::geometry::{BulkSurfaceField, StripMesh};
use chdbc_core::initial::{noise, tanh_profile, InitialData};
use chdbc_core::potentials::Regularization;
use chdbc_core::solver::{run, PotentialPair, RunSummary, SolverConfig, State};
use chdbc_core::stationary::StationarySolver;
use chdbc_core::velocity::VelocityField;

use crate::checkpoint::Checkpoint;
use crate::config::{GuessKind, InitialConfig, RunConfig, SweepParameter};
use crate::output::{write_json, Borrowed, CsvSink};
use crate::CliError;

pub const DIAGNOSTICS_CSV: &str = "diagnostics.csv";
pub const FINAL_STATE: &str = "final_state.chk";
pub const SUMMARY_JSON: &str = "summary.json";
pub const STATIONARY_JSON: &str = "stationary.json";
pub const STATIONARY_STATE: &str = "stationary_state.chk";
pub const OMEGA_JSON: &str = "omega_limit.json";
pub const SWEEP_JSON: &str = "sweep.json";

/// Everything a run needs, built and validated from a [`RunConfig`].
pub struct Problem {
    pub mesh: StripMesh,
    pub pots: PotentialPair,
    pub reg: Regularization,
    pub velocity: VelocityField,
    pub solver: SolverConfig,
    pub initial: InitialData,
}

impl Problem {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        cfg.validate()?;
        let mesh = cfg.mesh()?;
        let pots = cfg.potentials()?;
        let reg = cfg.regularization()?;
        let velocity = cfg.velocity()?;
        let solver = cfg.solver_config()?;
        let domain = pots.surface.domain();
        let rho0 = match &cfg.initial {
            InitialConfig::Noise { m0, amplitude, seed } => noise(&mesh, *m0, *amplitude, *seed, &domain),
            InitialConfig::Tanh { m0, amplitude, width } => tanh_profile(&mesh, *m0, *amplitude, *width, &domain),
            InitialConfig::File { path } => {
                let c = Checkpoint::read(path)?;
                if (c.nx, c.ny) != (mesh.nx(), mesh.ny()) || c.lx != mesh.lx() || c.ly != mesh.ly() {
                    return Err(CliError::Config(format!(
                        "initial.path: checkpoint grid {}x{} on {}x{} does not match the configured geometry",
                        c.nx, c.ny, c.lx, c.ly
                    )));
                }
                BulkSurfaceField::from_bulk(&mesh, c.rho)
            }
        }
        .map_err(|e| CliError::Config(format!("initial: {e}")))?;
        let initial = InitialData::new(&mesh, rho0, &pots).map_err(|e| CliError::Config(format!("initial: {e}")))?;
        if initial.inset_nodes() > 0 {
            log::warn!("{} initial values were moved inside the potential domain", initial.inset_nodes());
        }
        Ok(Self { mesh, pots, reg, velocity, solver, initial })
    }

    /// Runs the solver, streaming records to `csv_path` and also to `extra`.
    pub fn run_to_csv(&self, csv_path: &Path, extra: &mut dyn TrajectorySink) -> Result<RunSummary, CliError> {
        struct Dyn<'a>(&'a mut dyn TrajectorySink);
        impl TrajectorySink for Dyn<'_> {
            fn on_record(&mut self, r: &chdbc_core::diagnostics::DiagnosticsRecord) -> chdbc_core::Result<()> {
                self.0.on_record(r)
            }
            fn on_state(&mut self, s: &State) -> chdbc_core::Result<()> {
                self.0.on_state(s)
            }
        }
        let mut csv = CsvSink::create(csv_path)?;
        let result = {
            let mut sink = (Borrowed(&mut csv), Dyn(extra));
            run(&self.initial, &self.solver, &self.mesh, &self.pots, &self.velocity, &mut sink)
        };
        match result {
            Ok(summary) => {
                csv.finish()?;
                Ok(summary)
            }
            Err(e) => Err(csv.failure().unwrap_or_else(|| e.into())),
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateReport {
    pub steps: usize,
    pub t_final: f64,
    pub m0: f64,
    pub inset_nodes: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub max_energy_increase: f64,
    pub max_mean_drift: f64,
    pub convective_work: f64,
    pub dissipation: f64,
    pub final_dtrho_norm: f64,
    pub final_stat_residual: f64,
    pub max_abs_rho: f64,
    pub newton_iterations: usize,
    pub factorizations: usize,
    pub halvings: usize,
}

impl SimulateReport {
    fn new(problem: &Problem, s: &RunSummary) -> Self {
        Self {
            steps: s.steps,
            t_final: s.final_state.t,
            m0: problem.initial.m0(),
            inset_nodes: problem.initial.inset_nodes(),
            initial_energy: s.initial.energy,
            final_energy: s.last.energy,
            max_energy_increase: s.max_energy_increase,
            max_mean_drift: s.max_mean_drift,
            convective_work: s.convective_work,
            dissipation: s.dissipation,
            final_dtrho_norm: s.last.dtrho_norm,
            final_stat_residual: s.last.stat_residual,
            max_abs_rho: s.final_state.rho.max_abs(),
            newton_iterations: s.newton.iterations,
            factorizations: s.newton.factorizations,
            halvings: s.newton.halvings,
        }
    }
}

/// Writes `diagnostics.csv`, `final_state.chk` and `summary.json`.
pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<SimulateReport, CliError> {
    let problem = Problem::new(cfg)?;
    ensure_dir(out)?;
    let summary = problem.run_to_csv(&out.join(DIAGNOSTICS_CSV), &mut ())?;
    Checkpoint::from_state(&problem.mesh, &summary.final_state).write(&out.join(FINAL_STATE))?;
    let report = SimulateReport::new(&problem, &summary);
    write_json(&out.join(SUMMARY_JSON), &report)?;
    log::info!(
        "simulate: {} steps to t = {}, energy {} -> {}, |d_t rho| = {:e}",
        report.steps,
        report.t_final,
        report.initial_energy,
        report.final_energy,
        report.final_dtrho_norm
    );
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryReport {
    pub m0: f64,
    pub eps: f64,
    pub guess: GuessKind,
    pub mu_s: f64,
    pub residual: f64,
    pub energy: f64,
    pub iterations: usize,
}

/// Writes `stationary.json` and the solution as `stationary_state.chk`.
pub fn stationary(cfg: &RunConfig, out: &Path) -> Result<StationaryReport, CliError> {
    let problem = Problem::new(cfg)?;
    let m0 = cfg.stationary.m0.unwrap_or(problem.initial.m0());
    let solver = StationarySolver {
        mesh: problem.mesh.clone(),
        pots: problem.pots.clone(),
        eps: cfg.potentials.eps,
        tol: cfg.tolerances.stationary_tol,
    };
    let guess = match cfg.stationary.guess {
        GuessKind::Constant => None,
        GuessKind::Initial => Some(problem.initial.rho0()),
    };
    let sol = solver.solve(m0, guess).map_err(|e| match e {
        chdbc_core::Error::MeanNotInterior { .. } => CliError::Config(format!("stationary.m0: {e}")),
        other => other.into(),
    })?;
    ensure_dir(out)?;
    let state = State {
        mu: BulkSurfaceField::constant(&problem.mesh, sol.mu_s),
        rho: sol.rho_s.clone(),
        zeta: sol.zeta_s.clone(),
        t: 0.0,
    };
    Checkpoint::from_state(&problem.mesh, &state).write(&out.join(STATIONARY_STATE))?;
    let report = StationaryReport {
        m0,
        eps: cfg.potentials.eps,
        guess: cfg.stationary.guess,
        mu_s: sol.mu_s,
        residual: sol.residual_norm,
        energy: sol.energy,
        iterations: sol.iterations,
    };
    write_json(&out.join(STATIONARY_JSON), &report)?;
    log::info!("stationary: mu_s = {}, residual {:e}, energy {}", report.mu_s, report.residual, report.energy);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum VerifyReport {
    Pass(OmegaJson),
    Fail(OmegaJson),
    Stale { dtrho_norm: f64, threshold: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaJson {
    pub sample_times: Vec<f64>,
    pub distances: Vec<f64>,
    pub endpoint_distance: f64,
    pub mu_flatness: f64,
    pub matched_mu_s: f64,
    pub stationary_residual: f64,
    pub tol_dist: f64,
    pub tol_flat: f64,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        matches!(self, VerifyReport::Pass(_))
    }
}

/// Simulates inline, then matches the endpoint against a stationary state.
/// Writes the simulate outputs plus `omega_limit.json`; a stale trajectory
/// is reported there and returned as [`CliError::Staleness`].
pub fn verify(cfg: &RunConfig, out: &Path) -> Result<VerifyReport, CliError> {
    let problem = Problem::new(cfg)?;
    ensure_dir(out)?;
    let mut recorder = TrajectoryRecorder::new(problem.solver.t_end);
    let summary = problem.run_to_csv(&out.join(DIAGNOSTICS_CSV), &mut recorder)?;
    Checkpoint::from_state(&problem.mesh, &summary.final_state).write(&out.join(FINAL_STATE))?;
    write_json(&out.join(SUMMARY_JSON), &SimulateReport::new(&problem, &summary))?;
    let solver = StationarySolver {
        mesh: problem.mesh.clone(),
        pots: problem.pots.clone(),
        eps: cfg.potentials.eps,
        tol: cfg.tolerances.stationary_tol,
    };
    let tol = cfg.omega_tolerances();
    let report = match verify_omega_limit(&recorder, &solver, &tol) {
        Ok(r) => {
            let body = OmegaJson {
                sample_times: r.sample_times,
                distances: r.distances,
                endpoint_distance: r.endpoint_distance,
                mu_flatness: r.mu_flatness,
                matched_mu_s: r.matched_mu_s,
                stationary_residual: r.stationary_residual,
                tol_dist: tol.tol_dist,
                tol_flat: tol.tol_flat,
            };
            if r.passed {
                VerifyReport::Pass(body)
            } else {
                VerifyReport::Fail(body)
            }
        }
        Err(e @ chdbc_core::Error::Staleness { dtrho, threshold }) => {
            write_json(&out.join(OMEGA_JSON), &VerifyReport::Stale { dtrho_norm: dtrho, threshold })?;
            return Err(CliError::Staleness(e));
        }
        Err(e) => return Err(e.into()),
    };
    write_json(&out.join(OMEGA_JSON), &report)?;
    match &report {
        VerifyReport::Pass(r) | VerifyReport::Fail(r) => log::info!(
            "verify: {} (distance {:e}, flatness {:e}, mu_s {})",
            if report.passed() { "PASS" } else { "FAIL" },
            r.endpoint_distance,
            r.mu_flatness,
            r.matched_mu_s
        ),
        VerifyReport::Stale { .. } => {}
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub value: f64,
    pub csv: PathBuf,
    /// `None` when the cell failed; see `error`.
    pub summary: Option<SimulateReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub parameter: SweepParameter,
    pub cells: Vec<SweepCell>,
}

/// One `sweep_<parameter>_<index>.csv` per value plus `sweep.json`. Failed
/// cells are recorded and the first solver failure is returned afterwards.
pub fn sweep(cfg: &RunConfig, out: &Path) -> Result<SweepReport, CliError> {
    let Some(spec) = &cfg.sweep else {
        return Err(CliError::Config("sweep: section missing".into()));
    };
    ensure_dir(out)?;
    let tag = match spec.parameter {
        SweepParameter::Eps => "eps",
        SweepParameter::Dt => "dt",
    };
    let mut cells = Vec::new();
    let mut first_failure = None;
    for (i, &value) in spec.values.iter().enumerate() {
        let mut cell_cfg = cfg.clone();
        match spec.parameter {
            SweepParameter::Eps => cell_cfg.potentials.eps = value,
            SweepParameter::Dt => cell_cfg.time.dt = value,
        }
        let csv = PathBuf::from(format!("sweep_{tag}_{i}.csv"));
        let problem = Problem::new(&cell_cfg)?;
        let (summary, error) = match problem.run_to_csv(&out.join(&csv), &mut ()) {
            Ok(s) => (Some(SimulateReport::new(&problem, &s)), None),
            Err(e @ CliError::Io(_)) => return Err(e),
            Err(e) => {
                log::warn!("sweep {tag} = {value}: {e}");
                let msg = e.to_string();
                first_failure.get_or_insert(e);
                (None, Some(msg))
            }
        };
        if let Some(s) = &summary {
            log::info!("sweep {tag} = {value}: stat_residual {:e}, max|rho| {}", s.final_stat_residual, s.max_abs_rho);
        }
        cells.push(SweepCell { value, csv, summary, error });
    }
    let report = SweepReport { parameter: spec.parameter, cells };
    write_json(&out.join(SWEEP_JSON), &report)?;
    match first_failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}
