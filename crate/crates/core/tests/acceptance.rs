//! Acceptance criteria. Each criterion runs on its own thread and prints one
//! PASS/FAIL line; the process exits nonzero if any criterion fails.

mod common;

use std::thread;
use std::time::{Duration, Instant};

use chdbc_core::diagnostics::{
    dissipation_budget, verify_omega_limit, DiagnosticsRecord, OmegaTolerances, TrajectoryRecorder, TrajectorySink,
};
use chdbc_core::geometry::{
    generalized_mean, h_star_norm, solve_n, stiffness_form, weak_stiffness_apply, BulkSurfaceField, StripMesh,
    N_TOLERANCE,
};
use chdbc_core::initial::{noise, InitialData};
use chdbc_core::potentials::{
    check_compatibility, Interval, PotentialSpec, SampleGrid, YosidaParams,
};
use chdbc_core::solver::{run, PotentialPair, SolverConfig, State, Stepper};
use chdbc_core::stationary::StationarySolver;
use chdbc_core::velocity::{Velocity, VelocityField};
use chdbc_core::Error;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn regular_pair() -> PotentialPair {
    PotentialPair::new(PotentialSpec::regular(), PotentialSpec::regular())
}

/// 64 x 32 nodes on an 8 x 4 strip, wide enough for the spinodal instability.
fn spinodal_mesh() -> StripMesh {
    StripMesh::new(64, 32, 8.0, 4.0).unwrap()
}

fn spinodal_initial(mesh: &StripMesh, pots: &PotentialPair) -> InitialData {
    let rho0 = noise(mesh, 0.0, 0.1, 1, &Interval::REAL_LINE).unwrap();
    InitialData::new(mesh, rho0, pots).unwrap()
}

// 1 ------------------------------------------------------------------------

fn operator_suite() -> Outcome {
    let start = Instant::now();
    let mut worst_sym: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    let mut worst_id: f64 = 0.0;
    let mut rng = common::rng(11);
    for (nx, ny) in [(8, 4), (16, 8), (32, 16)] {
        let mesh = StripMesh::new(nx, ny, 2.0, 1.0).unwrap();
        let n = mesh.nodes();
        let mut k = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = weak_stiffness_apply(&BulkSurfaceField::from_bulk(&mesh, e).unwrap(), &mesh)
                .unwrap()
                .loads(&mesh)
                .unwrap();
            for i in 0..n {
                k[i][j] = col[i];
            }
        }
        for i in 0..n {
            for j in 0..i {
                worst_sym = worst_sym.max((k[i][j] - k[j][i]).abs());
            }
        }
        for _ in 0..5 {
            let f = common::random_field(&mesh, &mut rng);
            let g = common::random_field(&mesh, &mut rng);
            let d = stiffness_form(&f, &g, &mesh).unwrap() - stiffness_form(&g, &f, &mesh).unwrap();
            worst_sym = worst_sym.max(d.abs());
        }
        for _ in 0..20 {
            let g = common::random_zero_mean_load(&mesh, &mut rng);
            let x = solve_n(&g, &mesh, N_TOLERANCE).unwrap();
            let kx = weak_stiffness_apply(&x, &mesh).unwrap().loads(&mesh).unwrap();
            let gl = g.loads(&mesh).unwrap();
            let r = kx.iter().zip(&gl).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst_res = worst_res.max(r);
            let pairing = g.pair(&mesh, &x).unwrap();
            let hs = h_star_norm(&g, &mesh).unwrap();
            worst_id = worst_id.max((pairing - hs * hs).abs());
        }
    }
    let mesh = StripMesh::new(8, 4, 2.0, 1.0).unwrap();
    let mut worst_oracle: f64 = 0.0;
    for _ in 0..20 {
        let g = common::random_zero_mean_load(&mesh, &mut rng);
        let x = solve_n(&g, &mesh, N_TOLERANCE).unwrap();
        let y = common::dense_solve_n(&mesh, &g);
        worst_oracle = worst_oracle.max(x.bulk().iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let elapsed = start.elapsed();
    let passed = worst_sym <= 1e-12
        && worst_res <= 1e-10
        && worst_oracle <= 1e-10
        && worst_id <= 1e-10
        && elapsed <= Duration::from_secs(10);
    outcome(
        passed,
        format!(
            "symmetry {worst_sym:.1e}, N residual {worst_res:.1e}, dense oracle {worst_oracle:.1e}, \
             <g,Ng> - |g|*^2 {worst_id:.1e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

// 2 ------------------------------------------------------------------------

fn potential_suite() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let reg = PotentialSpec::regular();
    for r in [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0] {
        let expect = (r * r - 1.0) * (r * r - 1.0) / 4.0;
        if reg.eval_f(r).unwrap() != expect {
            failures.push(format!("f_reg({r})"));
        }
    }
    let c1 = 2.0;
    let log = PotentialSpec::logarithmic(c1).unwrap();
    for r in [-0.99, -0.9, -0.5, 0.0, 0.25, 0.5, 0.9, 0.99] {
        let xl = |x: f64| if x == 0.0 { 0.0 } else { x * x.ln() };
        let expect = (xl(1.0 + r) + xl(1.0 - r)) - c1 * r * r;
        let got = log.eval_f(r).unwrap();
        if (got - expect).abs() > 4.0 * f64::EPSILON * expect.abs().max(1.0) {
            failures.push(format!("f_log({r}) = {got} vs {expect}"));
        }
    }
    if log.eval_f(1.0).is_ok() || log.eval_f(-1.0).is_ok() || log.eval_f(1.5).is_ok() {
        failures.push("f_log finite outside (-1, 1)".into());
    }
    let c2 = 1.0;
    let obs = PotentialSpec::double_obstacle(c2).unwrap();
    for r in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        if obs.eval_f(r).unwrap() != c2 * (1.0 - r * r) {
            failures.push(format!("f_2obs({r})"));
        }
    }
    if obs.eval_f(1.0 + 1e-12).is_ok() || obs.eval_f(-3.0).is_ok() {
        failures.push("f_2obs finite outside [-1, 1]".into());
    }

    let grid = SampleGrid::default();
    let line = Interval::closed(-3.0, 3.0);
    let mut checked = 0usize;
    for spec in [&reg, &log, &obs] {
        let inside = grid.points(&spec.domain());
        let all = grid.points(&line);
        for e in [1e-1, 1e-2, 1e-3] {
            let eps = YosidaParams::new(e).unwrap();
            let vals: Vec<f64> = all.iter().map(|&r| spec.yosida_beta(eps, r)).collect();
            for w in all.windows(2).zip(vals.windows(2)) {
                let ((a, b), (fa, fb)) = ((w.0[0], w.0[1]), (w.1[0], w.1[1]));
                if fb < fa {
                    failures.push(format!("{} eps {e}: not monotone at {a}", spec.kind().name()));
                    break;
                }
                if (fb - fa) > (b - a) / e * (1.0 + 1e-9) + 1e-12 {
                    failures.push(format!("{} eps {e}: Lipschitz bound fails at {a}", spec.kind().name()));
                    break;
                }
            }
            for &r in &inside {
                let b0 = spec.eval_beta_min(r).unwrap();
                if spec.yosida_beta(eps, r).abs() > b0.abs() * (1.0 + 1e-12) + 1e-12 {
                    failures.push(format!("{} eps {e}: |beta_eps| > |beta°| at {r}", spec.kind().name()));
                    break;
                }
            }
            if spec == &obs {
                for &r in &all {
                    let closed = (r - r.clamp(-1.0, 1.0)) / e;
                    if obs.yosida_beta(eps, r) != closed {
                        failures.push(format!("obstacle eps {e}: closed form fails at {r}"));
                        break;
                    }
                }
            }
            checked += all.len();
        }
    }
    let elapsed = start.elapsed();
    let passed = failures.is_empty() && elapsed <= Duration::from_secs(5);
    let detail = if failures.is_empty() {
        format!("{checked} Yosida samples, tabulated values exact, {:.2}s", elapsed.as_secs_f64())
    } else {
        format!("{} failures, first: {}", failures.len(), failures[0])
    };
    outcome(passed, detail)
}

// 3, 4 ---------------------------------------------------------------------

fn conservation() -> Outcome {
    let start = Instant::now();
    let mesh = spinodal_mesh();
    let pots = regular_pair();
    let init = spinodal_initial(&mesh, &pots);
    let vel = VelocityField::decaying_shear(1.0, 0.1, 1, &mesh).unwrap();
    let cfg = SolverConfig::new(1.0, 1.0, 1e-2, 50.0, 0.0).unwrap();
    let mut records: Vec<DiagnosticsRecord> = Vec::new();
    let summary = match run(&init, &cfg, &mesh, &pots, &vel, &mut records) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let drift = records.iter().map(|r| (r.mean_rho - init.m0()).abs()).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    outcome(
        drift <= 1e-8 && elapsed <= Duration::from_secs(300),
        format!(
            "max |mean - m0| = {drift:.1e} over {} samples ({} steps), {:.1}s",
            records.len(),
            summary.steps,
            elapsed.as_secs_f64()
        ),
    )
}

fn energy_dissipation() -> Outcome {
    let mesh = spinodal_mesh();
    let pots = regular_pair();
    let init = spinodal_initial(&mesh, &pots);
    let cfg = SolverConfig::new(1.0, 1.0, 1e-2, 50.0, 0.0).unwrap();
    let mut records: Vec<DiagnosticsRecord> = Vec::new();
    if let Err(e) = run(&init, &cfg, &mesh, &pots, &VelocityField::Zero, &mut records) {
        return outcome(false, format!("run failed: {e}"));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut monotone = true;
    for w in records.windows(2) {
        let rise = w[1].energy - w[0].energy;
        worst = worst.max(rise / (1.0 + w[0].energy.abs()));
        if rise > 1e-10 * (1.0 + w[0].energy.abs()) {
            monotone = false;
        }
    }
    let e0 = records[0].energy;
    let budget = dissipation_budget(&records, e0, 0.0, cfg.tau_omega, cfg.tau_gamma).unwrap();
    outcome(
        monotone && budget.passed,
        format!(
            "largest relative step rise {worst:.1e}, dissipated {:.6} <= 1.01 x {:.6}",
            budget.dissipated, budget.available
        ),
    )
}

// 5 ------------------------------------------------------------------------

fn oracle_step() -> Outcome {
    let mesh = StripMesh::new(8, 4, 2.0, 1.0).unwrap();
    let cases = [
        ("regular", PotentialSpec::regular(), 0.0),
        ("logarithmic", PotentialSpec::logarithmic(2.0).unwrap(), 1e-3),
        ("double obstacle", PotentialSpec::double_obstacle(1.0).unwrap(), 1e-3),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, spec, eps) in cases {
        let pots = PotentialPair::new(spec.clone(), spec.clone());
        let rho0 = noise(&mesh, 0.3, 0.6, 5, &Interval::closed(-1.0, 1.0)).unwrap();
        let init = InitialData::new(&mesh, rho0, &pots).unwrap();
        let cfg = SolverConfig::new(1.0, 0.5, 1e-2, 1.0, eps).unwrap();
        let mut stepper = Stepper::new(&mesh, &pots, &VelocityField::Zero, &cfg).unwrap();
        let s0 = stepper.initial_state(&init).unwrap();
        let s1 = match stepper.step(&s0) {
            Ok(s) => s,
            Err(e) => {
                passed = false;
                parts.push(format!("{name}: {e}"));
                continue;
            }
        };
        let (rho, mu) = common::brute_force_step(&s0, &cfg, &mesh, &pots, &VelocityField::Zero, 1e-12);
        let d = s1
            .rho
            .bulk()
            .iter()
            .zip(&rho)
            .chain(s1.mu.bulk().iter().zip(&mu))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        passed &= d <= 1e-9;
        parts.push(format!("{name} {d:.1e}"));
    }
    outcome(passed, format!("max |production - dense|: {}", parts.join(", ")))
}

// 6, 7 ---------------------------------------------------------------------

fn omega_limit(velocity: VelocityField) -> Outcome {
    let mesh = spinodal_mesh();
    let pots = regular_pair();
    let init = spinodal_initial(&mesh, &pots);
    let mut cfg = SolverConfig::new(1.0, 1.0, 0.05, 200.0, 0.0).unwrap();
    cfg.sample_interval = 1.0;
    let tolerances = OmegaTolerances { tol_dist: 1e-3, tol_flat: 1e-4, staleness: 1e-4 };
    let solver = StationarySolver { mesh: mesh.clone(), pots: pots.clone(), eps: 0.0, tol: 1e-10 };
    let mut rec = TrajectoryRecorder::new(cfg.t_end);
    if let Err(e) = run(&init, &cfg, &mesh, &pots, &velocity, &mut rec) {
        return outcome(false, format!("run failed: {e}"));
    }
    let report = match verify_omega_limit(&rec, &solver, &tolerances) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("verification failed: {e}")),
    };
    let stationary = match solver.solve(
        generalized_mean(&rec.last.as_ref().unwrap().rho, &mesh).unwrap(),
        Some(&rec.last.as_ref().unwrap().rho),
    ) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("stationary solve failed: {e}")),
    };
    // restart from the matched stationary state
    let reseed = InitialData::new(&mesh, stationary.rho_s.clone(), &pots).unwrap();
    let mut short = cfg;
    short.t_end = 5.0;
    let mut rec2 = TrajectoryRecorder::new(short.t_end);
    let again = run(&reseed, &short, &mesh, &pots, &velocity, &mut rec2)
        .and_then(|_| verify_omega_limit(&rec2, &solver, &tolerances));
    let (reseed_ok, reseed_dist) = match again {
        Ok(r) => (r.endpoint_distance <= 1e-10, r.endpoint_distance),
        Err(e) => return outcome(false, format!("reseeded run failed: {e}")),
    };
    outcome(
        report.passed && report.matched_mu_s.is_finite() && reseed_ok,
        format!(
            "distance {:.1e}, mu flatness {:.1e}, mu_s {:.3e}, reseeded distance {:.1e}",
            report.endpoint_distance, report.mu_flatness, report.matched_mu_s, reseed_dist
        ),
    )
}

// 8 ------------------------------------------------------------------------

#[derive(Default)]
struct MaxAbs(f64);

impl TrajectorySink for MaxAbs {
    fn on_record(&mut self, _: &DiagnosticsRecord) -> chdbc_core::Result<()> {
        Ok(())
    }

    fn on_state(&mut self, state: &State) -> chdbc_core::Result<()> {
        self.0 = self.0.max(state.rho.max_abs());
        Ok(())
    }
}

fn regularization_sweep() -> Outcome {
    let mesh = StripMesh::new(32, 16, 8.0, 4.0).unwrap();
    let obs = PotentialSpec::double_obstacle(1.0).unwrap();
    let pots = PotentialPair::new(obs.clone(), obs);
    let rho0 = noise(&mesh, 0.0, 0.1, 1, &Interval::closed(-1.0, 1.0)).unwrap();
    let init = InitialData::new(&mesh, rho0, &pots).unwrap();
    let mut passed = true;
    let mut residuals = Vec::new();
    let mut parts = Vec::new();
    for eps in [1e-2, 1e-3] {
        let cfg = SolverConfig::new(1.0, 1.0, 0.05, 100.0, eps).unwrap();
        let mut sink = (Vec::<DiagnosticsRecord>::new(), MaxAbs::default());
        if let Err(e) = run(&init, &cfg, &mesh, &pots, &VelocityField::Zero, &mut sink) {
            return outcome(false, format!("eps {eps}: {e}"));
        }
        let max_abs = sink.1 .0;
        let res = sink.0.last().unwrap().stat_residual;
        passed &= max_abs <= 1.0 + 10.0 * eps;
        residuals.push(res);
        parts.push(format!("eps {eps:.0e}: max|rho| {max_abs:.5}, residual {res:.2e}"));
    }
    passed &= residuals.windows(2).all(|w| w[1] < w[0]);
    outcome(passed, parts.join("; "))
}

// 9 ------------------------------------------------------------------------

fn compatibility_gate() -> Outcome {
    let grid = SampleGrid::default();
    let log = PotentialSpec::logarithmic(2.0).unwrap();
    let reg = PotentialSpec::regular();
    let rejected = matches!(check_compatibility(&log, &reg, &grid, None), Err(Error::DomainInclusion { .. }));
    let accepted = check_compatibility(&reg, &log, &grid, None);
    match accepted {
        Ok(r) => outcome(
            rejected && r.satisfied && r.eta.is_finite() && r.c.is_finite(),
            format!("log/regular rejected: {rejected}; regular/log accepted with eta {}, C {:.3e}", r.eta, r.c),
        ),
        Err(e) => outcome(false, format!("regular/log rejected: {e}")),
    }
}

fn main() {
    let criteria: Vec<(u32, &str, fn() -> Outcome)> = vec![
        (1, "operator suite", operator_suite),
        (2, "potential suite", potential_suite),
        (3, "conservation", conservation),
        (4, "energy dissipation", energy_dissipation),
        (5, "oracle step equivalence", oracle_step),
        (6, "omega-limit", || omega_limit(VelocityField::Zero)),
        (7, "convection robustness", || {
            let mesh = spinodal_mesh();
            let u = VelocityField::decaying_shear(1.0, 0.05, 1, &mesh).unwrap();
            debug_assert!(!u.is_zero());
            omega_limit(u)
        }),
        (8, "regularization sweep", regularization_sweep),
        (9, "compatibility gate", compatibility_gate),
    ];
    let handles: Vec<_> = criteria
        .into_iter()
        .map(|(id, name, f)| {
            let h = thread::Builder::new()
                .stack_size(16 << 20)
                .spawn(move || {
                    let t = Instant::now();
                    let o = f();
                    (o, t.elapsed())
                })
                .unwrap();
            (id, name, h)
        })
        .collect();
    let mut failed = 0;
    for (id, name, h) in handles {
        let (o, elapsed) = match h.join() {
            Ok(r) => r,
            Err(_) => (outcome(false, "panicked".into()), Duration::ZERO),
        };
        if !o.passed {
            failed += 1;
        }
        println!(
            "criterion {id} {name}: {} ({}; {:.1}s)",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
