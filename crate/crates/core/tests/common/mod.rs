//! Dense reference implementations shared by the integration tests.
#![allow(dead_code)]

use chdbc_core::geometry::{
    bulk_laplacian, normal_derivative, surface_laplacian, BulkSurfaceField, DualPair, StripMesh,
};
use chdbc_core::solver::{residual, PotentialPair, SolverConfig, State};
use chdbc_core::velocity::Velocity;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_field(mesh: &StripMesh, rng: &mut ChaCha8Rng) -> BulkSurfaceField {
    let v = (0..mesh.nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
    BulkSurfaceField::from_bulk(mesh, v).unwrap()
}

pub fn random_zero_mean_load(mesh: &StripMesh, rng: &mut ChaCha8Rng) -> DualPair {
    let mut r = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    let g = DualPair::new(mesh, r(mesh.nodes()), r(mesh.nx()), r(mesh.nx())).unwrap();
    g.without_mean(mesh).unwrap()
}

/// Nodal loads of the strong-form operator
/// `w_b (-Lap f) + w_s (d_n f - Lap_G f)`.
pub fn strong_loads(mesh: &StripMesh, f: &BulkSurfaceField) -> Vec<f64> {
    let lap = bulk_laplacian(f, mesh).unwrap();
    let sl = surface_laplacian(f, mesh).unwrap();
    let dn = normal_derivative(f, mesh).unwrap();
    let nx = mesh.nx();
    let last = mesh.ny() - 1;
    let mut out: Vec<f64> = (0..mesh.nodes()).map(|k| -mesh.bulk_weight(k / nx) * lap[k]).collect();
    for i in 0..nx {
        out[i] += mesh.surface_weight(0) * (dn.bottom[i] - sl.bottom[i]);
        out[last * nx + i] += mesh.surface_weight(last) * (dn.top[i] - sl.top[i]);
    }
    out
}

/// Stiffness matrix assembled column by column from the strong form.
pub fn dense_stiffness(mesh: &StripMesh) -> DMatrix<f64> {
    let n = mesh.nodes();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = strong_loads(mesh, &BulkSurfaceField::from_bulk(mesh, e).unwrap());
        for i in 0..n {
            k[(i, j)] = col[i];
        }
    }
    k
}

/// `N g` from the bordered system `[K m; m^T 0] [x; l] = [g; 0]`.
pub fn dense_solve_n(mesh: &StripMesh, g: &DualPair) -> Vec<f64> {
    let n = mesh.nodes();
    let k = dense_stiffness(mesh);
    let mut s = DMatrix::zeros(n + 1, n + 1);
    s.view_mut((0, 0), (n, n)).copy_from(&k);
    let nx = mesh.nx();
    for i in 0..n {
        let m = mesh.mass_weight(i / nx);
        s[(i, n)] = m;
        s[(n, i)] = m;
    }
    let mut b = DVector::zeros(n + 1);
    for (i, v) in g.loads(mesh).unwrap().into_iter().enumerate() {
        b[i] = v;
    }
    let x = s.lu().solve(&b).expect("bordered system is nonsingular");
    x.iter().take(n).copied().collect()
}

fn residual_loads(
    x: &[f64],
    old: &State,
    cfg: &SolverConfig,
    mesh: &StripMesh,
    pots: &PotentialPair,
    velocity: &dyn Velocity,
) -> Vec<f64> {
    let n = mesh.nodes();
    let new = State {
        rho: BulkSurfaceField::from_bulk(mesh, x[..n].to_vec()).unwrap(),
        mu: BulkSurfaceField::from_bulk(mesh, x[n..].to_vec()).unwrap(),
        zeta: DualPair::zeros(mesh),
        t: old.t + cfg.dt,
    };
    let (r1, r2) = residual(&new, old, cfg, mesh, pots, velocity).unwrap();
    let mut out = r1.loads(mesh).unwrap();
    out.extend(r2.loads(mesh).unwrap());
    out
}

pub fn scaled_max(mesh: &StripMesh, r: &[f64]) -> f64 {
    let n = mesh.nodes();
    let nx = mesh.nx();
    r.iter().enumerate().map(|(k, v)| (v / mesh.mass_weight((k % n) / nx)).abs()).fold(0.0, f64::max)
}

/// One implicit step by damped Newton on the strong-form residual, with a
/// central finite-difference Jacobian and dense LU. Returns `(rho, mu)`.
pub fn brute_force_step(
    old: &State,
    cfg: &SolverConfig,
    mesh: &StripMesh,
    pots: &PotentialPair,
    velocity: &dyn Velocity,
    tol: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = mesh.nodes();
    let mut x: Vec<f64> = old.rho.bulk().iter().chain(old.mu.bulk()).copied().collect();
    let f = |x: &[f64]| residual_loads(x, old, cfg, mesh, pots, velocity);
    let mut r = f(&x);
    for _ in 0..200 {
        let norm = scaled_max(mesh, &r);
        if norm <= tol {
            return (x[..n].to_vec(), x[n..].to_vec());
        }
        let mut jac = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..2 * n {
            let h = 1e-7 * f64::max(1.0, x[j].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (f(&xp), f(&xm));
            for i in 0..2 * n {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let rhs = DVector::from_iterator(2 * n, r.iter().map(|v| -v));
        let dx = jac.lu().solve(&rhs).expect("dense Jacobian is nonsingular");
        let mut alpha = 1.0;
        loop {
            let xt: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + alpha * d).collect();
            let rt = f(&xt);
            if scaled_max(mesh, &rt) < norm || alpha < 1e-6 {
                x = xt;
                r = rt;
                break;
            }
            alpha *= 0.5;
        }
    }
    panic!("brute-force Newton did not converge");
}
