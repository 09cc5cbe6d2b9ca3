//! Stationary states: `A rho + F(rho) = M mu_s` with `mean(rho) = m0`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{BulkSurfaceField, DualPair, Stiffness, StripMesh};
use crate::linalg::BandMatrix;
use crate::potentials::Regularization;
use crate::solver::{energy_raw, PotentialPair};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StationarySolution {
    pub rho_s: BulkSurfaceField,
    pub zeta_s: DualPair,
    pub mu_s: f64,
    pub residual_norm: f64,
    pub energy: f64,
    pub iterations: usize,
}

/// Nodal residual `(A rho + F(rho))_k / M_k` before subtracting `mu`.
fn nodal_lhs(
    stiffness: &Stiffness,
    mesh: &StripMesh,
    pots: &PotentialPair,
    reg: Regularization,
    rho: &[f64],
    lhs: &mut [f64],
    slope: &mut [f64],
) {
    let n = mesh.nodes();
    let mut force = vec![0.0; n];
    pots.nodal_force(mesh, reg, rho, &mut force, slope);
    stiffness.apply(mesh, rho, lhs);
    for k in 0..n {
        lhs[k] += force[k];
    }
}

fn weighted_norm(mesh: &StripMesh, lhs: &[f64], mu: f64) -> f64 {
    let nx = mesh.nx();
    let mut s = 0.0;
    for (k, v) in lhs.iter().enumerate() {
        let m = mesh.mass_weight(k / nx);
        let r = v / m - mu;
        s += m * r * r;
    }
    libm::sqrt(s)
}

/// Combined discrete `L2` norm of the strong-form residual
/// `-Lap rho + beta_eps(rho) + pi(rho) - mu` in the bulk and
/// `d_n rho - Lap_G rho + beta_G,eps(rho) + pi_G(rho) - mu` on the boundary,
/// lumped per node.
pub fn stationary_residual(
    candidate: &BulkSurfaceField,
    mu_s: f64,
    mesh: &StripMesh,
    pots: &PotentialPair,
    eps: f64,
) -> Result<f64> {
    candidate.check(mesh)?;
    let reg = Regularization::from_eps(eps)?;
    let n = mesh.nodes();
    let (mut lhs, mut slope) = (vec![0.0; n], vec![0.0; n]);
    nodal_lhs(&Stiffness::new(mesh), mesh, pots, reg, candidate.bulk(), &mut lhs, &mut slope);
    Ok(weighted_norm(mesh, &lhs, mu_s))
}

/// The constant `mu` minimizing [`stationary_residual`].
pub fn best_fit_mu(candidate: &BulkSurfaceField, mesh: &StripMesh, pots: &PotentialPair, eps: f64) -> Result<f64> {
    candidate.check(mesh)?;
    let reg = Regularization::from_eps(eps)?;
    let n = mesh.nodes();
    let (mut lhs, mut slope) = (vec![0.0; n], vec![0.0; n]);
    nodal_lhs(&Stiffness::new(mesh), mesh, pots, reg, candidate.bulk(), &mut lhs, &mut slope);
    Ok(lhs.iter().sum::<f64>() / mesh.total_measure())
}

/// Bordered Newton for `(rho, mu_s)`, started from `guess` (constant `m0`
/// when absent). The mean constraint is linear, so it holds to rounding
/// after the first iteration.
pub fn solve_stationary(
    m0: f64,
    mesh: &StripMesh,
    pots: &PotentialPair,
    eps: f64,
    guess: Option<&BulkSurfaceField>,
    tol: f64,
) -> Result<StationarySolution> {
    let reg = Regularization::from_eps(eps)?;
    pots.check_admissible(reg)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter { name: "tol", reason: format!("must be positive, got {tol}") });
    }
    let ds = pots.surface.domain();
    if !ds.interior_contains(m0) {
        return Err(Error::MeanNotInterior { m0, domain: format!("{ds}") });
    }
    let n = mesh.nodes();
    let nx = mesh.nx();
    let mut rho: Vec<f64> = match guess {
        Some(g) => {
            g.check(mesh)?;
            g.bulk().to_vec()
        }
        None => vec![m0; n],
    };
    let mass: Vec<f64> = (0..n).map(|k| mesh.mass_weight(k / nx)).collect();
    let target = m0 * mesh.total_measure();
    let stiffness = Stiffness::new(mesh);
    let (mut lhs, mut slope) = (vec![0.0; n], vec![0.0; n]);
    nodal_lhs(&stiffness, mesh, pots, reg, &rho, &mut lhs, &mut slope);
    let mut mu = lhs.iter().sum::<f64>() / mesh.total_measure();
    let constraint = |rho: &[f64]| -> f64 { rho.iter().zip(&mass).map(|(r, m)| r * m).sum::<f64>() - target };
    // merit: residual norm plus the scaled constraint violation
    let merit = |lhs: &[f64], mu: f64, rho: &[f64]| -> f64 {
        weighted_norm(mesh, lhs, mu) + constraint(rho).abs() / libm::sqrt(mesh.total_measure())
    };
    let mut current = merit(&lhs, mu, &rho);
    let max_iter = 100;
    let mut iterations = 0;
    let (mut y, mut z) = (vec![0.0; n], vec![0.0; n]);
    let (mut rho_t, mut lhs_t, mut slope_t) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    while !(current <= tol && constraint(&rho).abs() <= 1e-10 * mesh.total_measure()) {
        if iterations >= max_iter || !current.is_finite() {
            return Err(Error::NewtonDivergence { iterations, residual: current });
        }
        let mut k_mat = BandMatrix::zeros(n, nx, nx);
        stiffness.assemble(mesh, &mut k_mat, 1, 0, 0, 1.0);
        for k in 0..n {
            k_mat.add(k, k, slope[k]);
        }
        let lu = k_mat.factor()?;
        for k in 0..n {
            y[k] = -(lhs[k] - mass[k] * mu);
            z[k] = mass[k];
        }
        lu.solve_in_place(&mut y);
        lu.solve_in_place(&mut z);
        let mz: f64 = mass.iter().zip(&z).map(|(m, v)| m * v).sum();
        if mz == 0.0 || !mz.is_finite() {
            return Err(Error::SingularMatrix { column: n });
        }
        let my: f64 = mass.iter().zip(&y).map(|(m, v)| m * v).sum();
        let dmu = (-constraint(&rho) - my) / mz;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=30 {
            for k in 0..n {
                rho_t[k] = rho[k] + alpha * (y[k] + z[k] * dmu);
            }
            let mu_t = mu + alpha * dmu;
            nodal_lhs(&stiffness, mesh, pots, reg, &rho_t, &mut lhs_t, &mut slope_t);
            let m = merit(&lhs_t, mu_t, &rho_t);
            if m < current {
                core::mem::swap(&mut rho, &mut rho_t);
                core::mem::swap(&mut lhs, &mut lhs_t);
                core::mem::swap(&mut slope, &mut slope_t);
                mu = mu_t;
                current = m;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        iterations += 1;
        if !accepted {
            return Err(Error::NewtonDivergence { iterations, residual: current });
        }
    }
    let residual_norm = weighted_norm(mesh, &lhs, mu);
    let energy = energy_raw(&stiffness, mesh, pots, reg, &rho);
    let rho_s = BulkSurfaceField::from_bulk(mesh, rho)?;
    let zeta_s = pots.zeta(mesh, reg, &rho_s)?;
    Ok(StationarySolution { rho_s, zeta_s, mu_s: mu, residual_norm, energy, iterations })
}

/// [`solve_stationary`] with its mesh, potentials and tolerances fixed.
#[derive(Debug, Clone)]
pub struct StationarySolver {
    pub mesh: StripMesh,
    pub pots: PotentialPair,
    pub eps: f64,
    pub tol: f64,
}

impl StationarySolver {
    pub fn solve(&self, m0: f64, guess: Option<&BulkSurfaceField>) -> Result<StationarySolution> {
        solve_stationary(m0, &self.mesh, &self.pots, self.eps, guess, self.tol)
    }
}
