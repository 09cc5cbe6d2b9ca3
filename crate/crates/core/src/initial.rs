//! Initial order parameters.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{generalized_mean, BulkSurfaceField, StripMesh};
use crate::solver::PotentialPair;
use crate::{Error, Result};

/// Distance kept from the end points of a bounded potential domain.
pub const DOMAIN_INSET: f64 = 1e-8;

/// A validated initial order parameter and its generalized mean `m0`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    rho0: BulkSurfaceField,
    m0: f64,
    inset_nodes: usize,
}

impl InitialData {
    /// Checks `rho0` against the potential domains. Values within
    /// [`DOMAIN_INSET`] of a finite end of `D(beta)` (bulk) or `D(beta_G)`
    /// (boundary rows) are moved inside and counted in
    /// [`InitialData::inset_nodes`]; values further out are rejected.
    pub fn new(mesh: &StripMesh, mut rho0: BulkSurfaceField, pots: &PotentialPair) -> Result<Self> {
        rho0.check(mesh)?;
        let mut inset_nodes = 0;
        let nx = mesh.nx();
        for (k, v) in rho0.bulk_mut().iter_mut().enumerate() {
            let j = k / nx;
            let domain = if mesh.is_boundary_row(j) {
                let (b, s) = (pots.bulk.domain(), pots.surface.domain());
                // D(beta_G) is the binding one when the compatibility holds
                if s.is_subset_of(&b) { s } else { b }
            } else {
                pots.bulk.domain()
            };
            if !v.is_finite() {
                return Err(Error::DomainViolation { value: *v, domain: format!("{domain}") });
            }
            if domain.touches_boundary(*v, DOMAIN_INSET) {
                let inside = domain.contains(*v);
                let on_edge = (*v - domain.lo).abs() <= DOMAIN_INSET || (*v - domain.hi).abs() <= DOMAIN_INSET;
                if !inside && !on_edge {
                    return Err(Error::DomainViolation { value: *v, domain: format!("{domain}") });
                }
                *v = domain.clamp_inset(*v, DOMAIN_INSET);
                inset_nodes += 1;
            }
        }
        let m0 = generalized_mean(&rho0, mesh)?;
        let ds = pots.surface.domain();
        if !ds.interior_contains(m0) {
            return Err(Error::MeanNotInterior { m0, domain: format!("{ds}") });
        }
        Ok(Self { rho0, m0, inset_nodes })
    }

    pub fn rho0(&self) -> &BulkSurfaceField {
        &self.rho0
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    /// Number of nodes moved off the boundary of the potential domain.
    pub fn inset_nodes(&self) -> usize {
        self.inset_nodes
    }
}

/// `m0` plus uniform noise in `[-amplitude, amplitude]`, shifted so that the
/// generalized mean is `m0`, then clamped into the interior of `domain`.
pub fn noise(
    mesh: &StripMesh,
    m0: f64,
    amplitude: f64,
    seed: u64,
    domain: &crate::potentials::Interval,
) -> Result<BulkSurfaceField> {
    if !(amplitude >= 0.0) {
        return Err(Error::InvalidParameter { name: "amplitude", reason: format!("must be nonnegative, got {amplitude}") });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..mesh.nodes())
        .map(|_| if amplitude > 0.0 { rng.random_range(-amplitude..=amplitude) } else { 0.0 })
        .collect();
    let field = BulkSurfaceField::from_bulk(mesh, values)?;
    let shift = m0 - generalized_mean(&field, mesh)?;
    Ok(field.map(|v| domain.clamp_inset(v + shift, DOMAIN_INSET)))
}

/// A layered profile `m0 + amplitude * tanh((y - ly/2) / (sqrt(2) width))`,
/// shifted to mean `m0`.
pub fn tanh_profile(
    mesh: &StripMesh,
    m0: f64,
    amplitude: f64,
    width: f64,
    domain: &crate::potentials::Interval,
) -> Result<BulkSurfaceField> {
    if !(width > 0.0) {
        return Err(Error::InvalidParameter { name: "width", reason: format!("must be positive, got {width}") });
    }
    let ly = mesh.ly();
    let s = core::f64::consts::SQRT_2 * width;
    let field = BulkSurfaceField::from_fn(mesh, |_, y| amplitude * libm::tanh((y - 0.5 * ly) / s));
    let shift = m0 - generalized_mean(&field, mesh)?;
    Ok(field.map(|v| domain.clamp_inset(v + shift, DOMAIN_INSET)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{Interval, PotentialSpec};

    #[test]
    fn noise_hits_mean_and_is_deterministic() {
        let m = StripMesh::new(16, 8, 2.0, 1.0).unwrap();
        let a = noise(&m, 0.2, 0.1, 7, &Interval::REAL_LINE).unwrap();
        let b = noise(&m, 0.2, 0.1, 7, &Interval::REAL_LINE).unwrap();
        let c = noise(&m, 0.2, 0.1, 8, &Interval::REAL_LINE).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((generalized_mean(&a, &m).unwrap() - 0.2).abs() < 1e-15);
        // the mean shift is itself bounded by the amplitude
        assert!(a.bulk().iter().all(|v| (v - 0.2).abs() <= 0.2 + 1e-12));
    }

    #[test]
    fn tanh_profile_is_layered() {
        let m = StripMesh::new(8, 17, 4.0, 4.0).unwrap();
        let f = tanh_profile(&m, 0.0, 1.0, 0.5, &Interval::REAL_LINE).unwrap();
        assert!(f.bottom().iter().all(|v| *v < -0.9));
        assert!(f.top().iter().all(|v| *v > 0.9));
        assert!(generalized_mean(&f, &m).unwrap().abs() < 1e-15);
    }

    #[test]
    fn boundary_values_are_inset() {
        let m = StripMesh::new(8, 5, 1.0, 1.0).unwrap();
        let obs = PotentialSpec::double_obstacle(1.0).unwrap();
        let pots = PotentialPair::new(obs.clone(), obs);
        let mut rho = BulkSurfaceField::constant(&m, 0.0);
        rho.bulk_mut()[3] = 1.0;
        rho.bulk_mut()[20] = -1.0;
        let data = InitialData::new(&m, rho, &pots).unwrap();
        assert_eq!(data.inset_nodes(), 2);
        assert_eq!(data.rho0().bulk()[3], 1.0 - DOMAIN_INSET);

        let mut out = BulkSurfaceField::constant(&m, 0.0);
        out.bulk_mut()[5] = 1.5;
        assert!(matches!(InitialData::new(&m, out, &pots), Err(Error::DomainViolation { .. })));
    }

    #[test]
    fn mean_must_be_interior() {
        let m = StripMesh::new(8, 5, 1.0, 1.0).unwrap();
        let obs = PotentialSpec::double_obstacle(1.0).unwrap();
        let pots = PotentialPair::new(obs.clone(), obs);
        let rho = BulkSurfaceField::constant(&m, 1.0);
        // every node is inset, so the mean is 1 - 1e-8: still interior
        assert!(InitialData::new(&m, rho, &pots).is_ok());
        let log = PotentialSpec::logarithmic(2.0).unwrap();
        let pots = PotentialPair::new(log.clone(), log);
        let rho = BulkSurfaceField::constant(&m, 0.3);
        assert!((InitialData::new(&m, rho, &pots).unwrap().m0() - 0.3).abs() < 1e-15);
    }
}
