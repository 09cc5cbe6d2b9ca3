//! Discrete bulk-surface calculus on the periodic strip
//! `Omega = [0, lx) x [0, ly]`, periodic in `x`, whose boundary `Gamma` is
//! the pair of lines `y = 0` (bottom) and `y = ly` (top).
//!
//! Nodes sit at `(i * hx, j * hy)` for `i < nx`, `j < ny`, so the first and
//! last rows lie on `Gamma`. Bulk integrals use the trapezoidal rule in `y`
//! (half weight on the boundary rows), surface integrals the periodic
//! rectangle rule. The stiffness form
//!
//! ```text
//! a(f, g) = sum_edges  c_e (f_b - f_a) (g_b - g_a)
//! ```
//!
//! is the same quadrature applied to `grad f . grad g` plus
//! `grad_G f . grad_G g` on both lines. Its nodal action equals, exactly,
//! `w_bulk * (-lap f) + w_surf * (d_nu f - lap_G f)` when the bulk
//! Laplacian on a boundary row is closed with a ghost node built from the
//! one-sided normal derivative.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{BandLu, BandMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripMesh {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    hx: f64,
    hy: f64,
}

impl StripMesh {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 4 {
            return Err(Error::DimensionTooSmall(format!("nx = {nx} < 4")));
        }
        if ny < 3 {
            return Err(Error::DimensionTooSmall(format!("ny = {ny} < 3")));
        }
        if !(lx > 0.0 && lx.is_finite()) || !(ly > 0.0 && ly.is_finite()) {
            return Err(Error::DimensionTooSmall(format!(
                "lengths must be positive, got lx = {lx}, ly = {ly}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            hx: lx / nx as f64,
            hy: ly / (ny - 1) as f64,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn nodes(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        if j + 1 == self.ny {
            self.ly
        } else {
            j as f64 * self.hy
        }
    }

    #[inline]
    pub fn is_boundary_row(&self, j: usize) -> bool {
        j == 0 || j + 1 == self.ny
    }

    #[inline]
    pub(crate) fn east(&self, i: usize) -> usize {
        if i + 1 == self.nx {
            0
        } else {
            i + 1
        }
    }

    #[inline]
    pub(crate) fn west(&self, i: usize) -> usize {
        if i == 0 {
            self.nx - 1
        } else {
            i - 1
        }
    }

    /// Trapezoidal bulk weight of a node on row `j`.
    #[inline]
    pub fn bulk_weight(&self, j: usize) -> f64 {
        if self.is_boundary_row(j) {
            0.5 * self.hx * self.hy
        } else {
            self.hx * self.hy
        }
    }

    /// Surface weight of a node on row `j` (zero off the boundary).
    #[inline]
    pub fn surface_weight(&self, j: usize) -> f64 {
        if self.is_boundary_row(j) {
            self.hx
        } else {
            0.0
        }
    }

    /// Combined bulk plus surface weight, the diagonal of the lumped mass.
    #[inline]
    pub fn mass_weight(&self, j: usize) -> f64 {
        self.bulk_weight(j) + self.surface_weight(j)
    }

    pub fn mass_weights(&self) -> Vec<f64> {
        (0..self.nodes())
            .map(|k| self.mass_weight(k / self.nx))
            .collect()
    }

    /// `|Omega|` as seen by the bulk quadrature.
    pub fn volume(&self) -> f64 {
        (0..self.ny).map(|j| self.bulk_weight(j)).sum::<f64>() * self.nx as f64
    }

    /// `|Gamma|` as seen by the surface quadrature.
    pub fn area(&self) -> f64 {
        2.0 * self.hx * self.nx as f64
    }

    /// `|Omega| + |Gamma|`.
    pub fn total_measure(&self) -> f64 {
        self.volume() + self.area()
    }

    fn shape(&self) -> alloc::string::String {
        format!("{}x{}", self.nx, self.ny)
    }
}

fn check_shape(mesh: &StripMesh, nx: usize, ny: usize) -> Result<()> {
    if mesh.nx != nx || mesh.ny != ny {
        return Err(Error::ShapeMismatch {
            expected: mesh.shape(),
            actual: format!("{nx}x{ny}"),
        });
    }
    Ok(())
}

/// A trace-coupled pair `(v, v_G)`.
///
/// Only the bulk nodal values are stored; the surface values are the first
/// and last rows, so `v_G = v|_Gamma` holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BulkSurfaceField {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl BulkSurfaceField {
    pub fn zeros(mesh: &StripMesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    pub fn constant(mesh: &StripMesh, c: f64) -> Self {
        Self {
            nx: mesh.nx,
            ny: mesh.ny,
            values: vec![c; mesh.nodes()],
        }
    }

    pub fn from_fn(mesh: &StripMesh, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(mesh.nodes());
        for j in 0..mesh.ny {
            for i in 0..mesh.nx {
                values.push(f(mesh.x(i), mesh.y(j)));
            }
        }
        Self {
            nx: mesh.nx,
            ny: mesh.ny,
            values,
        }
    }

    /// Wraps row-major bulk values (`index = j * nx + i`).
    pub fn from_bulk(mesh: &StripMesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.nodes() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", mesh.nodes()),
                actual: format!("{} values", values.len()),
            });
        }
        Ok(Self {
            nx: mesh.nx,
            ny: mesh.ny,
            values,
        })
    }

    /// Builds a field from separately supplied bulk and surface values,
    /// rejecting surface values that disagree with the bulk trace.
    pub fn from_parts(
        mesh: &StripMesh,
        bulk: Vec<f64>,
        bottom: &[f64],
        top: &[f64],
    ) -> Result<Self> {
        let field = Self::from_bulk(mesh, bulk)?;
        if bottom.len() != mesh.nx || top.len() != mesh.nx {
            return Err(Error::ShapeMismatch {
                expected: format!("surface arrays of length {}", mesh.nx),
                actual: format!("{} and {}", bottom.len(), top.len()),
            });
        }
        if field.bottom() != bottom || field.top() != top {
            return Err(Error::TraceMismatch);
        }
        Ok(field)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn bulk(&self) -> &[f64] {
        &self.values
    }

    pub fn bulk_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_bulk(self) -> Vec<f64> {
        self.values
    }

    pub fn bottom(&self) -> &[f64] {
        &self.values[..self.nx]
    }

    pub fn top(&self) -> &[f64] {
        &self.values[(self.ny - 1) * self.nx..]
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn check(&self, mesh: &StripMesh) -> Result<()> {
        check_shape(mesh, self.nx, self.ny)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            nx: self.nx,
            ny: self.ny,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        Self {
            nx: self.nx,
            ny: self.ny,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }
}

/// Values on the two boundary lines.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceValues {
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
}

/// An element of the dual space: bulk and surface densities paired with a
/// test pair through `<g, v> = int_Omega g v + int_Gamma g_G v_G`.
///
/// Unlike [`BulkSurfaceField`], the surface densities are independent of the
/// bulk ones, which also makes this the natural carrier for elements of
/// `H = L2(Omega) x L2(Gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPair {
    nx: usize,
    ny: usize,
    pub bulk: Vec<f64>,
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
}

impl DualPair {
    pub fn zeros(mesh: &StripMesh) -> Self {
        Self {
            nx: mesh.nx,
            ny: mesh.ny,
            bulk: vec![0.0; mesh.nodes()],
            bottom: vec![0.0; mesh.nx],
            top: vec![0.0; mesh.nx],
        }
    }

    pub fn new(mesh: &StripMesh, bulk: Vec<f64>, bottom: Vec<f64>, top: Vec<f64>) -> Result<Self> {
        if bulk.len() != mesh.nodes() || bottom.len() != mesh.nx || top.len() != mesh.nx {
            return Err(Error::ShapeMismatch {
                expected: format!("{} bulk + 2x{} surface values", mesh.nodes(), mesh.nx),
                actual: format!("{} + {} + {}", bulk.len(), bottom.len(), top.len()),
            });
        }
        Ok(Self {
            nx: mesh.nx,
            ny: mesh.ny,
            bulk,
            bottom,
            top,
        })
    }

    /// The pair `(v, v|_Gamma)` seen as a density.
    pub fn from_field(field: &BulkSurfaceField) -> Self {
        Self {
            nx: field.nx,
            ny: field.ny,
            bulk: field.values.clone(),
            bottom: field.bottom().to_vec(),
            top: field.top().to_vec(),
        }
    }

    /// Represents nodal loads `l_k = <g, phi_k>` as a density, spreading
    /// each load uniformly over the bulk and surface weight of its node.
    pub fn from_loads(mesh: &StripMesh, loads: &[f64]) -> Result<Self> {
        if loads.len() != mesh.nodes() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} loads", mesh.nodes()),
                actual: format!("{} loads", loads.len()),
            });
        }
        let mut out = Self::zeros(mesh);
        for j in 0..mesh.ny {
            let m = mesh.mass_weight(j);
            for i in 0..mesh.nx {
                let k = mesh.index(i, j);
                let d = loads[k] / m;
                out.bulk[k] = d;
                if j == 0 {
                    out.bottom[i] = d;
                } else if j + 1 == mesh.ny {
                    out.top[i] = d;
                }
            }
        }
        Ok(out)
    }

    pub fn check(&self, mesh: &StripMesh) -> Result<()> {
        check_shape(mesh, self.nx, self.ny)?;
        if self.bulk.len() != mesh.nodes() || self.bottom.len() != mesh.nx || self.top.len() != mesh.nx {
            return Err(Error::ShapeMismatch {
                expected: format!("{} bulk + 2x{} surface values", mesh.nodes(), mesh.nx),
                actual: format!("{} + {} + {}", self.bulk.len(), self.bottom.len(), self.top.len()),
            });
        }
        Ok(())
    }

    /// Nodal loads `<g, phi_k>` against the nodal basis.
    pub fn loads(&self, mesh: &StripMesh) -> Result<Vec<f64>> {
        self.check(mesh)?;
        let mut out = Vec::with_capacity(mesh.nodes());
        for j in 0..mesh.ny {
            let wb = mesh.bulk_weight(j);
            for i in 0..mesh.nx {
                let k = mesh.index(i, j);
                let mut l = wb * self.bulk[k];
                if j == 0 {
                    l += mesh.hx * self.bottom[i];
                } else if j + 1 == mesh.ny {
                    l += mesh.hx * self.top[i];
                }
                out.push(l);
            }
        }
        Ok(out)
    }

    /// `<g, v>`
    pub fn pair(&self, mesh: &StripMesh, v: &BulkSurfaceField) -> Result<f64> {
        v.check(mesh)?;
        Ok(self.loads(mesh)?.iter().zip(v.bulk()).map(|(l, v)| l * v).sum())
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            nx: self.nx,
            ny: self.ny,
            bulk: self.bulk.iter().map(|v| alpha * v).collect(),
            bottom: self.bottom.iter().map(|v| alpha * v).collect(),
            top: self.top.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Self {
        let zip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| a + alpha * b).collect();
        Self {
            nx: self.nx,
            ny: self.ny,
            bulk: zip(&self.bulk, &other.bulk),
            bottom: zip(&self.bottom, &other.bottom),
            top: zip(&self.top, &other.top),
        }
    }

    /// Subtracts the generalized mean, producing an element of `V*_0`.
    pub fn without_mean(&self, mesh: &StripMesh) -> Result<Self> {
        let m = dual_mean(self, mesh)?;
        Ok(Self {
            nx: self.nx,
            ny: self.ny,
            bulk: self.bulk.iter().map(|v| v - m).collect(),
            bottom: self.bottom.iter().map(|v| v - m).collect(),
            top: self.top.iter().map(|v| v - m).collect(),
        })
    }
}

pub fn integrate_bulk(f: &BulkSurfaceField, mesh: &StripMesh) -> Result<f64> {
    f.check(mesh)?;
    let mut total = 0.0;
    for j in 0..mesh.ny {
        let row: f64 = f.values[j * mesh.nx..(j + 1) * mesh.nx].iter().sum();
        total += mesh.bulk_weight(j) * row;
    }
    Ok(total)
}

pub fn integrate_surface(f: &BulkSurfaceField, mesh: &StripMesh) -> Result<f64> {
    f.check(mesh)?;
    let s: f64 = f.bottom().iter().chain(f.top()).sum();
    Ok(mesh.hx * s)
}

/// `(int_Omega v + int_Gamma v_G) / (|Omega| + |Gamma|)`.
pub fn generalized_mean(f: &BulkSurfaceField, mesh: &StripMesh) -> Result<f64> {
    Ok((integrate_bulk(f, mesh)? + integrate_surface(f, mesh)?) / mesh.total_measure())
}

/// `<g, (1, 1)> / (|Omega| + |Gamma|)`.
pub fn dual_mean(g: &DualPair, mesh: &StripMesh) -> Result<f64> {
    Ok(g.loads(mesh)?.iter().sum::<f64>() / mesh.total_measure())
}

/// Five-point Laplacian, periodic in `x`. On the boundary rows the missing
/// neighbour is replaced by the ghost value implied by
/// [`normal_derivative`].
pub fn bulk_laplacian(f: &BulkSurfaceField, mesh: &StripMesh) -> Result<Vec<f64>> {
    f.check(mesh)?;
    let (nx, ny) = (mesh.nx, mesh.ny);
    let (ihx2, ihy2) = (1.0 / (mesh.hx * mesh.hx), 1.0 / (mesh.hy * mesh.hy));
    let dn = normal_derivative(f, mesh)?;
    let mut out = vec![0.0; mesh.nodes()];
    for j in 0..ny {
        for i in 0..nx {
            let c = f.at(i, j);
            let dxx = (f.at(mesh.east(i), j) - 2.0 * c + f.at(mesh.west(i), j)) * ihx2;
            let dyy = if j == 0 {
                2.0 * (f.at(i, 1) - c) * ihy2 + 2.0 * dn.bottom[i] / mesh.hy
            } else if j + 1 == ny {
                2.0 * (f.at(i, ny - 2) - c) * ihy2 + 2.0 * dn.top[i] / mesh.hy
            } else {
                (f.at(i, j + 1) - 2.0 * c + f.at(i, j - 1)) * ihy2
            };
            out[mesh.index(i, j)] = dxx + dyy;
        }
    }
    Ok(out)
}

/// Periodic three-point Laplace-Beltrami operator along each boundary line.
pub fn surface_laplacian(f: &BulkSurfaceField, mesh: &StripMesh) -> Result<SurfaceValues> {
    f.check(mesh)?;
    let ihx2 = 1.0 / (mesh.hx * mesh.hx);
    let line = |row: &[f64]| -> Vec<f64> {
        (0..mesh.nx)
            .map(|i| (row[mesh.east(i)] - 2.0 * row[i] + row[mesh.west(i)]) * ihx2)
            .collect()
    };
    Ok(SurfaceValues {
        bottom: line(f.bottom()),
        top: line(f.top()),
    })
}

/// Outward normal derivative by second-order one-sided differences.
pub fn normal_derivative(f: &BulkSurfaceField, mesh: &StripMesh) -> Result<SurfaceValues> {
    f.check(mesh)?;
    let ny = mesh.ny;
    let s = 0.5 / mesh.hy;
    let bottom = (0..mesh.nx)
        .map(|i| (3.0 * f.at(i, 0) - 4.0 * f.at(i, 1) + f.at(i, 2)) * s)
        .collect();
    let top = (0..mesh.nx)
        .map(|i| (3.0 * f.at(i, ny - 1) - 4.0 * f.at(i, ny - 2) + f.at(i, ny - 3)) * s)
        .collect();
    Ok(SurfaceValues { bottom, top })
}

/// `a(f, .)` as a dual pair with bulk density `-lap f` and surface density
/// `d_nu f - lap_G f`.
pub fn weak_stiffness_apply(f: &BulkSurfaceField, mesh: &StripMesh) -> Result<DualPair> {
    let lap = bulk_laplacian(f, mesh)?;
    let lap_g = surface_laplacian(f, mesh)?;
    let dn = normal_derivative(f, mesh)?;
    let bulk = lap.into_iter().map(|v| -v).collect();
    let bottom = dn.bottom.iter().zip(&lap_g.bottom).map(|(a, b)| a - b).collect();
    let top = dn.top.iter().zip(&lap_g.top).map(|(a, b)| a - b).collect();
    DualPair::new(mesh, bulk, bottom, top)
}

/// Edge coefficients of the stiffness form: `cx[j]` couples `x`-neighbours
/// on row `j`, `cy` couples `y`-neighbours.
#[derive(Debug, Clone)]
pub(crate) struct Stiffness {
    cx: Vec<f64>,
    cy: f64,
}

impl Stiffness {
    pub(crate) fn new(mesh: &StripMesh) -> Self {
        let cx = (0..mesh.ny)
            .map(|j| {
                let bulk = mesh.bulk_weight(j) / (mesh.hx * mesh.hx);
                let surf = mesh.surface_weight(j) / (mesh.hx * mesh.hx);
                bulk + surf
            })
            .collect();
        Self {
            cx,
            cy: mesh.hx / mesh.hy,
        }
    }

    /// Nodal loads of `a(f, .)`.
    pub(crate) fn apply(&self, mesh: &StripMesh, f: &[f64], out: &mut [f64]) {
        let (nx, ny) = (mesh.nx, mesh.ny);
        for j in 0..ny {
            let cx = self.cx[j];
            for i in 0..nx {
                let k = j * nx + i;
                let c = f[k];
                let mut acc = cx * ((c - f[j * nx + mesh.east(i)]) + (c - f[j * nx + mesh.west(i)]));
                if j > 0 {
                    acc += self.cy * (c - f[k - nx]);
                }
                if j + 1 < ny {
                    acc += self.cy * (c - f[k + nx]);
                }
                out[k] = acc;
            }
        }
    }

    /// `a(f, g)` summed edge by edge; symmetric in `f` and `g` bit for bit.
    pub(crate) fn form(&self, mesh: &StripMesh, f: &[f64], g: &[f64]) -> f64 {
        let (nx, ny) = (mesh.nx, mesh.ny);
        let mut total = 0.0;
        for j in 0..ny {
            let mut row = 0.0;
            for i in 0..nx {
                let k = j * nx + i;
                let e = j * nx + mesh.east(i);
                row += self.cx[j] * (f[e] - f[k]) * (g[e] - g[k]);
                if j + 1 < ny {
                    row += self.cy * (f[k + nx] - f[k]) * (g[k + nx] - g[k]);
                }
            }
            total += row;
        }
        total
    }

    /// Adds `scale * A` into a band matrix whose unknown for node `k` sits at
    /// `stride * k + offset_col`, and whose equation sits at
    /// `stride * k + offset_row`.
    pub(crate) fn assemble(
        &self,
        mesh: &StripMesh,
        band: &mut BandMatrix,
        stride: usize,
        offset_row: usize,
        offset_col: usize,
        scale: f64,
    ) {
        let (nx, ny) = (mesh.nx, mesh.ny);
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let row = stride * k + offset_row;
                let col = |m: usize| stride * m + offset_col;
                let cx = scale * self.cx[j];
                let mut diag = 2.0 * cx;
                band.add(row, col(j * nx + mesh.east(i)), -cx);
                band.add(row, col(j * nx + mesh.west(i)), -cx);
                if j > 0 {
                    band.add(row, col(k - nx), -scale * self.cy);
                    diag += scale * self.cy;
                }
                if j + 1 < ny {
                    band.add(row, col(k + nx), -scale * self.cy);
                    diag += scale * self.cy;
                }
                band.add(row, col(k), diag);
            }
        }
    }
}

/// `a(f, g) = int grad f . grad g + int_Gamma grad_G f . grad_G g`.
pub fn stiffness_form(f: &BulkSurfaceField, g: &BulkSurfaceField, mesh: &StripMesh) -> Result<f64> {
    f.check(mesh)?;
    g.check(mesh)?;
    Ok(Stiffness::new(mesh).form(mesh, &f.values, &g.values))
}

/// `(|grad v|^2 + |grad_G v_G|^2)` split into bulk and surface parts.
pub fn gradient_norms_squared(f: &BulkSurfaceField, mesh: &StripMesh) -> Result<(f64, f64)> {
    f.check(mesh)?;
    let (nx, ny) = (mesh.nx, mesh.ny);
    let v = &f.values;
    let mut bulk = 0.0;
    let mut surf = 0.0;
    for j in 0..ny {
        let wb = mesh.bulk_weight(j) / (mesh.hx * mesh.hx);
        let ws = mesh.surface_weight(j) / (mesh.hx * mesh.hx);
        for i in 0..nx {
            let k = j * nx + i;
            let dx = v[j * nx + mesh.east(i)] - v[k];
            bulk += wb * dx * dx;
            surf += ws * dx * dx;
            if j + 1 < ny {
                let dy = v[k + nx] - v[k];
                bulk += mesh.hx / mesh.hy * dy * dy;
            }
        }
    }
    Ok((bulk, surf))
}

/// Factorized inverse of the bulk-surface stiffness on zero-mean data.
///
/// The constant kernel is removed by pinning node 0, which is exact for
/// compatible loads (their sum vanishes, so the dropped equation is implied
/// by the others); the generalized mean is then projected out.
#[derive(Debug, Clone)]
pub struct NOperator {
    mesh: StripMesh,
    stiffness: Stiffness,
    lu: BandLu,
    mass: Vec<f64>,
}

impl NOperator {
    pub fn new(mesh: &StripMesh) -> Result<Self> {
        let stiffness = Stiffness::new(mesh);
        let n = mesh.nodes();
        let mut band = BandMatrix::zeros(n, mesh.nx, mesh.nx);
        stiffness.assemble(mesh, &mut band, 1, 0, 0, 1.0);
        band.clear_row(0);
        band.set(0, 0, 1.0);
        Ok(Self {
            mesh: *mesh,
            stiffness,
            lu: band.factor()?,
            mass: mesh.mass_weights(),
        })
    }

    pub fn mesh(&self) -> &StripMesh {
        &self.mesh
    }

    /// Solves `a(xi, v) = <g, v>` for all `v` with `mean(xi) = 0`.
    pub fn solve(&self, g: &DualPair, tol: f64) -> Result<BulkSurfaceField> {
        let mesh = &self.mesh;
        let loads = g.loads(mesh)?;
        let total: f64 = loads.iter().sum();
        let scale = loads.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let mean = total / mesh.total_measure();
        if mean.abs() > 1e-10 {
            return Err(Error::NonzeroMean { mean });
        }
        let mut rhs = loads.clone();
        // exact compatibility before dropping equation 0
        let shift = total / self.mass.iter().sum::<f64>();
        for (r, m) in rhs.iter_mut().zip(&self.mass) {
            *r -= shift * m;
        }
        let target = rhs.clone();
        rhs[0] = 0.0;
        self.lu.solve_in_place(&mut rhs);
        let mut xi = rhs;
        self.project_mean(&mut xi);

        let mut res = self.residual(&xi, &target);
        if res > tol * (1.0 + scale) {
            // one step of iterative refinement
            let mut ax = vec![0.0; xi.len()];
            self.stiffness.apply(mesh, &xi, &mut ax);
            let mut corr: Vec<f64> = target.iter().zip(&ax).map(|(t, a)| t - a).collect();
            corr[0] = 0.0;
            self.lu.solve_in_place(&mut corr);
            for (x, c) in xi.iter_mut().zip(&corr) {
                *x += c;
            }
            self.project_mean(&mut xi);
            res = self.residual(&xi, &target);
            if res > tol * (1.0 + scale) {
                return Err(Error::LinearSolve { residual: res, tol });
            }
        }
        BulkSurfaceField::from_bulk(mesh, xi)
    }

    fn project_mean(&self, xi: &mut [f64]) {
        let m = xi.iter().zip(&self.mass).map(|(x, w)| x * w).sum::<f64>() / self.mesh.total_measure();
        xi.iter_mut().for_each(|x| *x -= m);
    }

    fn residual(&self, xi: &[f64], target: &[f64]) -> f64 {
        let mut ax = vec![0.0; xi.len()];
        self.stiffness.apply(&self.mesh, xi, &mut ax);
        ax.iter()
            .zip(target)
            .fold(0.0, |m: f64, (a, t)| m.max((a - t).abs()))
    }

    /// `||g||_* = sqrt(<g, N g>)`.
    pub fn h_star_norm(&self, g: &DualPair, tol: f64) -> Result<f64> {
        let xi = self.solve(g, tol)?;
        let a = self.stiffness.form(&self.mesh, xi.bulk(), xi.bulk());
        Ok(libm::sqrt(a.max(0.0)))
    }
}

/// Default tolerance used by [`solve_n`] callers that do not choose one.
pub const N_TOLERANCE: f64 = 1e-10;

/// One-shot `N g`; factorizes the stiffness on every call.
pub fn solve_n(g: &DualPair, mesh: &StripMesh, tol: f64) -> Result<BulkSurfaceField> {
    NOperator::new(mesh)?.solve(g, tol)
}

pub fn h_star_norm(g: &DualPair, mesh: &StripMesh) -> Result<f64> {
    NOperator::new(mesh)?.h_star_norm(g, N_TOLERANCE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn unit(nx: usize, ny: usize) -> StripMesh {
        StripMesh::new(nx, ny, 1.0, 1.0).unwrap()
    }

    #[test]
    fn mesh_measures() {
        let m = unit(8, 5);
        assert_eq!(m.volume(), 1.0);
        assert_eq!(m.area(), 2.0);
        let m = StripMesh::new(4, 3, 2.0, 0.5).unwrap();
        assert!((m.volume() - 1.0).abs() < 1e-15);
        assert!((m.area() - 4.0).abs() < 1e-15);
        assert!(matches!(
            StripMesh::new(3, 3, 1.0, 1.0),
            Err(Error::DimensionTooSmall(_))
        ));
        assert!(StripMesh::new(4, 2, 1.0, 1.0).is_err());
        assert!(StripMesh::new(4, 3, 0.0, 1.0).is_err());
    }

    #[test]
    fn integrals() {
        let m = unit(8, 5);
        let one = BulkSurfaceField::constant(&m, 1.0);
        assert_eq!(integrate_bulk(&one, &m).unwrap(), 1.0);
        assert_eq!(integrate_surface(&one, &m).unwrap(), 2.0);

        let s = BulkSurfaceField::from_fn(&m, |x, _| libm::sin(2.0 * PI * x));
        assert!(integrate_bulk(&s, &m).unwrap().abs() < 1e-12);

        let m33 = unit(8, 33);
        let y = BulkSurfaceField::from_fn(&m33, |_, y| y);
        assert!((integrate_bulk(&y, &m33).unwrap() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn means() {
        let m = unit(8, 5);
        let c = BulkSurfaceField::constant(&m, -0.3);
        assert!((generalized_mean(&c, &m).unwrap() + 0.3).abs() < 1e-15);
        let one = BulkSurfaceField::constant(&m, 1.0);
        assert_eq!(generalized_mean(&one, &m).unwrap(), 1.0);

        // bulk 0, surface 3, expressed as a density (the pair is not trace coupled)
        let mut g = DualPair::zeros(&m);
        g.bottom.iter_mut().chain(g.top.iter_mut()).for_each(|v| *v = 3.0);
        assert!((dual_mean(&g, &m).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = unit(8, 5);
        let b = unit(8, 6);
        let f = BulkSurfaceField::zeros(&a);
        assert!(matches!(integrate_bulk(&f, &b), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(bulk_laplacian(&f, &b), Err(Error::ShapeMismatch { .. })));
        assert!(BulkSurfaceField::from_bulk(&a, vec![0.0; 3]).is_err());
    }

    #[test]
    fn trace_coupling_enforced() {
        let m = unit(4, 3);
        let bulk: Vec<f64> = (0..12).map(|k| k as f64).collect();
        let ok = BulkSurfaceField::from_parts(&m, bulk.clone(), &[0.0, 1.0, 2.0, 3.0], &[8.0, 9.0, 10.0, 11.0]);
        assert!(ok.is_ok());
        let bad = BulkSurfaceField::from_parts(&m, bulk, &[0.0, 1.0, 2.0, 3.5], &[8.0, 9.0, 10.0, 11.0]);
        assert_eq!(bad, Err(Error::TraceMismatch));
    }

    #[test]
    fn operators_on_simple_fields() {
        let m = unit(8, 5);
        let c = BulkSurfaceField::constant(&m, 2.5);
        assert!(bulk_laplacian(&c, &m).unwrap().iter().all(|v| v.abs() < 1e-12));
        let lg = surface_laplacian(&c, &m).unwrap();
        assert!(lg.bottom.iter().chain(&lg.top).all(|v| v.abs() < 1e-12));
        let dn = normal_derivative(&c, &m).unwrap();
        assert!(dn.bottom.iter().chain(&dn.top).all(|v| v.abs() < 1e-12));
        let w = weak_stiffness_apply(&c, &m).unwrap();
        assert!(w.bulk.iter().chain(&w.bottom).chain(&w.top).all(|v| v.abs() < 1e-12));

        let y = BulkSurfaceField::from_fn(&m, |_, y| y);
        let dn = normal_derivative(&y, &m).unwrap();
        assert!(dn.bottom.iter().all(|v| (v + 1.0).abs() < 1e-12));
        assert!(dn.top.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(bulk_laplacian(&y, &m).unwrap().iter().all(|v| v.abs() < 1e-10));

        let y2 = BulkSurfaceField::from_fn(&m, |_, y| y * y);
        assert!(bulk_laplacian(&y2, &m).unwrap().iter().all(|v| (v - 2.0).abs() < 1e-10));
    }

    #[test]
    fn surface_laplacian_second_order() {
        let mut errs = [0.0; 2];
        for (slot, nx) in [32usize, 64].into_iter().enumerate() {
            let m = StripMesh::new(nx, 4, 2.0, 1.0).unwrap();
            let k = 2.0 * PI / 2.0;
            let f = BulkSurfaceField::from_fn(&m, |x, _| libm::sin(k * x));
            let lg = surface_laplacian(&f, &m).unwrap();
            errs[slot] = lg
                .bottom
                .iter()
                .zip(f.bottom())
                .fold(0.0, |e: f64, (l, v)| e.max((l + k * k * v).abs()));
        }
        let ratio = errs[0] / errs[1];
        assert!((ratio - 4.0).abs() < 0.1, "convergence ratio {ratio}");
    }

    #[test]
    fn stiffness_apply_matches_strong_form() {
        let m = StripMesh::new(7, 5, 1.3, 0.7).unwrap();
        let f = BulkSurfaceField::from_fn(&m, |x, y| libm::sin(3.0 * x + 1.0) * libm::cos(5.0 * y) + y * y);
        let strong = weak_stiffness_apply(&f, &m).unwrap().loads(&m).unwrap();
        let mut weak = vec![0.0; m.nodes()];
        Stiffness::new(&m).apply(&m, f.bulk(), &mut weak);
        for (a, b) in strong.iter().zip(&weak) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn n_of_zero_is_zero() {
        let m = unit(8, 4);
        let xi = solve_n(&DualPair::zeros(&m), &m, 1e-10).unwrap();
        assert_eq!(xi.max_abs(), 0.0);
        assert_eq!(h_star_norm(&DualPair::zeros(&m), &m).unwrap(), 0.0);
    }

    #[test]
    fn n_rejects_nonzero_mean() {
        let m = unit(8, 4);
        let g = DualPair::from_field(&BulkSurfaceField::constant(&m, 1.0));
        assert!(matches!(solve_n(&g, &m, 1e-10), Err(Error::NonzeroMean { .. })));
    }
}
