//! Prescribed convection fields.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::geometry::StripMesh;
use crate::{Error, Result};

/// A velocity field `u(x, y, t)` on the strip.
pub trait Velocity {
    fn eval(&self, x: f64, y: f64, t: f64) -> (f64, f64);

    /// True if `u` vanishes identically; lets the solver skip convection.
    fn is_zero(&self) -> bool {
        false
    }
}

impl<F: Fn(f64, f64, f64) -> (f64, f64)> Velocity for F {
    fn eval(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        self(x, y, t)
    }
}

/// Built-in admissible fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VelocityField {
    Zero,
    /// `u = (a0 exp(-lambda t) sin(k pi y / ly), 0)`.
    DecayingShear { a0: f64, lambda: f64, k: u32, ly: f64 },
}

impl VelocityField {
    pub fn decaying_shear(a0: f64, lambda: f64, k: u32, mesh: &StripMesh) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: alloc::format!("decay rate must be positive, got {lambda}"),
            });
        }
        if k == 0 {
            return Err(Error::InvalidParameter { name: "k", reason: "mode must be at least 1".into() });
        }
        if !a0.is_finite() {
            return Err(Error::InvalidParameter { name: "a0", reason: "amplitude must be finite".into() });
        }
        Ok(VelocityField::DecayingShear { a0, lambda, k, ly: mesh.ly() })
    }

    pub fn amplitude(&self, t: f64) -> f64 {
        match *self {
            VelocityField::Zero => 0.0,
            VelocityField::DecayingShear { a0, lambda, .. } => a0 * libm::exp(-lambda * t),
        }
    }

    /// `int_0^inf ||u(t)||^2_{L2(Omega)} dt` in closed form.
    pub fn kinetic_integral(&self, mesh: &StripMesh) -> f64 {
        match *self {
            VelocityField::Zero => 0.0,
            // int sin^2(k pi y / ly) over the strip is lx ly / 2
            VelocityField::DecayingShear { a0, lambda, .. } => a0 * a0 * mesh.lx() * mesh.ly() / (4.0 * lambda),
        }
    }

    /// The part of [`Self::kinetic_integral`] beyond time `t_end`.
    pub fn kinetic_tail(&self, mesh: &StripMesh, t_end: f64) -> f64 {
        match *self {
            VelocityField::Zero => 0.0,
            VelocityField::DecayingShear { lambda, .. } => {
                self.kinetic_integral(mesh) * libm::exp(-2.0 * lambda * t_end)
            }
        }
    }
}

impl Velocity for VelocityField {
    fn eval(&self, _x: f64, y: f64, t: f64) -> (f64, f64) {
        match *self {
            VelocityField::Zero => (0.0, 0.0),
            VelocityField::DecayingShear { k, ly, .. } => {
                (self.amplitude(t) * libm::sin(k as f64 * PI * y / ly), 0.0)
            }
        }
    }

    fn is_zero(&self) -> bool {
        match *self {
            VelocityField::Zero => true,
            VelocityField::DecayingShear { a0, .. } => a0 == 0.0,
        }
    }
}

/// Grid samples of a velocity field.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocitySamples {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl VelocitySamples {
    pub fn is_zero(&self) -> bool {
        self.u1.iter().chain(&self.u2).all(|&v| v == 0.0)
    }
}

pub fn sample_velocity(field: &dyn Velocity, mesh: &StripMesh, t: f64) -> Result<VelocitySamples> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    let n = mesh.nodes();
    let mut u1 = Vec::with_capacity(n);
    let mut u2 = Vec::with_capacity(n);
    for j in 0..mesh.ny() {
        for i in 0..mesh.nx() {
            let (a, b) = field.eval(mesh.x(i), mesh.y(j), t);
            u1.push(a);
            u2.push(b);
        }
    }
    Ok(VelocitySamples { u1, u2 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityReport {
    pub max_divergence: f64,
    pub max_normal_trace: f64,
    pub passed: bool,
}

pub const ADMISSIBILITY_TOL: f64 = 1e-10;

/// Discrete divergence and normal trace over all nodes and sample times.
///
/// The divergence is taken with central differences of the evaluator at
/// `x +- hx`, `y +- hy` (one-sided into the domain on the boundary lines),
/// so fields that are not periodic in `x` are still measured faithfully.
pub fn validate_admissibility(field: &dyn Velocity, mesh: &StripMesh, t_samples: &[f64]) -> AdmissibilityReport {
    let (hx, hy, ny) = (mesh.hx(), mesh.hy(), mesh.ny());
    let mut max_div: f64 = 0.0;
    let mut max_trace: f64 = 0.0;
    for &t in t_samples {
        for j in 0..ny {
            let y = mesh.y(j);
            for i in 0..mesh.nx() {
                let x = mesh.x(i);
                let du1 = (field.eval(x + hx, y, t).0 - field.eval(x - hx, y, t).0) / (2.0 * hx);
                let du2 = if j == 0 {
                    (field.eval(x, y + hy, t).1 - field.eval(x, y, t).1) / hy
                } else if j + 1 == ny {
                    (field.eval(x, y, t).1 - field.eval(x, y - hy, t).1) / hy
                } else {
                    (field.eval(x, y + hy, t).1 - field.eval(x, y - hy, t).1) / (2.0 * hy)
                };
                max_div = max_div.max((du1 + du2).abs());
                if mesh.is_boundary_row(j) {
                    max_trace = max_trace.max(field.eval(x, y, t).1.abs());
                }
            }
        }
    }
    AdmissibilityReport {
        max_divergence: max_div,
        max_normal_trace: max_trace,
        passed: max_div <= ADMISSIBILITY_TOL && max_trace <= ADMISSIBILITY_TOL,
    }
}
