//! Double-well potentials written as `f = beta_hat + pi_hat`: a convex,
//! lower semicontinuous part with `beta_hat(0) = 0` and a perturbation with
//! Lipschitz derivative.
//!
//! | kind              | `beta_hat`                                  | `pi_hat`             |
//! |-------------------|---------------------------------------------|----------------------|
//! | regular           | `r^4 / 4`                                   | `(1 - 2 r^2) / 4`    |
//! | logarithmic(c1)   | `(1+r) ln(1+r) + (1-r) ln(1-r)`, `|r| < 1`  | `-c1 r^2`            |
//! | double obstacle   | indicator of `[-1, 1]`                      | `c2 (1 - r^2)`       |
//! | polynomial(a)     | `max(a2,0) r^2 + sum_{k>=4} a_k r^k`        | `a0 + a1 r + min(a2,0) r^2` |
//!
//! `beta = d beta_hat` is replaced in the solver by its Yosida
//! approximation `beta_eps(r) = (r - J_eps r) / eps`, where the resolvent
//! `J_eps r` solves `s + eps beta(s) = r`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// An interval of the real line, possibly unbounded, with open or closed
/// finite ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
        lo_closed: false,
        hi_closed: false,
    };

    pub fn open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: false, hi_closed: false }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: true }
    }

    pub fn contains(&self, r: f64) -> bool {
        let above = if self.lo_closed { r >= self.lo } else { r > self.lo };
        let below = if self.hi_closed { r <= self.hi } else { r < self.hi };
        above && below
    }

    pub fn interior_contains(&self, r: f64) -> bool {
        r > self.lo && r < self.hi
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        let lo_ok = self.lo > other.lo
            || (self.lo == other.lo && (other.lo_closed || !self.lo_closed));
        let hi_ok = self.hi < other.hi
            || (self.hi == other.hi && (other.hi_closed || !self.hi_closed));
        lo_ok && hi_ok
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    /// Distance from `r` to the nearest finite end point.
    pub fn distance_to_boundary(&self, r: f64) -> f64 {
        f64::min(r - self.lo, self.hi - r)
    }

    /// Clamps into the interval, keeping `inset` away from finite ends.
    pub fn clamp_inset(&self, r: f64, inset: f64) -> f64 {
        let mut v = r;
        if self.lo.is_finite() && v < self.lo + inset {
            v = self.lo + inset;
        }
        if self.hi.is_finite() && v > self.hi - inset {
            v = self.hi - inset;
        }
        v
    }

    /// Whether `r` lies within `inset` of a finite end point.
    pub fn touches_boundary(&self, r: f64, inset: f64) -> bool {
        (self.lo.is_finite() && r < self.lo + inset) || (self.hi.is_finite() && r > self.hi - inset)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lo_closed { '[' } else { '(' };
        let r = if self.hi_closed { ']' } else { ')' };
        write!(f, "{l}{}, {}{r}", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Regular,
    Logarithmic { c1: f64 },
    DoubleObstacle { c2: f64 },
    /// `f(r) = sum_k coeffs[k] r^k`; odd coefficients of degree three or
    /// more must vanish and even ones of degree four or more be nonnegative.
    Polynomial { coeffs: Vec<f64> },
}

impl PotentialKind {
    pub fn name(&self) -> &'static str {
        match self {
            PotentialKind::Regular => "regular",
            PotentialKind::Logarithmic { .. } => "logarithmic",
            PotentialKind::DoubleObstacle { .. } => "double_obstacle",
            PotentialKind::Polynomial { .. } => "polynomial",
        }
    }
}

/// A validated potential together with the constants its split guarantees.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    kind: PotentialKind,
    domain: Interval,
    lipschitz_pi: f64,
    lower_bound: f64,
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind) -> Result<Self> {
        let (domain, lipschitz_pi, lower_bound) = match &kind {
            PotentialKind::Regular => (Interval::REAL_LINE, 1.0, 0.0),
            PotentialKind::Logarithmic { c1 } => {
                if !c1.is_finite() {
                    return Err(Error::InvalidParameter { name: "c1", reason: format!("{c1} is not finite") });
                }
                // beta_hat >= 0 and r^2 < 1
                (Interval::open(-1.0, 1.0), 2.0 * c1.abs(), -f64::max(*c1, 0.0))
            }
            PotentialKind::DoubleObstacle { c2 } => {
                if !c2.is_finite() {
                    return Err(Error::InvalidParameter { name: "c2", reason: format!("{c2} is not finite") });
                }
                (Interval::closed(-1.0, 1.0), 2.0 * c2.abs(), f64::min(0.0, *c2))
            }
            PotentialKind::Polynomial { coeffs } => {
                let (lip, lb) = polynomial_constants(coeffs)?;
                (Interval::REAL_LINE, lip, lb)
            }
        };
        Ok(Self { kind, domain, lipschitz_pi, lower_bound })
    }

    pub fn regular() -> Self {
        Self::new(PotentialKind::Regular).expect("regular potential is valid")
    }

    pub fn logarithmic(c1: f64) -> Result<Self> {
        Self::new(PotentialKind::Logarithmic { c1 })
    }

    pub fn double_obstacle(c2: f64) -> Result<Self> {
        Self::new(PotentialKind::DoubleObstacle { c2 })
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(PotentialKind::Polynomial { coeffs })
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    /// `D(beta)`
    pub fn domain(&self) -> Interval {
        self.domain
    }

    /// Lipschitz constant of `pi = pi_hat'`.
    pub fn lipschitz_pi(&self) -> f64 {
        self.lipschitz_pi
    }

    /// A lower bound of `f` on its domain.
    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    /// True when `beta` is single valued, defined on all of R and smooth,
    /// so the solver may use it without regularization.
    pub fn is_smooth(&self) -> bool {
        matches!(self.kind, PotentialKind::Regular | PotentialKind::Polynomial { .. })
    }

    fn check_domain(&self, r: f64) -> Result<()> {
        if self.domain.contains(r) {
            Ok(())
        } else {
            Err(Error::DomainViolation { value: r, domain: format!("{}", self.domain) })
        }
    }

    /// Convex part `beta_hat`.
    pub fn beta_hat(&self, r: f64) -> Result<f64> {
        self.check_domain(r)?;
        Ok(self.beta_hat_unchecked(r))
    }

    /// Valid on the closure of the domain.
    fn beta_hat_unchecked(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::Regular => 0.25 * r * r * r * r,
            PotentialKind::Logarithmic { .. } => xlogx(1.0 + r) + xlogx(1.0 - r),
            PotentialKind::DoubleObstacle { .. } => 0.0,
            PotentialKind::Polynomial { coeffs } => poly_convex(coeffs, r),
        }
    }

    /// Perturbation `pi_hat`.
    pub fn pi_hat(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::Regular => 0.25 * (1.0 - 2.0 * r * r),
            PotentialKind::Logarithmic { c1 } => -c1 * r * r,
            PotentialKind::DoubleObstacle { c2 } => c2 * (1.0 - r * r),
            PotentialKind::Polynomial { coeffs } => {
                let c = |k: usize| coeffs.get(k).copied().unwrap_or(0.0);
                c(0) + c(1) * r + f64::min(c(2), 0.0) * r * r
            }
        }
    }

    /// `pi = pi_hat'`.
    pub fn pi(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::Regular => -r,
            PotentialKind::Logarithmic { c1 } => -2.0 * c1 * r,
            PotentialKind::DoubleObstacle { c2 } => -2.0 * c2 * r,
            PotentialKind::Polynomial { coeffs } => {
                let c = |k: usize| coeffs.get(k).copied().unwrap_or(0.0);
                c(1) + 2.0 * f64::min(c(2), 0.0) * r
            }
        }
    }

    pub fn pi_derivative(&self, _r: f64) -> f64 {
        match &self.kind {
            PotentialKind::Regular => -1.0,
            PotentialKind::Logarithmic { c1 } => -2.0 * c1,
            PotentialKind::DoubleObstacle { c2 } => -2.0 * c2,
            PotentialKind::Polynomial { coeffs } => 2.0 * f64::min(coeffs.get(2).copied().unwrap_or(0.0), 0.0),
        }
    }

    /// `f = beta_hat + pi_hat`.
    pub fn eval_f(&self, r: f64) -> Result<f64> {
        Ok(self.beta_hat(r)? + self.pi_hat(r))
    }

    /// The element of `beta(r)` of minimal modulus.
    pub fn eval_beta_min(&self, r: f64) -> Result<f64> {
        self.check_domain(r)?;
        Ok(match &self.kind {
            PotentialKind::DoubleObstacle { .. } => 0.0,
            _ => self.beta_smooth(r),
        })
    }

    /// `beta` on the interior of the domain, for kinds where it is a function.
    fn beta_smooth(&self, s: f64) -> f64 {
        match &self.kind {
            PotentialKind::Regular => s * s * s,
            PotentialKind::Logarithmic { .. } => libm::log1p(s) - libm::log1p(-s),
            PotentialKind::DoubleObstacle { .. } => 0.0,
            PotentialKind::Polynomial { coeffs } => poly_convex_derivative(coeffs, s),
        }
    }

    /// `1 / beta'(s)`, finite even where `beta'` blows up.
    fn inverse_beta_slope(&self, s: f64) -> f64 {
        match &self.kind {
            PotentialKind::Regular => 1.0 / (3.0 * s * s),
            PotentialKind::Logarithmic { .. } => 0.5 * (1.0 - s) * (1.0 + s),
            PotentialKind::DoubleObstacle { .. } => f64::INFINITY,
            PotentialKind::Polynomial { coeffs } => 1.0 / poly_convex_second(coeffs, s),
        }
    }

    fn beta_slope(&self, s: f64) -> f64 {
        match &self.kind {
            PotentialKind::Regular => 3.0 * s * s,
            PotentialKind::Logarithmic { .. } => 2.0 / ((1.0 - s) * (1.0 + s)),
            PotentialKind::DoubleObstacle { .. } => 0.0,
            PotentialKind::Polynomial { coeffs } => poly_convex_second(coeffs, s),
        }
    }

    /// Resolvent `J_eps r = (I + eps beta)^{-1} r`.
    pub fn resolvent(&self, eps: YosidaParams, r: f64) -> f64 {
        let e = eps.eps();
        match &self.kind {
            PotentialKind::DoubleObstacle { .. } => r.clamp(-1.0, 1.0),
            PotentialKind::Logarithmic { .. } => {
                let hi = if r > 0.0 { f64::min(r, 1.0) } else { 0.0 };
                let lo = if r < 0.0 { f64::max(r, -1.0) } else { 0.0 };
                self.solve_resolvent(e, r, lo, hi)
            }
            _ => {
                let (lo, hi) = if r >= 0.0 { (0.0, r) } else { (r, 0.0) };
                self.solve_resolvent(e, r, lo, hi)
            }
        }
    }

    /// Safeguarded Newton for `s + eps beta(s) = r` on the bracket `[lo, hi]`,
    /// where the left side is increasing and changes sign.
    fn solve_resolvent(&self, eps: f64, r: f64, mut lo: f64, mut hi: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let open_ends = matches!(self.kind, PotentialKind::Logarithmic { .. });
        let g = |s: f64| s + eps * self.beta_smooth(s) - r;
        // polynomial kinds: g is convex on the positive side, so Newton from
        // the outer end of the bracket approaches the root monotonically
        let mut s = if open_ends {
            0.5 * (lo + hi)
        } else if r > 0.0 {
            hi
        } else {
            lo
        };
        for _ in 0..200 {
            let gs = g(s);
            if gs == 0.0 {
                return s;
            }
            if gs > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let slope = 1.0 + eps * self.beta_slope(s);
            let mut next = s - gs / slope;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if next == s || (hi - lo) <= 4.0 * f64::EPSILON * f64::max(1.0, s.abs()) {
                return next;
            }
            s = next;
        }
        s
    }

    /// Yosida approximation `beta_eps(r)`.
    pub fn yosida_beta(&self, eps: YosidaParams, r: f64) -> f64 {
        self.yosida_with_slope(eps, r).0
    }

    /// `beta_eps(r)` together with its derivative.
    pub fn yosida_with_slope(&self, eps: YosidaParams, r: f64) -> (f64, f64) {
        let e = eps.eps();
        let s = self.resolvent(eps, r);
        match &self.kind {
            PotentialKind::DoubleObstacle { .. } => {
                if r.abs() > 1.0 {
                    ((r - s) / e, 1.0 / e)
                } else {
                    (0.0, 0.0)
                }
            }
            PotentialKind::Logarithmic { .. } if s.abs() > 0.5 => {
                // beta(s) loses accuracy as |s| -> 1
                ((r - s) / e, 1.0 / (self.inverse_beta_slope(s) + e))
            }
            _ => {
                let slope = self.beta_slope(s);
                (self.beta_smooth(s), slope / (1.0 + e * slope))
            }
        }
    }

    /// Moreau envelope of `beta_hat`, a convex primitive of `beta_eps`.
    pub fn moreau_envelope(&self, eps: YosidaParams, r: f64) -> f64 {
        let s = self.resolvent(eps, r);
        let d = r - s;
        d * d / (2.0 * eps.eps()) + self.beta_hat_unchecked(s)
    }

    /// `beta(r)` and `beta'(r)` for smooth kinds, or the Yosida pair.
    pub fn selection(&self, reg: Regularization, r: f64) -> (f64, f64) {
        match reg {
            Regularization::Yosida(eps) => self.yosida_with_slope(eps, r),
            Regularization::Exact => (self.beta_smooth(r), self.beta_slope(r)),
        }
    }

    /// Convex part of the energy density under the given regularization.
    pub fn convex_energy(&self, reg: Regularization, r: f64) -> f64 {
        match reg {
            Regularization::Yosida(eps) => self.moreau_envelope(eps, r),
            Regularization::Exact => self.beta_hat_unchecked(r),
        }
    }

    /// Regularized energy density `f_eps = beta_hat_eps + pi_hat`.
    pub fn energy_density(&self, reg: Regularization, r: f64) -> f64 {
        self.convex_energy(reg, r) + self.pi_hat(r)
    }
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * libm::log(x)
    }
}

fn poly_convex(coeffs: &[f64], r: f64) -> f64 {
    let mut v = f64::max(coeffs.get(2).copied().unwrap_or(0.0), 0.0) * r * r;
    let mut pk = r * r;
    for &a in coeffs.iter().skip(3) {
        pk *= r;
        v += a * pk;
    }
    v
}

fn poly_convex_derivative(coeffs: &[f64], r: f64) -> f64 {
    let mut v = 2.0 * f64::max(coeffs.get(2).copied().unwrap_or(0.0), 0.0) * r;
    let mut pk = r; // r^(k-1) for k = 2
    for (k, &a) in coeffs.iter().enumerate().skip(3) {
        pk *= r;
        v += k as f64 * a * pk;
    }
    v
}

fn poly_convex_second(coeffs: &[f64], r: f64) -> f64 {
    let mut v = 2.0 * f64::max(coeffs.get(2).copied().unwrap_or(0.0), 0.0);
    let mut pk = 1.0; // r^(k-2) for k = 2
    for (k, &a) in coeffs.iter().enumerate().skip(3) {
        pk *= r;
        v += (k * (k - 1)) as f64 * a * pk;
    }
    v
}

fn poly_eval(coeffs: &[f64], r: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &a| acc * r + a)
}

/// Validates a polynomial potential and returns `(Lip(pi), lower bound)`.
fn polynomial_constants(coeffs: &[f64]) -> Result<(f64, f64)> {
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter { name: "coeffs", reason: String::from("non-finite coefficient") });
    }
    for (k, &a) in coeffs.iter().enumerate().skip(3) {
        if k % 2 == 1 && a != 0.0 {
            return Err(Error::InvalidParameter {
                name: "coeffs",
                reason: format!("odd coefficient of degree {k} must vanish"),
            });
        }
        if k % 2 == 0 && a < 0.0 {
            return Err(Error::InvalidParameter {
                name: "coeffs",
                reason: format!("coefficient of degree {k} must be nonnegative"),
            });
        }
    }
    let c = |k: usize| coeffs.get(k).copied().unwrap_or(0.0);
    let degree = coeffs.iter().rposition(|&a| a != 0.0).unwrap_or(0);
    let lip = 2.0 * f64::max(-c(2), 0.0);
    let lower = match degree {
        0 => c(0),
        1 => {
            return Err(Error::InvalidParameter {
                name: "coeffs",
                reason: String::from("linear potential is unbounded below"),
            })
        }
        2 if c(2) < 0.0 => {
            return Err(Error::InvalidParameter {
                name: "coeffs",
                reason: String::from("concave quadratic potential is unbounded below"),
            })
        }
        2 => c(0) - c(1) * c(1) / (4.0 * c(2)),
        _ => polynomial_minimum(coeffs),
    };
    Ok((lip, lower))
}

/// Global minimum of an even-leading polynomial, located on a fine grid
/// inside the Cauchy root bound of `f'` and polished by golden sections.
fn polynomial_minimum(coeffs: &[f64]) -> f64 {
    let d = coeffs.len() - 1;
    let lead = d as f64 * coeffs[d];
    let bound = 1.0
        + (1..d)
            .map(|k| (k as f64 * coeffs[k] / lead).abs())
            .fold(0.0, f64::max);
    let n = 4000;
    let h = 2.0 * bound / n as f64;
    let mut best = f64::INFINITY;
    for i in 0..=n {
        let x = -bound + i as f64 * h;
        let v = poly_eval(coeffs, x);
        if v <= best {
            best = v;
        }
        // refine around grid minima
        if i > 0 && i < n {
            let (l, r) = (poly_eval(coeffs, x - h), poly_eval(coeffs, x + h));
            if v <= l && v <= r {
                let (mut a, mut b) = (x - h, x + h);
                let phi = 0.5 * (libm::sqrt(5.0) - 1.0);
                for _ in 0..100 {
                    let c1 = b - phi * (b - a);
                    let c2 = a + phi * (b - a);
                    if poly_eval(coeffs, c1) < poly_eval(coeffs, c2) {
                        b = c2;
                    } else {
                        a = c1;
                    }
                }
                best = best.min(poly_eval(coeffs, 0.5 * (a + b)));
            }
        }
    }
    best - 1e-9 * (1.0 + best.abs())
}

/// Yosida parameter `eps > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YosidaParams {
    eps: f64,
}

impl YosidaParams {
    pub fn new(eps: f64) -> Result<Self> {
        if eps > 0.0 && eps.is_finite() {
            Ok(Self { eps })
        } else {
            Err(Error::InvalidParameter { name: "eps", reason: format!("must be positive, got {eps}") })
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

/// How the solver evaluates the monotone part of the potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularization {
    /// Use `beta` itself; only admissible for smooth, everywhere defined kinds.
    Exact,
    Yosida(YosidaParams),
}

impl Regularization {
    /// `eps = 0` selects [`Regularization::Exact`].
    pub fn from_eps(eps: f64) -> Result<Self> {
        if eps == 0.0 {
            Ok(Regularization::Exact)
        } else {
            Ok(Regularization::Yosida(YosidaParams::new(eps)?))
        }
    }

    pub fn eps(&self) -> f64 {
        match self {
            Regularization::Exact => 0.0,
            Regularization::Yosida(p) => p.eps(),
        }
    }

    pub fn check_admissible(&self, spec: &PotentialSpec) -> Result<()> {
        if *self == Regularization::Exact && !spec.is_smooth() {
            return Err(Error::InvalidParameter {
                name: "eps",
                reason: format!("the {} potential needs a positive Yosida parameter", spec.kind().name()),
            });
        }
        Ok(())
    }
}

pub fn eval_f(spec: &PotentialSpec, r: f64) -> Result<f64> {
    spec.eval_f(r)
}

pub fn eval_pi(spec: &PotentialSpec, r: f64) -> f64 {
    spec.pi(r)
}

pub fn eval_beta_min(spec: &PotentialSpec, r: f64) -> Result<f64> {
    spec.eval_beta_min(r)
}

pub fn yosida_beta(spec: &PotentialSpec, eps: YosidaParams, r: f64) -> f64 {
    spec.yosida_beta(eps, r)
}

/// Uniform sample grid over a domain. Unbounded ends are truncated at
/// `+-radius`, open finite ends are inset by `inset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleGrid {
    pub count: usize,
    pub radius: f64,
    pub inset: f64,
}

impl Default for SampleGrid {
    fn default() -> Self {
        Self { count: 10_000, radius: 3.0, inset: 1e-8 }
    }
}

impl SampleGrid {
    pub fn points(&self, domain: &Interval) -> Vec<f64> {
        let lo = if domain.lo.is_finite() {
            if domain.lo_closed { domain.lo } else { domain.lo + self.inset }
        } else {
            -self.radius
        };
        let hi = if domain.hi.is_finite() {
            if domain.hi_closed { domain.hi } else { domain.hi - self.inset }
        } else {
            self.radius
        };
        let n = self.count.max(2);
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompatibilityReport {
    pub eta: f64,
    pub c: f64,
    pub satisfied: bool,
    /// Sample point where `|beta°| - eta |beta_G°|` is largest.
    pub witness: f64,
}

/// Checks `D(beta_G) ⊆ D(beta)` and `|beta°(r)| <= eta |beta_G°(r)| + C` on a
/// sample grid of `D(beta_G)`.
///
/// With `supplied = None`, `eta = 1` and the smallest admissible `C` on the
/// grid are returned. With `Some((eta, c))` the given pair is verified.
pub fn check_compatibility(
    bulk: &PotentialSpec,
    surface: &PotentialSpec,
    samples: &SampleGrid,
    supplied: Option<(f64, f64)>,
) -> Result<CompatibilityReport> {
    let (db, ds) = (bulk.domain(), surface.domain());
    if !ds.is_subset_of(&db) {
        return Err(Error::DomainInclusion { bulk: format!("{db}"), surface: format!("{ds}") });
    }
    let eta = supplied.map(|p| p.0).unwrap_or(1.0);
    let mut worst = f64::NEG_INFINITY;
    let mut witness = f64::NAN;
    for r in samples.points(&ds) {
        let a = bulk.eval_beta_min(r)?.abs();
        let b = surface.eval_beta_min(r)?.abs();
        let gap = a - eta * b;
        if gap > worst {
            worst = gap;
            witness = r;
        }
    }
    let (c, satisfied) = match supplied {
        Some((_, c)) => (c, worst <= c),
        None => (f64::max(worst, 0.0), true),
    };
    Ok(CompatibilityReport { eta, c, satisfied, witness })
}

/// Constants with `beta°(r) (r - m0) >= delta0 |beta°(r)| - C0` on the
/// sample grid, for `m0` in the interior of `D(beta)`.
///
/// `delta0` is half the distance from `m0` to the boundary of the domain,
/// capped at one half.
pub fn coercivity_constants(spec: &PotentialSpec, m0: f64, samples: &SampleGrid) -> Result<(f64, f64)> {
    let domain = spec.domain();
    if !domain.interior_contains(m0) {
        return Err(Error::MeanNotInterior { m0, domain: format!("{domain}") });
    }
    let delta0 = f64::min(0.5, 0.5 * domain.distance_to_boundary(m0));
    let mut c0: f64 = 0.0;
    for r in samples.points(&domain) {
        let b = spec.eval_beta_min(r)?;
        c0 = c0.max(delta0 * b.abs() - b * (r - m0));
    }
    Ok((delta0, c0))
}
