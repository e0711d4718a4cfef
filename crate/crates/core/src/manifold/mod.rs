//! Compact symmetric spaces of unit volume.
//!
//! Three spaces are supported:
//!
//! * `circle`: ℝ/ℤ, points stored as a fractional coordinate in `[0, 1)`;
//! * `torus:d`: (ℝ/ℤ)^d for `d ≤ 3`, one fractional coordinate per axis;
//! * `sphere`: the round 2-sphere of radius `R = (4π)^{-1/2}` (area one),
//!   points stored as ambient vectors of norm `R`.
//!
//! Points and tangent vectors are small `Copy` values so that the SDE loop
//! never allocates.

pub mod heat;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Radius of the area-one sphere.
pub const SPHERE_RADIUS: f64 = 0.282_094_791_773_878_14;

const MAX_COORDS: usize = 3;

/// A point given by chart coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    coords: [f64; MAX_COORDS],
    len: u8,
}

impl Point {
    fn raw(coords: &[f64]) -> Self {
        let mut c = [0.0; MAX_COORDS];
        c[..coords.len()].copy_from_slice(coords);
        Point { coords: c, len: coords.len() as u8 }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.len as usize]
    }

    /// Comma-separated chart coordinates.
    pub fn to_csv(&self) -> String {
        self.coords().iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(",")
    }
}

impl serde::Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

/// Tangent vector at `base`, in the chart frame (ambient frame on the sphere).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentVector {
    pub base: Point,
    components: [f64; MAX_COORDS],
}

impl TangentVector {
    pub fn zero(base: Point) -> Self {
        TangentVector { base, components: [0.0; MAX_COORDS] }
    }

    pub fn new(base: Point, components: &[f64]) -> Self {
        let mut c = [0.0; MAX_COORDS];
        c[..components.len()].copy_from_slice(components);
        TangentVector { base, components: c }
    }

    pub fn components(&self) -> &[f64] {
        &self.components[..self.base.len as usize]
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &TangentVector) -> f64 {
        self.components.iter().zip(&other.components).map(|(a, b)| a * b).sum()
    }

    pub fn scale(mut self, k: f64) -> Self {
        for c in &mut self.components {
            *c *= k;
        }
        self
    }

    /// Sum of two vectors at the same base point.
    #[allow(clippy::should_implement_trait)]
    pub fn add(mut self, other: &TangentVector) -> Self {
        for (a, b) in self.components.iter_mut().zip(&other.components) {
            *a += b;
        }
        self
    }

    /// `self + k * other`.
    pub fn add_scaled(mut self, k: f64, other: &TangentVector) -> Self {
        for (a, b) in self.components.iter_mut().zip(&other.components) {
            *a += k * b;
        }
        self
    }
}

/// Which compact symmetric space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Manifold {
    Circle,
    Torus(usize),
    Sphere,
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Manifold::Circle => write!(f, "circle"),
            Manifold::Torus(d) => write!(f, "torus:{d}"),
            Manifold::Sphere => write!(f, "sphere"),
        }
    }
}

impl FromStr for Manifold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "circle" => Ok(Manifold::Circle),
            "sphere" => Ok(Manifold::Sphere),
            _ => {
                let d = s
                    .strip_prefix("torus:")
                    .and_then(|d| d.parse::<usize>().ok())
                    .ok_or_else(|| Error::Argument(format!("unknown manifold `{s}`")))?;
                Manifold::torus(d)
            }
        }
    }
}

#[inline]
fn wrap01(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed shortest displacement from `a` to `b` on ℝ/ℤ, in `(-1/2, 1/2]`.
#[inline]
pub(crate) fn circle_displacement(a: f64, b: f64) -> f64 {
    let d = wrap01(b - a);
    if d > 0.5 {
        d - 1.0
    } else {
        d
    }
}

#[inline]
fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

impl Manifold {
    pub fn torus(d: usize) -> Result<Self> {
        if (1..=3).contains(&d) {
            Ok(Manifold::Torus(d))
        } else {
            Err(Error::Argument(format!("torus dimension must be 1..=3, got {d}")))
        }
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match self {
            Manifold::Circle => 1,
            Manifold::Torus(d) => *d,
            Manifold::Sphere => 2,
        }
    }

    /// Number of stored coordinates per point.
    pub fn coord_len(&self) -> usize {
        match self {
            Manifold::Circle => 1,
            Manifold::Torus(d) => *d,
            Manifold::Sphere => 3,
        }
    }

    /// Dimension `r` of the driving Brownian motion.
    pub fn noise_dim(&self) -> usize {
        self.coord_len()
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Manifold::Circle => 0.5,
            Manifold::Torus(d) => (*d as f64).sqrt() / 2.0,
            Manifold::Sphere => PI * SPHERE_RADIUS,
        }
    }

    pub fn injectivity_radius(&self) -> f64 {
        match self {
            Manifold::Circle | Manifold::Torus(_) => 0.5,
            Manifold::Sphere => PI * SPHERE_RADIUS,
        }
    }

    /// Build a point from chart coordinates. Circle and torus coordinates are
    /// reduced mod 1; sphere vectors are rescaled to radius `R`.
    pub fn point(&self, coords: &[f64]) -> Result<Point> {
        if coords.len() != self.coord_len() {
            return Err(Error::Argument(format!(
                "{self} points need {} coordinates, got {}",
                self.coord_len(),
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Argument("non-finite coordinate".into()));
        }
        match self {
            Manifold::Circle | Manifold::Torus(_) => {
                let wrapped: Vec<f64> = coords.iter().map(|&c| wrap01(c)).collect();
                Ok(Point::raw(&wrapped))
            }
            Manifold::Sphere => {
                let v = [coords[0], coords[1], coords[2]];
                let n = norm3(&v);
                if n < 1e-300 {
                    return Err(Error::Argument("sphere point must be nonzero".into()));
                }
                let k = SPHERE_RADIUS / n;
                Ok(Point::raw(&[v[0] * k, v[1] * k, v[2] * k]))
            }
        }
    }

    /// Parse comma-separated chart coordinates.
    pub fn parse_point(&self, text: &str) -> Result<Point> {
        let coords = text
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Argument(format!("bad coordinate `{}`", t.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        self.point(&coords)
    }

    /// Whether `x` satisfies the chart invariants.
    pub fn contains(&self, x: &Point) -> bool {
        if x.len as usize != self.coord_len() {
            return false;
        }
        match self {
            Manifold::Circle | Manifold::Torus(_) => x.coords().iter().all(|&c| (0.0..1.0).contains(&c)),
            Manifold::Sphere => (norm3(&x.coords) - SPHERE_RADIUS).abs() <= 1e-12,
        }
    }

    /// Riemannian distance.
    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        match self {
            Manifold::Circle => circle_displacement(x.coords[0], y.coords[0]).abs(),
            Manifold::Torus(d) => (0..*d)
                .map(|i| {
                    let di = circle_displacement(x.coords[i], y.coords[i]);
                    di * di
                })
                .sum::<f64>()
                .sqrt(),
            Manifold::Sphere => SPHERE_RADIUS * self.sphere_angle(x, y),
        }
    }

    fn sphere_angle(&self, x: &Point, y: &Point) -> f64 {
        let c = cross3(&x.coords, &y.coords);
        norm3(&c).atan2(dot3(&x.coords, &y.coords))
    }

    /// Exponential map.
    pub fn exp(&self, x: &Point, v: &TangentVector) -> Point {
        match self {
            Manifold::Circle | Manifold::Torus(_) => {
                let mut out = *x;
                for i in 0..self.coord_len() {
                    out.coords[i] = wrap01(x.coords[i] + v.components[i]);
                }
                out
            }
            Manifold::Sphere => {
                let r = v.norm();
                if r < 1e-300 {
                    return *x;
                }
                let angle = r / SPHERE_RADIUS;
                let (sn, cs) = angle.sin_cos();
                let k = SPHERE_RADIUS * sn / r;
                let mut y = [0.0; 3];
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi = cs * x.coords[i] + k * v.components[i];
                }
                let n = norm3(&y);
                for yi in &mut y {
                    *yi *= SPHERE_RADIUS / n;
                }
                Point::raw(&y)
            }
        }
    }

    /// Logarithm map: the initial velocity of a minimal geodesic from `x`
    /// to `y` reaching `y` at time one. On the cut locus the circle picks the
    /// positive direction and the sphere the projection of the first
    /// canonical axis not parallel to `x`.
    pub fn log(&self, x: &Point, y: &Point) -> TangentVector {
        match self {
            Manifold::Circle | Manifold::Torus(_) => {
                let mut v = TangentVector::zero(*x);
                for i in 0..self.coord_len() {
                    v.components[i] = circle_displacement(x.coords[i], y.coords[i]);
                }
                v
            }
            Manifold::Sphere => {
                let angle = self.sphere_angle(x, y);
                if angle < 1e-300 {
                    return TangentVector::zero(*x);
                }
                let r2 = SPHERE_RADIUS * SPHERE_RADIUS;
                let xy = dot3(&x.coords, &y.coords) / r2;
                let mut w = [0.0; 3];
                for (i, wi) in w.iter_mut().enumerate() {
                    *wi = y.coords[i] - xy * x.coords[i];
                }
                let mut n = norm3(&w);
                if n <= 1e-14 * SPHERE_RADIUS {
                    w = self.canonical_tangent(x);
                    n = norm3(&w);
                }
                let k = SPHERE_RADIUS * angle / n;
                TangentVector::new(*x, &[w[0] * k, w[1] * k, w[2] * k])
            }
        }
    }

    /// Projection of the first canonical axis that is not (nearly) parallel
    /// to `x` onto `T_x S²`. Not normalized.
    fn canonical_tangent(&self, x: &Point) -> [f64; 3] {
        let r2 = SPHERE_RADIUS * SPHERE_RADIUS;
        for axis in 0..3 {
            let mut e = [0.0; 3];
            e[axis] = 1.0;
            let k = x.coords[axis] / r2;
            let w = [e[0] - k * x.coords[0], e[1] - k * x.coords[1], e[2] - k * x.coords[2]];
            if norm3(&w) > 0.5 {
                return w;
            }
        }
        unreachable!("some axis is at angle ≥ acos(1/√3) from x")
    }

    /// Orthonormal tangent frame at `x` (first `dim()` entries used).
    pub fn tangent_frame(&self, x: &Point) -> [TangentVector; 3] {
        match self {
            Manifold::Circle | Manifold::Torus(_) => {
                let mut f = [TangentVector::zero(*x); 3];
                for (i, fi) in f.iter_mut().enumerate().take(self.coord_len()) {
                    fi.components[i] = 1.0;
                }
                f
            }
            Manifold::Sphere => {
                let w = self.canonical_tangent(x);
                let n = norm3(&w);
                let e1 = [w[0] / n, w[1] / n, w[2] / n];
                let xh = [
                    x.coords[0] / SPHERE_RADIUS,
                    x.coords[1] / SPHERE_RADIUS,
                    x.coords[2] / SPHERE_RADIUS,
                ];
                let e2 = cross3(&xh, &e1);
                [
                    TangentVector::new(*x, &e1),
                    TangentVector::new(*x, &e2),
                    TangentVector::zero(*x),
                ]
            }
        }
    }

    /// Orthogonal projection of an ambient vector onto `T_x M`.
    pub fn project_tangent(&self, x: &Point, v: &[f64]) -> TangentVector {
        match self {
            Manifold::Circle | Manifold::Torus(_) => TangentVector::new(*x, &v[..self.coord_len()]),
            Manifold::Sphere => {
                let r2 = SPHERE_RADIUS * SPHERE_RADIUS;
                let k = (v[0] * x.coords[0] + v[1] * x.coords[1] + v[2] * x.coords[2]) / r2;
                TangentVector::new(
                    *x,
                    &[v[0] - k * x.coords[0], v[1] - k * x.coords[1], v[2] - k * x.coords[2]],
                )
            }
        }
    }

    /// `σ(θ)·gauss`, with `σσ* = id` on `T_θM`.
    pub fn noise_step(&self, theta: &Point, gauss: &[f64]) -> Result<TangentVector> {
        if gauss.len() != self.noise_dim() {
            return Err(Error::Argument(format!(
                "noise vector must have length {}, got {}",
                self.noise_dim(),
                gauss.len()
            )));
        }
        Ok(self.project_tangent(theta, gauss))
    }

    /// Uniformly distributed point (w.r.t. Riemannian volume).
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self {
            Manifold::Circle | Manifold::Torus(_) => {
                let mut c = [0.0; 3];
                for ci in c.iter_mut().take(self.coord_len()) {
                    *ci = rng.random::<f64>();
                }
                Point::raw(&c[..self.coord_len()])
            }
            Manifold::Sphere => loop {
                let g: [f64; 3] = [
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                ];
                let n = norm3(&g);
                if n > 1e-12 {
                    let k = SPHERE_RADIUS / n;
                    return Point::raw(&[g[0] * k, g[1] * k, g[2] * k]);
                }
            },
        }
    }

    fn check_time(s: f64) -> Result<()> {
        if s > 0.0 && s.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("heat-kernel time must be positive, got {s}")))
        }
    }

    /// Heat kernel `p(s, x, y)` of `½Δ`.
    pub fn heat_kernel(&self, s: f64, x: &Point, y: &Point) -> Result<f64> {
        Self::check_time(s)?;
        Ok(match self {
            Manifold::Circle | Manifold::Torus(_) => (0..self.coord_len())
                .map(|i| heat::circle(s, y.coords[i] - x.coords[i]))
                .product(),
            Manifold::Sphere => self.sphere_kernel(s, x, y).0,
        })
    }

    /// Sphere kernel value and `dp/dc` with `c = cos∠(x, y)`. Falls back to
    /// the small-time Gaussian asymptotic where the series has lost all
    /// relative precision.
    fn sphere_kernel(&self, s: f64, x: &Point, y: &Point) -> (f64, f64) {
        let r2 = SPHERE_RADIUS * SPHERE_RADIUS;
        let c = (dot3(&x.coords, &y.coords) / r2).clamp(-1.0, 1.0);
        let (value, deriv) = heat::sphere_series(s, SPHERE_RADIUS, c);
        let peak = 1.0 / (2.0 * PI * s);
        if value > 1e-12 * peak {
            return (value, deriv);
        }
        let gamma = self.sphere_angle(x, y);
        let rho = SPHERE_RADIUS * gamma;
        let jac = if gamma < PI - 1e-6 { (gamma / gamma.sin()).sqrt() } else { 1e3 };
        let v = peak * jac * (-rho * rho / (2.0 * s)).exp();
        // d/dc of exp(-R²γ²/2s) with dγ/dc = -1/sin γ
        let sin_g = gamma.sin().max(1e-12);
        (v.max(f64::MIN_POSITIVE), v * r2 * gamma / (s * sin_g))
    }

    /// `∇_θ ln p(s, θ, z)`.
    pub fn grad_log_heat_kernel(&self, s: f64, theta: &Point, z: &Point) -> Result<TangentVector> {
        Self::check_time(s)?;
        match self {
            Manifold::Circle | Manifold::Torus(_) => {
                let mut g = TangentVector::zero(*theta);
                for i in 0..self.coord_len() {
                    let (p, dp) = heat::circle_with_derivative(s, theta.coords[i] - z.coords[i]);
                    g.components[i] = dp / p;
                }
                Ok(g)
            }
            Manifold::Sphere => {
                let (p, dp) = self.sphere_kernel(s, theta, z);
                // ∇_θ c = (ẑ - c θ̂) / R
                let r2 = SPHERE_RADIUS * SPHERE_RADIUS;
                let c = dot3(&theta.coords, &z.coords) / r2;
                let mut v = [0.0; 3];
                for (i, vi) in v.iter_mut().enumerate() {
                    *vi = (z.coords[i] - c * theta.coords[i]) / r2;
                }
                let k = dp / p;
                Ok(TangentVector::new(*theta, &[v[0] * k, v[1] * k, v[2] * k]))
            }
        }
    }

    /// Draw from `p(s, x, ·)`.
    pub fn sample_heat<R: Rng + ?Sized>(&self, s: f64, x: &Point, rng: &mut R) -> Result<Point> {
        Self::check_time(s)?;
        Ok(match self {
            Manifold::Circle | Manifold::Torus(_) => {
                let sd = s.sqrt();
                let mut out = *x;
                for i in 0..self.coord_len() {
                    let g: f64 = StandardNormal.sample(rng);
                    out.coords[i] = wrap01(x.coords[i] + sd * g);
                }
                out
            }
            Manifold::Sphere => {
                let gamma = sample_polar_angle(s, rng.random::<f64>());
                let phi = 2.0 * PI * rng.random::<f64>();
                let frame = self.tangent_frame(x);
                let dir = frame[0].scale(phi.cos()).add_scaled(phi.sin(), &frame[1]);
                self.exp(x, &dir.scale(SPHERE_RADIUS * gamma))
            }
        })
    }
}

/// Inverse-CDF draw of the polar angle of a sphere heat-kernel displacement.
fn sample_polar_angle(s: f64, u: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, PI);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if heat::sphere_polar_cdf(s, SPHERE_RADIUS, mid.cos()) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
