//! Closed-form heat smoothing of power costs by harmonic expansion.
//!
//! On a symmetric space `ρ^p(·, y)` is a function of the displacement (flat
//! spaces) or of the angle (sphere), and the heat semigroup acts diagonally
//! on the corresponding harmonics. Hence
//!
//! * circle/torus: `κ_s(θ, y) = Σ_k c_k e^{-2π²|k|²s} cos(2πk·(θ-y))`, where
//!   `c_k` are the Fourier coefficients of `u ↦ |u|^p` on `[-1/2, 1/2)^d`;
//! * sphere (Funk–Hecke): `κ_s(θ, y) = Σ_l (2l+1)/2 · e^{-λ_l s} g_l P_l(cos γ)`
//!   with `g_l = ∫_{-1}^{1} (R acos u)^p P_l(u) du`.
//!
//! The coefficients are computed once per `(manifold, p)`; each evaluation
//! then costs a handful of harmonics. This is what the SDE loop uses.
//! Fourier coefficients come from the trapezoid rule on a fine lattice, so
//! the periodic route equals the trapezoid quadrature of `κ_s` on that
//! lattice.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::manifold::heat::{sphere_degree, sphere_eigenvalue};
use crate::manifold::{Manifold, Point, TangentVector, SPHERE_RADIUS};

use super::quadrature::gauss_legendre;

/// Harmonic terms whose heat factor is below `e^{-HEAT_CUTOFF}` are dropped.
const HEAT_CUTOFF: f64 = 37.0;
/// Largest Fourier mode per axis on circle/torus.
const MAX_MODE: usize = 64;

/// Precomputed harmonic expansion of `ρ^p` on one manifold.
#[derive(Clone, Debug)]
pub enum SpectralKernel {
    Periodic(PeriodicSpectrum),
    Zonal(ZonalSpectrum),
}

impl SpectralKernel {
    /// Coefficients sufficient for every smoothing time `s ≥ s_min`.
    pub fn new(m: Manifold, p: f64, s_min: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::Argument(format!("p must be ≥ 1, got {p}")));
        }
        if !(s_min > 0.0) {
            return Err(Error::Domain(format!("s_min must be positive, got {s_min}")));
        }
        let k_max = (HEAT_CUTOFF / (2.0 * PI * PI * s_min)).sqrt().ceil() as usize;
        if matches!(m, Manifold::Circle | Manifold::Torus(_)) && k_max > MAX_MODE {
            return Err(Error::Domain(format!("s_min {s_min} needs more than {MAX_MODE} modes")));
        }
        Ok(match m {
            Manifold::Circle | Manifold::Torus(_) => {
                SpectralKernel::Periodic(PeriodicSpectrum::new(m.coord_len(), p, s_min))
            }
            Manifold::Sphere => SpectralKernel::Zonal(ZonalSpectrum::new(p, s_min)),
        })
    }

    pub fn s_min(&self) -> f64 {
        match self {
            SpectralKernel::Periodic(k) => k.s_min,
            SpectralKernel::Zonal(k) => k.s_min,
        }
    }

    fn check(&self, s: f64) -> Result<()> {
        if s >= self.s_min() * (1.0 - 1e-12) && s.is_finite() {
            Ok(())
        } else {
            Err(Error::Numerical(format!(
                "smoothing time {s} is below the spectral floor {}",
                self.s_min()
            )))
        }
    }

    /// Heat factors for smoothing time `s`, reusable across evaluations.
    pub fn factors(&self, s: f64) -> Result<HeatFactors> {
        self.check(s)?;
        Ok(match self {
            SpectralKernel::Periodic(k) => k.factors(s),
            SpectralKernel::Zonal(k) => k.factors(s),
        })
    }

    /// `κ_s(θ, y)`.
    pub fn kappa(&self, theta: &Point, y: &Point, s: f64) -> Result<f64> {
        Ok(self.kappa_with(&self.factors(s)?, theta, y))
    }

    /// `grad_θ κ_s(·, y)`.
    pub fn grad_kappa(&self, theta: &Point, y: &Point, s: f64) -> Result<TangentVector> {
        Ok(self.grad_kappa_with(&self.factors(s)?, theta, y))
    }

    pub fn kappa_with(&self, f: &HeatFactors, theta: &Point, y: &Point) -> f64 {
        match self {
            SpectralKernel::Periodic(k) => k.eval(f, theta, y, None),
            SpectralKernel::Zonal(k) => k.eval(f, theta, y, None),
        }
    }

    pub fn grad_kappa_with(&self, f: &HeatFactors, theta: &Point, y: &Point) -> TangentVector {
        let mut g = TangentVector::zero(*theta);
        match self {
            SpectralKernel::Periodic(k) => k.eval(f, theta, y, Some(&mut g)),
            SpectralKernel::Zonal(k) => k.eval(f, theta, y, Some(&mut g)),
        };
        g
    }
}

/// Per-harmonic heat factors at one smoothing time: `e^{-2π²k²s}` per axis
/// mode `k` (periodic) or `(2l+1)/2 · g_l e^{-λ_l s}` per degree (sphere).
#[derive(Clone, Debug, PartialEq)]
pub struct HeatFactors {
    s: f64,
    values: Vec<f64>,
}

impl HeatFactors {
    pub fn s(&self) -> f64 {
        self.s
    }
}

/// Fourier coefficients of `|u|^p` (flat distance to the origin of the
/// unit torus) for modes `|k_i| ≤ k_max`.
#[derive(Clone, Debug)]
pub struct PeriodicSpectrum {
    dim: usize,
    k_max: usize,
    s_min: f64,
    /// Row-major over `[-k_max, k_max]^dim`.
    coeffs: Vec<f64>,
}

fn lattice_size(dim: usize) -> usize {
    match dim {
        1 => 1 << 16,
        2 => 512,
        _ => 96,
    }
}

impl PeriodicSpectrum {
    fn new(dim: usize, p: f64, s_min: f64) -> Self {
        let k_max = (HEAT_CUTOFF / (2.0 * PI * PI * s_min)).sqrt().ceil() as usize;
        let n = lattice_size(dim);
        let width = 2 * k_max + 1;
        // samples of |u|^p on the lattice u_j = j/n - wrapped to [-1/2, 1/2)
        let fold = |j: usize| {
            let u = j as f64 / n as f64;
            if u >= 0.5 {
                u - 1.0
            } else {
                u
            }
        };
        let total = n.pow(dim as u32);
        let mut data: Vec<(f64, f64)> = (0..total)
            .map(|flat| {
                let mut r2 = 0.0;
                let mut rest = flat;
                for _ in 0..dim {
                    let u = fold(rest % n);
                    r2 += u * u;
                    rest /= n;
                }
                (r2.powf(0.5 * p), 0.0)
            })
            .collect();
        // shape stored as axis lengths, last axis fastest
        let mut shape = vec![n; dim];
        let twiddle: Vec<(f64, f64)> =
            (0..n).map(|j| (2.0 * PI * j as f64 / n as f64).sin_cos()).collect();
        for axis in 0..dim {
            data = partial_dft(&data, &shape, axis, k_max, &twiddle);
            shape[axis] = width;
        }
        let norm = 1.0 / total as f64;
        let coeffs = data.iter().map(|(re, _)| re * norm).collect();
        PeriodicSpectrum { dim, k_max, s_min, coeffs }
    }

    fn factors(&self, s: f64) -> HeatFactors {
        let k_cut = ((HEAT_CUTOFF / (2.0 * PI * PI * s)).sqrt().ceil() as usize).min(self.k_max);
        let q = (-2.0 * PI * PI * s).exp();
        // q^{k²} by successive odd powers
        let mut values = Vec::with_capacity(k_cut + 1);
        let (mut qk, mut step) = (1.0, q);
        for _ in 0..=k_cut {
            values.push(qk);
            qk *= step;
            step *= q * q;
        }
        HeatFactors { s, values }
    }

    fn eval(&self, f: &HeatFactors, theta: &Point, y: &Point, grad: Option<&mut TangentVector>) -> f64 {
        let k_cut = f.values.len() - 1;
        if self.dim == 1 {
            let delta = theta.coords()[0] - y.coords()[0];
            let (sin1, cos1) = (2.0 * PI * delta).sin_cos();
            let (mut sk, mut ck) = (sin1, cos1);
            let mut value = self.coeffs[self.k_max];
            let mut deriv = 0.0;
            for k in 1..=k_cut {
                let c = 2.0 * self.coeffs[self.k_max + k] * f.values[k];
                value += c * ck;
                deriv -= c * 2.0 * PI * k as f64 * sk;
                let ns = sk * cos1 + ck * sin1;
                ck = ck * cos1 - sk * sin1;
                sk = ns;
            }
            if let Some(g) = grad {
                *g = TangentVector::new(*theta, &[deriv]);
            }
            return value;
        }
        let width = 2 * self.k_max + 1;
        // per-axis tables of e^{2πi k δ_a} for |k| ≤ k_cut
        let span = 2 * k_cut + 1;
        let mut phase = [(0.0, 0.0); 3 * (2 * MAX_MODE + 1)];
        let phase = &mut phase[..self.dim * span];
        for a in 0..self.dim {
            let delta = theta.coords()[a] - y.coords()[a];
            let (sn, cs) = (2.0 * PI * delta).sin_cos();
            let row = &mut phase[a * span..(a + 1) * span];
            row[k_cut] = (1.0, 0.0);
            for k in 1..=k_cut {
                let (pr, pi) = row[k_cut + k - 1];
                let next = (pr * cs - pi * sn, pr * sn + pi * cs);
                row[k_cut + k] = next;
                row[k_cut - k] = (next.0, -next.1);
            }
        }
        let mut value = 0.0;
        let mut deriv = [0.0; 3];
        let mut idx = [0usize; 3];
        'outer: loop {
            let mut flat = 0;
            let mut h = 1.0;
            let (mut re, mut im) = (1.0, 0.0);
            let mut k2 = 0.0;
            for a in 0..self.dim {
                let kk = idx[a] as f64 - k_cut as f64;
                flat = flat * width + (self.k_max + idx[a] - k_cut);
                h *= f.values[idx[a].abs_diff(k_cut)];
                k2 += kk * kk;
                let (pr, pi) = phase[a * span + idx[a]];
                let nr = re * pr - im * pi;
                im = re * pi + im * pr;
                re = nr;
            }
            if 2.0 * PI * PI * k2 * f.s <= HEAT_CUTOFF {
                let c = self.coeffs[flat] * h;
                value += c * re;
                for (a, d) in deriv.iter_mut().enumerate().take(self.dim) {
                    let kk = idx[a] as f64 - k_cut as f64;
                    *d -= c * 2.0 * PI * kk * im;
                }
            }
            for a in (0..self.dim).rev() {
                idx[a] += 1;
                if idx[a] < span {
                    continue 'outer;
                }
                idx[a] = 0;
            }
            break;
        }
        if let Some(g) = grad {
            *g = TangentVector::new(*theta, &deriv[..self.dim]);
        }
        value
    }
}

/// DFT along one axis keeping only modes `-k_max..=k_max`.
fn partial_dft(
    data: &[(f64, f64)],
    shape: &[usize],
    axis: usize,
    k_max: usize,
    twiddle: &[(f64, f64)],
) -> Vec<(f64, f64)> {
    let n_axis = shape[axis];
    let n = twiddle.len();
    let width = 2 * k_max + 1;
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = vec![(0.0, 0.0); outer * width * inner];
    for o in 0..outer {
        for (ki, k) in (-(k_max as i64)..=k_max as i64).enumerate() {
            for i in 0..inner {
                let (mut re, mut im) = (0.0, 0.0);
                for j in 0..n_axis {
                    let (xr, xi) = data[(o * n_axis + j) * inner + i];
                    // e^{-2πi k j / n}
                    let m = (k * j as i64).rem_euclid(n as i64) as usize;
                    let (sn, cs) = twiddle[m];
                    re += xr * cs + xi * sn;
                    im += xi * cs - xr * sn;
                }
                out[(o * width + ki) * inner + i] = (re, im);
            }
        }
    }
    out
}

/// Legendre moments of `γ ↦ (Rγ)^p` on the sphere.
#[derive(Clone, Debug)]
pub struct ZonalSpectrum {
    s_min: f64,
    /// `(2l+1)/2 · g_l`.
    coeffs: Vec<f64>,
}

impl ZonalSpectrum {
    fn new(p: f64, s_min: f64) -> Self {
        let l_max = sphere_degree(s_min, SPHERE_RADIUS).max(4);
        // composite Gauss–Legendre in γ; γ^p is only mildly singular at 0
        let (x, w) = gauss_legendre(16);
        let panels = 400;
        let mut g = vec![0.0; l_max + 1];
        let mut pl = Vec::with_capacity(l_max + 1);
        for panel in 0..panels {
            let a = PI * panel as f64 / panels as f64;
            let b = PI * (panel + 1) as f64 / panels as f64;
            for (xi, wi) in x.iter().zip(&w) {
                let gamma = 0.5 * (a + b) + 0.5 * (b - a) * xi;
                let weight = 0.5 * (b - a) * wi * (SPHERE_RADIUS * gamma).powf(p) * gamma.sin();
                crate::manifold::heat::legendre(gamma.cos(), l_max, &mut pl);
                for (gl, p) in g.iter_mut().zip(&pl) {
                    *gl += weight * p;
                }
            }
        }
        let coeffs = g.iter().enumerate().map(|(l, gl)| (2.0 * l as f64 + 1.0) / 2.0 * gl).collect();
        ZonalSpectrum { s_min, coeffs }
    }

    fn factors(&self, s: f64) -> HeatFactors {
        let l_max = (self.coeffs.len() - 1).min(sphere_degree(s, SPHERE_RADIUS));
        let values = (0..=l_max)
            .map(|l| self.coeffs[l] * (-sphere_eigenvalue(l, SPHERE_RADIUS) * s).exp())
            .collect();
        HeatFactors { s, values }
    }

    fn eval(&self, f: &HeatFactors, theta: &Point, y: &Point, grad: Option<&mut TangentVector>) -> f64 {
        let r2 = SPHERE_RADIUS * SPHERE_RADIUS;
        let t = theta.coords();
        let yc = y.coords();
        let c = ((t[0] * yc[0] + t[1] * yc[1] + t[2] * yc[2]) / r2).clamp(-1.0, 1.0);
        let (mut p_prev, mut p_cur) = (1.0, c);
        let (mut d_prev, mut d_cur) = (0.0, 1.0);
        let mut value = f.values[0];
        let mut dc = 0.0;
        for (l, a) in f.values.iter().enumerate().skip(1) {
            value += a * p_cur;
            dc += a * d_cur;
            let lf = l as f64;
            let p_next = ((2.0 * lf + 1.0) * c * p_cur - lf * p_prev) / (lf + 1.0);
            let d_next = d_prev + (2.0 * lf + 1.0) * p_cur;
            p_prev = p_cur;
            p_cur = p_next;
            d_prev = d_cur;
            d_cur = d_next;
        }
        if let Some(g) = grad {
            let k = dc / r2;
            *g = TangentVector::new(
                *theta,
                &[k * (yc[0] - c * t[0]), k * (yc[1] - c * t[1]), k * (yc[2] - c * t[2])],
            );
        }
        value
    }
}
