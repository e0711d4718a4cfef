//! Power costs `κ(θ, y) = ρ^p(θ, y)`, their heat smoothings and the
//! objectives built from them.
//!
//! Two independent routes compute the smoothed cost
//! `κ_s(θ, y) = ∫ p(s, θ, z) ρ^p(z, y) dz`:
//!
//! * [`SmoothedCost`]: direct quadrature of the defining integral (trapezoid
//!   on circle/torus, Gauss–Legendre × azimuth on the sphere);
//! * [`SpectralKernel`]: closed-form harmonic expansion, used in the SDE loop.
//!
//! The tests check them against each other.

pub mod quadrature;
pub mod spectral;

use rand::Rng;

use crate::error::{Error, Result};
use crate::manifold::{Manifold, Point, TangentVector};
use crate::measure::DiscreteMeasure;

pub use quadrature::QuadratureGrid;
pub use spectral::SpectralKernel;

/// Default number of quadrature nodes per dimension.
pub const DEFAULT_QUADRATURE_NODES: usize = 2048;

/// Below this distance the gradient of `ρ^p` is taken to be zero.
const COINCIDENCE_EPS: f64 = 1e-12;

/// `κ(θ, y) = ρ^p(θ, y)` with `p ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerCost {
    p: f64,
}

impl PowerCost {
    pub fn new(p: f64) -> Result<Self> {
        if p >= 1.0 && p.is_finite() {
            Ok(PowerCost { p })
        } else {
            Err(Error::Argument(format!("p must be ≥ 1, got {p}")))
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    #[inline]
    pub fn pow(&self, r: f64) -> f64 {
        if self.p == 2.0 {
            r * r
        } else if self.p == 1.0 {
            r
        } else {
            r.powf(self.p)
        }
    }

    pub fn value(&self, m: Manifold, theta: &Point, y: &Point) -> f64 {
        self.pow(m.distance(theta, y))
    }

    /// `grad_θ ρ^p(·, y) = -p ρ^{p-2} log_θ(y)`; zero when `θ = y`.
    /// At the cut locus the logarithm's tie-break decides the direction.
    pub fn grad(&self, m: Manifold, theta: &Point, y: &Point) -> TangentVector {
        let v = m.log(theta, y);
        let r = v.norm();
        if r < COINCIDENCE_EPS {
            return TangentVector::zero(*theta);
        }
        let k = if self.p == 2.0 { -2.0 } else { -self.p * r.powf(self.p - 2.0) };
        v.scale(k)
    }
}

/// `H_{p,ν}(y) = Σ w_i ρ^p(y, x_i)`.
pub fn h_functional(nu: &DiscreteMeasure, p: f64, y: &Point) -> Result<f64> {
    let cost = PowerCost::new(p)?;
    let m = nu.manifold();
    Ok(nu.atoms().iter().zip(nu.weights()).map(|(x, w)| w * cost.value(m, y, x)).sum())
}

/// Riemannian gradient of `H_{p,ν}` at `y`.
pub fn grad_h_functional(nu: &DiscreteMeasure, p: f64, y: &Point) -> Result<TangentVector> {
    let cost = PowerCost::new(p)?;
    let m = nu.manifold();
    let mut g = TangentVector::zero(*y);
    for (x, w) in nu.atoms().iter().zip(nu.weights()) {
        if p == 1.0 && *w > 0.0 && m.distance(y, x) < COINCIDENCE_EPS {
            return Err(Error::NotDifferentiable(format!(
                "H with p = 1 at the atom {:?}",
                x.coords()
            )));
        }
        g = g.add_scaled(*w, &cost.grad(m, y, x));
    }
    Ok(g)
}

/// Lipschitz constant of the smoothed costs: `K = p D^{p-1} K″` with
/// `K″ = sup ‖grad ρ(·, y)‖ = 1` (distance functions have unit gradient).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientBound {
    pub k: f64,
    pub k_dd: f64,
}

impl GradientBound {
    pub fn new(m: Manifold, p: f64) -> Self {
        let k_dd = 1.0;
        GradientBound { k: p * m.diameter().powf(p - 1.0) * k_dd, k_dd }
    }
}

/// Heat-smoothed power cost `κ_s`, evaluated by quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothedCost {
    pub base: PowerCost,
    pub s: f64,
    pub quadrature_nodes: usize,
}

impl SmoothedCost {
    pub fn new(base: PowerCost, s: f64, quadrature_nodes: usize) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Domain(format!("smoothing time must be positive, got {s}")));
        }
        if quadrature_nodes < 2 {
            return Err(Error::Argument("need at least two quadrature nodes".into()));
        }
        Ok(SmoothedCost { base, s, quadrature_nodes })
    }

    /// `∫ p(s, θ, z) ρ^p(z, y) dz`; the lattice contains `y`.
    pub fn kappa(&self, m: Manifold, theta: &Point, y: &Point) -> f64 {
        let grid = QuadratureGrid::new(m, self.quadrature_nodes, y);
        grid.integrate(|z| {
            m.heat_kernel(self.s, theta, z).expect("positive time") * self.base.value(m, z, y)
        })
    }

    /// `∫ ∇_θ p(s, θ, z) ρ^p(z, y) dz`.
    pub fn grad_kappa(&self, m: Manifold, theta: &Point, y: &Point) -> TangentVector {
        let grid = QuadratureGrid::new(m, self.quadrature_nodes, y);
        let mut g = TangentVector::zero(*theta);
        for (z, w) in grid.points.iter().zip(&grid.weights) {
            let p = m.heat_kernel(self.s, theta, z).expect("positive time");
            let score = m.grad_log_heat_kernel(self.s, theta, z).expect("positive time");
            g = g.add_scaled(w * p * self.base.value(m, z, y), &score);
        }
        g
    }

    /// Single-sample score-function estimate of `grad_θ κ_s(·, y)`:
    /// `∇_θ ln p(s, θ, z) ρ^p(z, y)` with `z ~ p(s, θ, ·)`. Unbiased, but its
    /// variance grows like `D^{2p} / s`, which changes the law of any process
    /// driven by it.
    pub fn grad_kappa_score<R: Rng + ?Sized>(
        &self,
        m: Manifold,
        theta: &Point,
        y: &Point,
        rng: &mut R,
    ) -> TangentVector {
        let z = m.sample_heat(self.s, theta, rng).expect("positive time");
        let score = m.grad_log_heat_kernel(self.s, theta, &z).expect("positive time");
        score.scale(self.base.value(m, &z, y))
    }
}

/// `U_{s1,s2}(θ) = ∫ κ_{s1}(θ, y) ν_{s2}(y) dy` by quadrature on a lattice
/// containing `θ`. Either time may be zero, meaning no smoothing on that
/// side (`U_{0,0} = H`).
pub fn u_smoothed(
    nu: &DiscreteMeasure,
    p: f64,
    s1: f64,
    s2: f64,
    theta: &Point,
    nodes: usize,
) -> Result<f64> {
    let cost = PowerCost::new(p)?;
    for (name, s) in [("s1", s1), ("s2", s2)] {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::Domain(format!("{name} must be ≥ 0, got {s}")));
        }
    }
    let m = nu.manifold();
    let heat = |s: f64, a: &Point, b: &Point| m.heat_kernel(s, a, b).expect("positive time");
    match (s1 > 0.0, s2 > 0.0) {
        (false, false) => h_functional(nu, p, theta),
        (true, false) => {
            let grid = QuadratureGrid::new(m, nodes, theta);
            let kernel: Vec<f64> = grid.points.iter().map(|z| heat(s1, theta, z)).collect();
            Ok(nu
                .atoms()
                .iter()
                .zip(nu.weights())
                .map(|(x, w)| {
                    w * grid
                        .points
                        .iter()
                        .zip(&grid.weights)
                        .zip(&kernel)
                        .map(|((z, wz), k)| wz * k * cost.value(m, z, x))
                        .sum::<f64>()
                })
                .sum())
        }
        (false, true) => {
            let smoothed = nu.smoothed(s2)?;
            let grid = QuadratureGrid::new(m, nodes, theta);
            Ok(grid.integrate(|y| cost.value(m, theta, y) * smoothed.density(y)))
        }
        (true, true) => {
            let smoothed = nu.smoothed(s2)?;
            let grid = QuadratureGrid::new(m, nodes, theta);
            let kernel: Vec<f64> = grid.points.iter().map(|z| heat(s1, theta, z)).collect();
            let density: Vec<f64> = grid.points.iter().map(|y| smoothed.density(y)).collect();
            let mut total = 0.0;
            for (y, (wy, dy)) in grid.points.iter().zip(grid.weights.iter().zip(&density)) {
                let kappa: f64 = grid
                    .points
                    .iter()
                    .zip(&grid.weights)
                    .zip(&kernel)
                    .map(|((z, wz), k)| wz * k * cost.value(m, z, y))
                    .sum();
                total += wy * kappa * dy;
            }
            Ok(total)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn circle(x: f64) -> Point {
        Manifold::Circle.point(&[x]).unwrap()
    }

    fn two_atoms() -> DiscreteMeasure {
        DiscreteMeasure::from_coords(Manifold::Circle, &[vec![0.0], vec![0.4]], None).unwrap()
    }

    #[test]
    fn h_running_example() {
        let nu = two_atoms();
        assert!((h_functional(&nu, 2.0, &circle(0.2)).unwrap() - 0.04).abs() < 1e-15);
        assert!((h_functional(&nu, 2.0, &circle(0.7)).unwrap() - 0.09).abs() < 1e-15);
        let single = DiscreteMeasure::from_coords(Manifold::Circle, &[vec![0.3]], None).unwrap();
        assert_eq!(h_functional(&single, 1.7, &circle(0.3)).unwrap(), 0.0);
        assert!(matches!(h_functional(&nu, 0.5, &circle(0.0)), Err(Error::Argument(_))));
    }

    #[test]
    fn grad_h_examples() {
        let single = DiscreteMeasure::from_coords(Manifold::Circle, &[vec![0.3]], None).unwrap();
        let g = grad_h_functional(&single, 2.0, &circle(0.0)).unwrap();
        assert!((g.components()[0] + 0.6).abs() < 1e-15);
        let nu = two_atoms();
        assert!(grad_h_functional(&nu, 2.0, &circle(0.2)).unwrap().norm() < 1e-15);
        assert!(matches!(
            grad_h_functional(&nu, 1.0, &circle(0.4)),
            Err(Error::NotDifferentiable(_))
        ));
        // p < 2 at an atom with p > 1 is fine
        assert!(grad_h_functional(&nu, 1.5, &circle(0.4)).is_ok());
    }

    #[test]
    fn gradient_bound_values() {
        assert!((GradientBound::new(Manifold::Circle, 2.0).k - 1.0).abs() < 1e-15);
        assert!((GradientBound::new(Manifold::Circle, 1.0).k - 1.0).abs() < 1e-15);
        let k = GradientBound::new(Manifold::Circle, 1.5).k;
        assert!((k - 1.5 * 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn kappa_local_variance() {
        let sc = SmoothedCost::new(PowerCost::new(2.0).unwrap(), 0.01, 8192).unwrap();
        let v = sc.kappa(Manifold::Circle, &circle(0.3), &circle(0.3));
        assert!((v / 0.01 - 1.0).abs() < 0.05, "{v}");
    }

    #[test]
    fn kappa_flattens_for_large_s() {
        let sc = SmoothedCost::new(PowerCost::new(2.0).unwrap(), 5.0, 512).unwrap();
        let a = sc.kappa(Manifold::Circle, &circle(0.1), &circle(0.4));
        let b = sc.kappa(Manifold::Circle, &circle(0.9), &circle(0.4));
        assert!((a - b).abs() < 1e-12);
        assert!((a - 1.0 / 12.0).abs() < 1e-6);
    }

    #[test]
    fn kappa_is_symmetric() {
        for m in [Manifold::Circle, Manifold::Sphere] {
            let nodes = if m == Manifold::Circle { 2048 } else { 48 };
            let sc = SmoothedCost::new(PowerCost::new(1.5).unwrap(), 0.03, nodes).unwrap();
            let mut rng = stream(5, 0);
            for _ in 0..5 {
                let a = m.sample_uniform(&mut rng);
                let b = m.sample_uniform(&mut rng);
                let ab = sc.kappa(m, &a, &b);
                let ba = sc.kappa(m, &b, &a);
                assert!((ab - ba).abs() < 1e-6, "{m}: {ab} vs {ba}");
            }
        }
    }

    #[test]
    fn grad_kappa_vanishes_on_diagonal() {
        let sc = SmoothedCost::new(PowerCost::new(1.0).unwrap(), 0.02, 2048).unwrap();
        assert!(sc.grad_kappa(Manifold::Circle, &circle(0.6), &circle(0.6)).norm() < 1e-12);
    }

    #[test]
    fn quadrature_and_spectral_routes_agree() {
        for &p in &[1.0, 1.5, 2.0] {
            let spec = SpectralKernel::new(Manifold::Circle, p, 0.005).unwrap();
            let mut rng = stream(11, 0);
            for _ in 0..10 {
                let s = 0.005 + 0.3 * rng.random::<f64>();
                let sc = SmoothedCost::new(PowerCost::new(p).unwrap(), s, 2048).unwrap();
                let a = Manifold::Circle.sample_uniform(&mut rng);
                let b = Manifold::Circle.sample_uniform(&mut rng);
                let q = sc.kappa(Manifold::Circle, &a, &b);
                let f = spec.kappa(&a, &b, s).unwrap();
                assert!((q - f).abs() < 1e-6, "p={p} s={s}: {q} vs {f}");
                let gq = sc.grad_kappa(Manifold::Circle, &a, &b).components()[0];
                let gf = spec.grad_kappa(&a, &b, s).unwrap().components()[0];
                assert!((gq - gf).abs() < 1e-6, "p={p} s={s}: {gq} vs {gf}");
            }
        }
    }

    #[test]
    fn sphere_quadrature_and_zonal_series_agree() {
        let m = Manifold::Sphere;
        let spec = SpectralKernel::new(m, 1.0, 0.01).unwrap();
        let sc = SmoothedCost::new(PowerCost::new(1.0).unwrap(), 0.05, 64).unwrap();
        let mut rng = stream(12, 0);
        for _ in 0..5 {
            let a = m.sample_uniform(&mut rng);
            let b = m.sample_uniform(&mut rng);
            let q = sc.kappa(m, &a, &b);
            let f = spec.kappa(&a, &b, 0.05).unwrap();
            assert!((q - f).abs() < 1e-5, "{q} vs {f}");
            let gq = sc.grad_kappa(m, &a, &b);
            let gf = spec.grad_kappa(&a, &b, 0.05).unwrap();
            assert!(gq.add_scaled(-1.0, &gf).norm() < 1e-5);
        }
    }

    #[test]
    fn score_estimator_is_unbiased() {
        let sc = SmoothedCost::new(PowerCost::new(2.0).unwrap(), 0.05, 2048).unwrap();
        let (a, b) = (circle(0.1), circle(0.3));
        let exact = sc.grad_kappa(Manifold::Circle, &a, &b).components()[0];
        let mut rng = stream(13, 0);
        let n = 200_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| sc.grad_kappa_score(Manifold::Circle, &a, &b, &mut rng).components()[0])
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - exact).abs() < 4.0 * se, "{mean} vs {exact} (se {se})");
    }

    #[test]
    fn u_smoothed_limits() {
        let nu = two_atoms();
        let th = circle(0.13);
        let h = h_functional(&nu, 2.0, &th).unwrap();
        assert_eq!(u_smoothed(&nu, 2.0, 0.0, 0.0, &th, 64).unwrap(), h);
        // p = 2 away from cut loci: smoothing adds the total variance s1 + s2
        let small = u_smoothed(&nu, 2.0, 5e-4, 5e-4, &th, 2048).unwrap();
        assert!((small - h - 1e-3).abs() < 1e-6, "{small} {h}");
        let far = circle(0.6);
        let hf = h_functional(&nu, 2.0, &far).unwrap();
        let uf = u_smoothed(&nu, 2.0, 5e-4, 5e-4, &far, 2048).unwrap();
        assert!((uf - hf).abs() / hf < 0.02);
        assert!(u_smoothed(&nu, 2.0, -1.0, 0.1, &th, 64).is_err());
    }
}
