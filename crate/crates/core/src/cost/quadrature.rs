//! Quadrature rules on the supported spaces.
//!
//! Circle and torus use the composite trapezoid rule on a uniform periodic
//! lattice, which is spectrally accurate for smooth periodic integrands. The
//! sphere uses Gauss–Legendre nodes in `cos γ` times a uniform azimuth grid,
//! with the pole placed at the anchor point.

use std::f64::consts::PI;

use crate::manifold::{Manifold, Point, SPHERE_RADIUS};

/// Nodes and weights with `Σ w_i = 1` (the total volume).
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadratureGrid {
    /// `nodes` is per dimension on circle/torus and the number of polar nodes
    /// on the sphere (with `2·nodes` azimuths). The lattice contains `anchor`.
    pub fn new(m: Manifold, nodes: usize, anchor: &Point) -> Self {
        match m {
            Manifold::Circle | Manifold::Torus(_) => {
                let d = m.coord_len();
                let total = nodes.pow(d as u32);
                let w = 1.0 / total as f64;
                let mut points = Vec::with_capacity(total);
                let mut idx = vec![0usize; d];
                let mut coords = vec![0.0; d];
                for _ in 0..total {
                    for k in 0..d {
                        coords[k] = anchor.coords()[k] + idx[k] as f64 / nodes as f64;
                    }
                    points.push(m.point(&coords).expect("finite lattice coordinates"));
                    for k in (0..d).rev() {
                        idx[k] += 1;
                        if idx[k] < nodes {
                            break;
                        }
                        idx[k] = 0;
                    }
                }
                QuadratureGrid { points, weights: vec![w; total] }
            }
            Manifold::Sphere => {
                let (u, wu) = gauss_legendre(nodes);
                let n_phi = 2 * nodes;
                let frame = m.tangent_frame(anchor);
                let e1 = frame[0].components().to_vec();
                let e2 = frame[1].components().to_vec();
                let a: Vec<f64> = anchor.coords().iter().map(|c| c / SPHERE_RADIUS).collect();
                let mut points = Vec::with_capacity(nodes * n_phi);
                let mut weights = Vec::with_capacity(nodes * n_phi);
                for (ui, wi) in u.iter().zip(&wu) {
                    let sin_g = (1.0 - ui * ui).max(0.0).sqrt();
                    for j in 0..n_phi {
                        let phi = 2.0 * PI * (j as f64 + 0.5) / n_phi as f64;
                        let (sp, cp) = phi.sin_cos();
                        let v: Vec<f64> =
                            (0..3).map(|k| ui * a[k] + sin_g * (cp * e1[k] + sp * e2[k])).collect();
                        points.push(m.point(&v).expect("nonzero sphere vector"));
                        // dA = R² du dφ and total area is one
                        weights.push(wi * 0.5 / n_phi as f64);
                    }
                }
                QuadratureGrid { points, weights }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `Σ w_i f(x_i)`.
    pub fn integrate(&self, mut f: impl FnMut(&Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for l in 1..n {
                let lf = l as f64;
                let p2 = ((2.0 * lf + 1.0) * z * p1 - lf * p0) / (lf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            let pn = p1;
            let pn1 = p0;
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(12);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // ∫ x^22 = 2/23
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert!((v - 2.0 / 23.0).abs() < 1e-14);
        let (x, _) = gauss_legendre(7);
        assert!(x[3].abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_volume() {
        for m in [Manifold::Circle, Manifold::Torus(2), Manifold::Sphere] {
            let a = m.point(&vec![0.3; m.coord_len()]).unwrap();
            let g = QuadratureGrid::new(m, 16, &a);
            assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13, "{m}");
            assert!(g.points.iter().all(|p| m.contains(p)));
        }
    }

    #[test]
    fn circle_lattice_contains_anchor() {
        let a = Manifold::Circle.point(&[0.123]).unwrap();
        let g = QuadratureGrid::new(Manifold::Circle, 8, &a);
        assert_eq!(g.points[0], a);
        assert_eq!(g.len(), 8);
    }
}
