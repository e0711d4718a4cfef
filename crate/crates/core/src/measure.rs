//! Discrete probability measures and their heat smoothings.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::manifold::{Manifold, Point};

/// Weighted atoms `Σ w_i δ_{x_i}` on a manifold.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    manifold: Manifold,
    atoms: Vec<Point>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DiscreteMeasure {
    /// Weights must be nonnegative and sum to one within `1e-9`; they are
    /// renormalized exactly.
    pub fn new(manifold: Manifold, atoms: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Argument("measure needs at least one atom".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::Argument(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if let Some(a) = atoms.iter().find(|a| !manifold.contains(a)) {
            return Err(Error::Argument(format!("atom {:?} is not a point of {manifold}", a.coords())));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Argument("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!("weights sum to {total}, expected 1")));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(DiscreteMeasure { manifold, atoms, weights, cumulative })
    }

    /// `μ(x) = (1/N) Σ δ_{x_k}`.
    pub fn uniform_empirical(manifold: Manifold, points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Argument("empirical measure of an empty sample".into()));
        }
        let n = points.len();
        Self::new(manifold, points, vec![1.0 / n as f64; n])
    }

    /// Atoms given as chart coordinates.
    pub fn from_coords(manifold: Manifold, atoms: &[Vec<f64>], weights: Option<Vec<f64>>) -> Result<Self> {
        let pts = atoms.iter().map(|c| manifold.point(c)).collect::<Result<Vec<_>>>()?;
        match weights {
            Some(w) => {
                let total: f64 = w.iter().sum();
                if !(total > 0.0) {
                    return Err(Error::Argument("weights must have positive sum".into()));
                }
                Self::new(manifold, pts, w.iter().map(|x| x / total).collect())
            }
            None => Self::uniform_empirical(manifold, pts),
        }
    }

    /// Parse CSV text: one atom per row, chart coordinates and an optional
    /// trailing weight column. Blank lines, `#` comments and a non-numeric
    /// header row are skipped. Weights are normalized; if absent the measure
    /// is uniform.
    pub fn parse_csv(manifold: Manifold, text: &str) -> Result<Self> {
        let width = manifold.coord_len();
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        let mut with_weights: Option<bool> = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
            let values = match parsed {
                Ok(v) => v,
                Err(_) if coords.is_empty() && with_weights.is_none() => continue,
                Err(_) => {
                    return Err(Error::Argument(format!("line {}: non-numeric field", lineno + 1)));
                }
            };
            let has_w = match values.len() {
                n if n == width => false,
                n if n == width + 1 => true,
                n => {
                    return Err(Error::Argument(format!(
                        "line {}: expected {width} or {} columns, got {n}",
                        lineno + 1,
                        width + 1
                    )))
                }
            };
            if *with_weights.get_or_insert(has_w) != has_w {
                return Err(Error::Argument(format!("line {}: inconsistent weight column", lineno + 1)));
            }
            coords.push(values[..width].to_vec());
            if has_w {
                weights.push(values[width]);
            }
        }
        Self::from_coords(manifold, &coords, with_weights.unwrap_or(false).then_some(weights))
    }

    pub fn load_csv(manifold: Manifold, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv(manifold, &text)
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// One atom, chosen by inverting the cumulative weights at a single
    /// uniform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let u: f64 = rng.random();
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.atoms.len() - 1);
        self.atoms[i]
    }

    pub fn smoothed(&self, s: f64) -> Result<SmoothedMeasure> {
        SmoothedMeasure::new(self.clone(), s)
    }
}

/// `ν_s(y) = ∫ p(s, y, z) ν(dz)` for a discrete `ν`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothedMeasure {
    base: DiscreteMeasure,
    s: f64,
}

impl SmoothedMeasure {
    pub fn new(base: DiscreteMeasure, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Domain(format!("smoothing time must be positive, got {s}")));
        }
        Ok(SmoothedMeasure { base, s })
    }

    pub fn base(&self) -> &DiscreteMeasure {
        &self.base
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Pick an atom, then displace it by a heat-kernel step.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let atom = self.base.sample(rng);
        self.base
            .manifold
            .sample_heat(self.s, &atom, rng)
            .expect("smoothing time validated at construction")
    }

    pub fn density(&self, y: &Point) -> f64 {
        let m = self.base.manifold;
        self.base
            .atoms
            .iter()
            .zip(&self.base.weights)
            .map(|(x, w)| w * m.heat_kernel(self.s, y, x).expect("positive time"))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn circle_measure(atoms: &[f64], weights: Option<Vec<f64>>) -> DiscreteMeasure {
        let coords: Vec<Vec<f64>> = atoms.iter().map(|&a| vec![a]).collect();
        DiscreteMeasure::from_coords(Manifold::Circle, &coords, weights).unwrap()
    }

    #[test]
    fn uniform_weights() {
        assert_eq!(circle_measure(&[0.3], None).weights(), &[1.0]);
        assert_eq!(circle_measure(&[0.1, 0.2], None).weights(), &[0.5, 0.5]);
        let m = circle_measure(&[0.1, 0.2, 0.3, 0.4, 0.5], None);
        assert!(m.weights().iter().all(|&w| (w - 0.2).abs() < 1e-15));
        assert!(DiscreteMeasure::uniform_empirical(Manifold::Circle, vec![]).is_err());
    }

    #[test]
    fn invalid_measures() {
        let p = Manifold::Circle.point(&[0.1]).unwrap();
        assert!(DiscreteMeasure::new(Manifold::Circle, vec![p], vec![0.5]).is_err());
        assert!(DiscreteMeasure::new(Manifold::Circle, vec![p, p], vec![1.0]).is_err());
        assert!(DiscreteMeasure::new(Manifold::Circle, vec![p, p], vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn single_atom_sampling() {
        let m = circle_measure(&[0.7], None);
        let mut rng = stream(1, 0);
        for _ in 0..100 {
            assert_eq!(m.sample(&mut rng), m.atoms()[0]);
        }
    }

    fn frequency_within_3_sigma(w: f64) {
        let m = circle_measure(&[0.1, 0.6], Some(vec![w, 1.0 - w]));
        let mut rng = stream(2, 0);
        let n = 100_000;
        let hits = (0..n).filter(|_| m.sample(&mut rng) == m.atoms()[0]).count();
        let sigma = (w * (1.0 - w) / n as f64).sqrt();
        let f = hits as f64 / n as f64;
        assert!((f - w).abs() <= 3.0 * sigma, "freq {f} vs {w}");
    }

    #[test]
    fn binomial_frequencies() {
        frequency_within_3_sigma(0.5);
        frequency_within_3_sigma(0.9);
    }

    #[test]
    fn csv_parsing() {
        let m = DiscreteMeasure::parse_csv(Manifold::Circle, "theta\n0.1\n0.4\n").unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.weights(), &[0.5, 0.5]);
        let w = DiscreteMeasure::parse_csv(Manifold::Circle, "# comment\n0.1,3\n0.4,1\n").unwrap();
        assert!((w.weights()[0] - 0.75).abs() < 1e-15);
        assert!(DiscreteMeasure::parse_csv(Manifold::Circle, "0.1,3\n0.4\n").is_err());
        assert!(DiscreteMeasure::parse_csv(Manifold::Circle, "").is_err());
        let t = DiscreteMeasure::parse_csv(Manifold::Torus(2), "0.1,0.2\n0.3,0.4\n").unwrap();
        assert_eq!(t.atoms()[1].coords(), &[0.3, 0.4]);
    }

    #[test]
    fn one_atom_density_is_the_kernel() {
        let m = circle_measure(&[0.3], None);
        let sm = m.smoothed(0.02).unwrap();
        let y = Manifold::Circle.point(&[0.41]).unwrap();
        let k = Manifold::Circle.heat_kernel(0.02, &y, &m.atoms()[0]).unwrap();
        assert_eq!(sm.density(&y), k);
        assert!(m.smoothed(0.0).is_err());
    }

    #[test]
    fn symmetric_pair_density() {
        let m = circle_measure(&[0.2, 0.4], None);
        let single = circle_measure(&[0.2], None);
        let y = Manifold::Circle.point(&[0.3]).unwrap();
        let a = m.smoothed(0.03).unwrap().density(&y);
        let b = single.smoothed(0.03).unwrap().density(&y);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn density_normalizes_on_grid() {
        let m = circle_measure(&[0.1, 0.35, 0.8], Some(vec![0.2, 0.5, 0.3]));
        let sm = m.smoothed(0.01).unwrap();
        let n = 4096;
        let total: f64 = (0..n)
            .map(|i| sm.density(&Manifold::Circle.point(&[i as f64 / n as f64]).unwrap()))
            .sum::<f64>()
            / n as f64;
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }
}
