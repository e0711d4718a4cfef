//! Empirical p-means, the empirical p-mean process, and uniqueness probes.
//!
//! The p-mean of finitely many points is found by brute force: a grid sweep
//! of `H` locates every local-minimum basin, the promising basins are
//! refined by line searches, and the gap between the two best refined
//! minima certifies (or fails to certify) uniqueness at the grid resolution.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::cost::{h_functional, GradientBound};
use crate::error::{Error, Result};
use crate::landscape::{minimizers, Grid, ScalarField};
use crate::manifold::{Manifold, Point};
use crate::measure::{DiscreteMeasure, SmoothedMeasure};
use crate::rng::stream;

/// Refinement tolerance used unless configured otherwise.
pub const DEFAULT_REFINE_TOL: f64 = 1e-8;
const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[serde(rename = "grid+refine")]
    GridRefine,
    Anneal,
}

/// Outcome of [`empirical_p_mean`].
#[derive(Clone, Debug)]
pub struct EmpiricalMean {
    pub point: Point,
    pub h_value: f64,
    /// Second-best refined basin value minus the best (`+∞` with one basin).
    pub gap: f64,
    /// `gap` is below the resolution threshold: two global minima cannot be
    /// told apart at this grid resolution.
    pub ambiguous: bool,
    /// Refined minimizer of the runner-up basin.
    pub runner_up: Option<Point>,
    pub resolution: usize,
}

/// Sweep-and-refine minimization of `H` for the uniform measure on `points`.
#[derive(Clone, Debug)]
pub struct MeanFinder {
    manifold: Manifold,
    grid: Arc<Grid>,
    p: f64,
    refine_tol: f64,
}

impl MeanFinder {
    pub fn new(m: Manifold, p: f64, resolution: usize, refine_tol: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::Argument(format!("p must be ≥ 1, got {p}")));
        }
        if !(refine_tol > 0.0) {
            return Err(Error::Argument(format!("refine_tol must be positive, got {refine_tol}")));
        }
        Ok(MeanFinder { manifold: m, grid: Arc::new(Grid::new(m, resolution)?), p, refine_tol })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Largest value gap that grid discretization can hide: `K·h²`.
    pub fn tie_threshold(&self) -> f64 {
        let h = self.grid.spacing();
        GradientBound::new(self.manifold, self.p).k * h * h
    }

    pub fn field(&self, nu: &DiscreteMeasure) -> Result<ScalarField> {
        let p = self.p;
        ScalarField::evaluate(self.grid.clone(), |y| h_functional(nu, p, y).expect("p validated"))
    }

    pub fn find(&self, points: &[Point]) -> Result<EmpiricalMean> {
        let nu = DiscreteMeasure::uniform_empirical(self.manifold, points.to_vec())?;
        self.find_measure(&nu)
    }

    pub fn find_measure(&self, nu: &DiscreteMeasure) -> Result<EmpiricalMean> {
        let field = self.field(nu)?;
        let mins = minimizers(&field, 0.0);
        let h = |y: &Point| h_functional(nu, self.p, y).expect("p validated");
        let spacing = self.grid.spacing();
        // basins whose grid value could still be the best after refinement
        let margin = GradientBound::new(self.manifold, self.p).k * spacing;
        let best_grid = mins.basins[0].value;
        let mut refined: Vec<(f64, Point)> = mins
            .basins
            .iter()
            .enumerate()
            .filter(|(i, b)| *i < 2 || b.value <= best_grid + margin)
            .map(|(_, b)| {
                let x = refine(self.manifold, &h, self.grid.node(b.node), spacing, self.refine_tol);
                (h(&x), x)
            })
            .collect();
        refined.sort_by(|a, b| a.0.total_cmp(&b.0));
        // basins that refine onto the same point are one minimum
        let mut distinct: Vec<(f64, Point)> = Vec::new();
        for (v, x) in refined {
            if distinct.iter().all(|(_, y)| self.manifold.distance(&x, y) > 2.0 * spacing) {
                distinct.push((v, x));
            }
        }
        let (h_value, point) = distinct[0];
        let (gap, runner_up) = match distinct.get(1) {
            Some((v, x)) => (v - h_value, Some(*x)),
            None => (f64::INFINITY, None),
        };
        Ok(EmpiricalMean {
            point,
            h_value,
            gap,
            ambiguous: gap <= self.tie_threshold(),
            runner_up,
            resolution: self.grid.resolution(),
        })
    }

    /// Local refinement of `H` from `start`.
    pub fn refine_from(&self, points: &[Point], start: &Point) -> Result<(Point, f64)> {
        let nu = DiscreteMeasure::uniform_empirical(self.manifold, points.to_vec())?;
        let h = |y: &Point| h_functional(&nu, self.p, y).expect("p validated");
        let x = refine(self.manifold, &h, start, self.grid.spacing(), self.refine_tol);
        Ok((x, h(&x)))
    }
}

/// `e_{p}(points)` with its uniqueness gap.
pub fn empirical_p_mean(
    m: Manifold,
    points: &[Point],
    p: f64,
    resolution: usize,
    refine_tol: f64,
) -> Result<EmpiricalMean> {
    MeanFinder::new(m, p, resolution, refine_tol)?.find(points)
}

/// Golden-section minimization of `f` on `[a, b]` to width `tol`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Coordinate descent along geodesics of an orthonormal frame, with
/// golden-section line searches on a shrinking bracket. On the circle this
/// is a single golden-section search.
pub fn refine(m: Manifold, f: &impl Fn(&Point) -> f64, start: &Point, radius: f64, tol: f64) -> Point {
    let line = |x: &Point, dir: usize, r: f64| {
        let e = m.tangent_frame(x)[dir];
        let t = golden_section(|t| f(&m.exp(x, &e.scale(t))), -r, r, tol.min(r));
        let y = m.exp(x, &e.scale(t));
        // never accept a worse point
        if f(&y) <= f(x) {
            (y, t.abs())
        } else {
            (*x, 0.0)
        }
    };
    if m == Manifold::Circle {
        return line(start, 0, radius).0;
    }
    let mut x = *start;
    let mut r = radius;
    for _ in 0..200 {
        let mut moved: f64 = 0.0;
        for dir in 0..m.dim() {
            let (y, step) = line(&x, dir, r);
            x = y;
            moved = moved.max(step);
        }
        if r <= tol && moved <= tol {
            break;
        }
        r = (2.0 * moved).clamp(tol, r);
        if moved < 0.5 * r {
            r = (0.5 * r).max(tol);
        }
    }
    x
}

/// One entry of the empirical p-mean process.
#[derive(Clone, Debug, Serialize)]
pub struct MeanProcessRecord {
    pub n: usize,
    pub e_pn: Point,
    pub h_value: f64,
    pub gap: f64,
    pub ambiguous: bool,
    /// Label of the basin holding `e_pn`; changes mark basin jumps.
    pub basin_id: usize,
    pub method: Method,
}

/// `(e_{p,n})_{n ≤ n_max}` for the prefixes of `samples`.
///
/// Each `e_{p,n}` is the better of a full grid sweep and a refinement
/// warm-started at `e_{p,n-1}`. A move by more than `jump_radius` starts a
/// new basin label unless it lands near a previously visited minimum.
pub fn mean_process(
    finder: &MeanFinder,
    samples: impl IntoIterator<Item = Point>,
    n_max: usize,
    jump_radius: f64,
) -> Result<Vec<MeanProcessRecord>> {
    let m = finder.manifold;
    let points: Vec<Point> = samples.into_iter().take(n_max).collect();
    if points.len() < n_max {
        return Err(Error::Argument(format!("stream ended after {} of {n_max} samples", points.len())));
    }
    let cold: Vec<EmpiricalMean> =
        (1..=n_max).into_par_iter().map(|n| finder.find(&points[..n])).collect::<Result<_>>()?;
    let mut records: Vec<MeanProcessRecord> = Vec::with_capacity(n_max);
    let mut centers: Vec<Point> = Vec::new();
    for (i, mean) in cold.into_iter().enumerate() {
        let n = i + 1;
        let (mut e, mut hv) = (mean.point, mean.h_value);
        if let Some(prev) = records.last() {
            let (w, hw) = finder.refine_from(&points[..n], &prev.e_pn)?;
            if hw < hv {
                (e, hv) = (w, hw);
            }
        }
        let basin_id = match records.last() {
            Some(prev) if m.distance(&prev.e_pn, &e) <= jump_radius => prev.basin_id,
            _ => {
                let near = centers
                    .iter()
                    .enumerate()
                    .map(|(id, c)| (id, m.distance(c, &e)))
                    .filter(|(_, d)| *d <= jump_radius)
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                match near {
                    Some((id, _)) => id,
                    None => {
                        centers.push(e);
                        centers.len() - 1
                    }
                }
            }
        };
        centers[basin_id] = e;
        records.push(MeanProcessRecord {
            n,
            e_pn: e,
            h_value: hv,
            gap: mean.gap,
            ambiguous: mean.ambiguous,
            basin_id,
            method: Method::GridRefine,
        });
    }
    Ok(records)
}

/// Number of basin changes along a mean process.
pub fn basin_jumps(records: &[MeanProcessRecord]) -> usize {
    records.windows(2).filter(|w| w[0].basin_id != w[1].basin_id).count()
}

/// Rows `n, e_pn coords, H_value, gap, basin_id`.
pub fn records_to_csv(m: Manifold, records: &[MeanProcessRecord]) -> String {
    let mut out = String::from("n");
    for i in 1..=m.coord_len() {
        out.push_str(&format!(",e_{i}"));
    }
    out.push_str(",H_value,gap,basin_id\n");
    for r in records {
        out.push_str(&format!("{},{},{},{},{}\n", r.n, r.e_pn.to_csv(), r.h_value, r.gap, r.basin_id));
    }
    out
}

/// Law of the sample configurations in a uniqueness probe.
#[derive(Clone, Debug)]
pub enum ProbeLaw {
    Uniform,
    Smoothed(SmoothedMeasure),
}

#[derive(Clone, Debug, Serialize)]
pub struct GapBucket {
    /// `log10` bounds of the gap.
    pub log10_lo: f64,
    pub log10_hi: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub trials: usize,
    pub n_points: usize,
    pub p: f64,
    pub resolution: usize,
    pub tie_threshold: f64,
    /// Gaps that are zero to rounding (`≤ 1e-12·H`).
    pub exact_ties: usize,
    /// Gaps below the resolution threshold.
    pub near_ties: usize,
    /// Near ties whose gap clears the threshold at 4× resolution.
    pub near_ties_resolved: usize,
    pub histogram: Vec<GapBucket>,
    pub gaps: Vec<f64>,
    /// Set when `p = 1` and `d = 1` or `N ≤ 2`: uniqueness is then not
    /// generic and ties may occur with positive probability.
    pub warning: Option<String>,
}

/// Whether almost every `N`-point configuration has a unique p-mean.
pub fn uniqueness_hypothesis(m: Manifold, n_points: usize, p: f64) -> bool {
    p > 1.0 || (m.dim() > 1 && n_points > 2)
}

/// Samples `trials` configurations of `n_points` points and records the
/// uniqueness gap of each.
pub fn uniqueness_probe(
    m: Manifold,
    n_points: usize,
    p: f64,
    law: &ProbeLaw,
    trials: usize,
    resolution: usize,
    seed: u64,
) -> Result<ProbeReport> {
    if n_points == 0 || trials == 0 {
        return Err(Error::Argument("need at least one point and one trial".into()));
    }
    if let ProbeLaw::Smoothed(nu) = law {
        if nu.base().manifold() != m {
            return Err(Error::Argument("probe law lives on a different manifold".into()));
        }
    }
    let finder = MeanFinder::new(m, p, resolution, DEFAULT_REFINE_TOL)?;
    let fine = MeanFinder::new(m, p, 4 * resolution, DEFAULT_REFINE_TOL)?;
    let threshold = finder.tie_threshold();
    let outcomes: Vec<(f64, bool, bool)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            let points: Vec<Point> = (0..n_points)
                .map(|_| match law {
                    ProbeLaw::Uniform => m.sample_uniform(&mut rng),
                    ProbeLaw::Smoothed(nu) => nu.sample(&mut rng),
                })
                .collect();
            let mean = finder.find(&points)?;
            let exact = mean.gap <= 1e-12 * mean.h_value.max(f64::MIN_POSITIVE);
            let resolved = if mean.ambiguous {
                let f = fine.find(&points)?;
                f.gap > fine.tie_threshold()
            } else {
                false
            };
            Ok((mean.gap, exact, resolved))
        })
        .collect::<Result<_>>()?;
    let gaps: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let near_ties = gaps.iter().filter(|&&g| g <= threshold).count();
    Ok(ProbeReport {
        trials,
        n_points,
        p,
        resolution,
        tie_threshold: threshold,
        exact_ties: outcomes.iter().filter(|o| o.1).count(),
        near_ties,
        near_ties_resolved: outcomes.iter().filter(|o| o.2).count(),
        histogram: gap_histogram(&gaps),
        gaps,
        warning: (!uniqueness_hypothesis(m, n_points, p)).then(|| {
            format!(
                "p = {p}, dimension {}, N = {n_points}: uniqueness is only generic for p > 1 or for dimension > 1 with N > 2",
                m.dim()
            )
        }),
    })
}

/// Decade buckets of `log10(gap)` from `1e-16` to `1`; infinite gaps
/// (single basin) go to a final `[0, ∞)` bucket, zero gaps to the first.
pub fn gap_histogram(gaps: &[f64]) -> Vec<GapBucket> {
    let mut buckets: Vec<GapBucket> = (-16..0)
        .map(|e| GapBucket { log10_lo: e as f64, log10_hi: (e + 1) as f64, count: 0 })
        .collect();
    buckets.push(GapBucket { log10_lo: 0.0, log10_hi: f64::INFINITY, count: 0 });
    let last = buckets.len() - 1;
    for &g in gaps {
        let idx = if g <= 0.0 {
            0
        } else {
            ((g.log10().floor() + 16.0).max(0.0) as usize).min(last)
        };
        buckets[idx].count += 1;
    }
    buckets
}
