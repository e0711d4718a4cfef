use std::sync::Arc;

use pmeans::anneal::{next_jump_time_from, wilson_interval};
use pmeans::cost::h_functional;
use pmeans::landscape::{elevation_constant, gibbs_mass, Grid, ScalarField};
use pmeans::manifold::Manifold;
use pmeans::measure::DiscreteMeasure;
use pmeans::rng::stream;
use proptest::prelude::*;

fn manifold() -> impl Strategy<Value = Manifold> {
    prop_oneof![Just(Manifold::Circle), Just(Manifold::Torus(2)), Just(Manifold::Torus(3)), Just(Manifold::Sphere)]
}

/// Brute-force elevation: bottleneck Floyd–Warshall over all pairs.
fn minimax_elevation(field: &ScalarField) -> f64 {
    let v = field.values();
    let n = v.len();
    let mut b = vec![f64::INFINITY; n * n];
    for i in 0..n {
        b[i * n + i] = v[i];
        for &j in field.grid().neighbors(i) {
            b[i * n + j] = v[i].max(v[j]);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = b[i * n + k].max(b[k * n + j]);
                if via < b[i * n + j] {
                    b[i * n + j] = via;
                }
            }
        }
    }
    let mut best: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            best = best.max((b[i * n + j] - v[i].max(v[j])) - (v[i].min(v[j]) - field.min()));
        }
    }
    2.0 * best
}

fn circle_field(values: Vec<f64>) -> ScalarField {
    let grid = Arc::new(Grid::new(Manifold::Circle, values.len()).unwrap());
    ScalarField::from_values(grid, values).unwrap()
}

proptest! {
    #[test]
    fn exp_log_round_trip(m in manifold(), seed in any::<u64>(), frac in 0.0..0.95f64) {
        let mut rng = stream(seed, 0);
        let x = m.sample_uniform(&mut rng);
        let y = m.sample_uniform(&mut rng);
        let v = m.log(&x, &y).scale(frac);
        let z = m.exp(&x, &v);
        prop_assert!((m.distance(&x, &z) - v.norm()).abs() < 1e-10);
        let w = m.log(&x, &z);
        for (a, b) in v.components().iter().zip(w.components()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn distance_is_a_metric(m in manifold(), seed in any::<u64>()) {
        let mut rng = stream(seed, 1);
        let (x, y, z) = (m.sample_uniform(&mut rng), m.sample_uniform(&mut rng), m.sample_uniform(&mut rng));
        prop_assert!((m.distance(&x, &y) - m.distance(&y, &x)).abs() < 1e-14);
        prop_assert!(m.distance(&x, &z) <= m.distance(&x, &y) + m.distance(&y, &z) + 1e-12);
        prop_assert!(m.distance(&x, &y) <= m.diameter() + 1e-12);
    }

    #[test]
    fn h_is_nonnegative_and_vanishes_at_a_lone_atom(m in manifold(), seed in any::<u64>(), p in 1.0..3.0f64) {
        let mut rng = stream(seed, 2);
        let a = m.sample_uniform(&mut rng);
        let nu = DiscreteMeasure::uniform_empirical(m, vec![a]).unwrap();
        prop_assert_eq!(h_functional(&nu, p, &a).unwrap(), 0.0);
        let y = m.sample_uniform(&mut rng);
        prop_assert!(h_functional(&nu, p, &y).unwrap() >= 0.0);
    }

    #[test]
    fn elevation_is_offset_invariant_and_scales(values in prop::collection::vec(0.0..1.0f64, 8..64), a in 0.5..4.0f64, b in -3.0..3.0f64) {
        let base = elevation_constant(&circle_field(values.clone())).c_u;
        let shifted = elevation_constant(&circle_field(values.iter().map(|v| v + b).collect())).c_u;
        let scaled = elevation_constant(&circle_field(values.iter().map(|v| a * v).collect())).c_u;
        prop_assert!((shifted - base).abs() < 1e-9);
        prop_assert!((scaled - a * base).abs() < 1e-9 * a.max(1.0));
        prop_assert!(base >= 0.0);
    }

    #[test]
    fn elevation_matches_all_pairs_minimax(values in prop::collection::vec(0.0..1.0f64, 3..40), torus in any::<bool>()) {
        let field = if torus {
            let side = (values.len() as f64).sqrt().floor().max(3.0) as usize;
            let grid = Arc::new(Grid::new(Manifold::Torus(2), side).unwrap());
            let vals: Vec<f64> = (0..side * side).map(|i| values[i % values.len()] + i as f64 * 1e-3).collect();
            ScalarField::from_values(grid, vals).unwrap()
        } else {
            circle_field(values)
        };
        prop_assert_eq!(elevation_constant(&field).c_u, minimax_elevation(&field));
    }

    #[test]
    fn gibbs_mass_is_a_probability(values in prop::collection::vec(0.0..1.0f64, 3..50), beta in 0.0..50.0f64, k in 0usize..50) {
        let field = circle_field(values);
        let n = field.values().len();
        let small: Vec<usize> = (0..k.min(n) / 2).collect();
        let big: Vec<usize> = (0..k.min(n)).collect();
        let (ms, mb) = (gibbs_mass(&field, beta, &small).unwrap(), gibbs_mass(&field, beta, &big).unwrap());
        prop_assert!((0.0..=1.0 + 1e-12).contains(&mb));
        prop_assert!(ms <= mb + 1e-12);
        let all: Vec<usize> = (0..n).collect();
        prop_assert!((gibbs_mass(&field, beta, &all).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jump_inversion_consumes_exactly_e(t in 0.0..1e4f64, e in 1e-9..50.0f64) {
        let t2 = next_jump_time_from(t, e);
        let lambda = |u: f64| u + u * u / 2.0;
        prop_assert!(t2 > t);
        prop_assert!(((lambda(t2) - lambda(t)) - e).abs() <= 1e-9 * lambda(t2).max(1.0));
    }

    #[test]
    fn wilson_interval_brackets_the_estimate(n in 1usize..5000, frac in 0.0..=1.0f64) {
        let hits = ((n as f64) * frac).floor() as usize;
        let (lo, hi) = wilson_interval(hits, n);
        let phat = hits as f64 / n as f64;
        prop_assert!(lo <= phat + 1e-12 && phat <= hi + 1e-12);
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
    }
}
