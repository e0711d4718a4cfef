use pmeans::empirics::{basin_jumps, empirical_p_mean, mean_process, uniqueness_probe, MeanFinder, ProbeLaw};
use pmeans::manifold::Manifold;
use pmeans::measure::DiscreteMeasure;
use pmeans::rng::stream;

const M: Manifold = Manifold::Circle;

#[test]
fn warm_start_agrees_with_cold_start() {
    let finder = MeanFinder::new(M, 2.0, 1024, 1e-9).unwrap();
    let mut rng = stream(1, 0);
    let pts: Vec<_> = (0..25).map(|_| M.sample_uniform(&mut rng)).collect();
    let records = mean_process(&finder, pts.clone(), 25, 0.1).unwrap();
    for r in &records {
        let cold = empirical_p_mean(M, &pts[..r.n], 2.0, 1024, 1e-9).unwrap();
        if !cold.ambiguous {
            assert!(M.distance(&cold.point, &r.e_pn) < 1e-7, "n = {}", r.n);
        }
        // H_value is the cost of e_pn and lies below every grid node
        let nu = DiscreteMeasure::uniform_empirical(M, pts[..r.n].to_vec()).unwrap();
        let field = finder.field(&nu).unwrap();
        assert!(r.h_value <= field.min() + 1e-12);
        assert!((pmeans::cost::h_functional(&nu, 2.0, &r.e_pn).unwrap() - r.h_value).abs() < 1e-12);
    }
}

#[test]
fn concentrated_stream_stays_near_the_atom() {
    let s: f64 = 1e-4;
    let law = DiscreteMeasure::from_coords(M, &[vec![0.3]], None).unwrap().smoothed(s).unwrap();
    let finder = MeanFinder::new(M, 2.0, 1024, 1e-9).unwrap();
    let mut rng = stream(2, 0);
    let samples = std::iter::from_fn(|| Some(law.sample(&mut rng)));
    let atom = M.point(&[0.3]).unwrap();
    for r in mean_process(&finder, samples, 30, 0.1).unwrap() {
        assert!(M.distance(&r.e_pn, &atom) <= 3.0 * s.sqrt());
    }
}

#[test]
fn uniform_streams_jump_between_basins() {
    let finder = MeanFinder::new(M, 2.0, 512, 1e-8).unwrap();
    let jumps: usize = (0..20)
        .map(|i| {
            let mut rng = stream(3, i);
            let samples = std::iter::from_fn(|| Some(M.sample_uniform(&mut rng)));
            basin_jumps(&mean_process(&finder, samples, 200, 0.1).unwrap())
        })
        .sum();
    assert!(jumps >= 1);
}

#[test]
fn symmetric_law_splits_its_time_between_basins() {
    let law = DiscreteMeasure::from_coords(M, &[vec![0.1], vec![0.6]], None).unwrap().smoothed(0.002).unwrap();
    let finder = MeanFinder::new(M, 2.0, 512, 1e-8).unwrap();
    let (mut near_a, mut total) = (0, 0);
    for i in 0..100 {
        let mut rng = stream(4, i);
        let samples = std::iter::from_fn(|| Some(law.sample(&mut rng)));
        let last = mean_process(&finder, samples, 12, 0.1).unwrap().pop().unwrap();
        // the two candidate means sit near 0.35 and 0.85
        let x = last.e_pn.coords()[0];
        if (x - 0.35).abs() < 0.25 {
            near_a += 1;
        }
        total += 1;
    }
    let frac = near_a as f64 / total as f64;
    assert!((0.3..=0.7).contains(&frac), "{frac}");
}

#[test]
fn probe_guard_and_smoothed_law() {
    let r = uniqueness_probe(M, 2, 1.0, &ProbeLaw::Uniform, 5, 256, 0).unwrap();
    assert!(r.warning.is_some());
    let law = DiscreteMeasure::from_coords(M, &[vec![0.0], vec![0.4]], None).unwrap().smoothed(0.01).unwrap();
    let r = uniqueness_probe(M, 3, 2.0, &ProbeLaw::Smoothed(law), 40, 1024, 1).unwrap();
    assert!(r.warning.is_none());
    assert_eq!(r.exact_ties, 0);
    assert_eq!(r.histogram.iter().map(|b| b.count).sum::<usize>(), 40);
    let sphere = uniqueness_probe(Manifold::Sphere, 3, 1.0, &ProbeLaw::Uniform, 10, 40, 2).unwrap();
    assert!(sphere.warning.is_none());
}
