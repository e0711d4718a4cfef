//! Geometric median (p = 1) of three points on the sphere, by grid oracle
//! and by annealing in plain mode with `k` taken from the landscape.

use pmeans::anneal::{AnnealConfig, Engine, Mode, Neighborhood, Schedules};
use pmeans::empirics::MeanFinder;
use pmeans::landscape::{elevation_constant, recommended_k};
use pmeans::manifold::Manifold;
use pmeans::measure::DiscreteMeasure;

fn main() -> pmeans::error::Result<()> {
    let m = Manifold::Sphere;
    let pts = [m.point(&[1.0, 0.0, 0.2])?, m.point(&[0.1, 1.0, 0.0])?, m.point(&[0.3, 0.2, 1.0])?];
    let nu = DiscreteMeasure::uniform_empirical(m, pts.to_vec())?;
    let finder = MeanFinder::new(m, 1.0, 160, 1e-10)?;
    let oracle = finder.find_measure(&nu)?;
    let c_u = elevation_constant(&finder.field(&nu)?).c_u;
    let k = recommended_k(c_u);
    println!("oracle median {} with H = {:.6}; c(U) = {c_u:.4}, k = {k:.4}", oracle.point.to_csv(), oracle.h_value);

    let t_end = 500.0;
    let mut config = AnnealConfig::new(nu, 1.0, Schedules::new(k, Mode::Plain)?, t_end);
    config.output_times = vec![t_end];
    let engine = Engine::new(config)?;
    let target = Neighborhood { center: oracle.point, radius: 0.1 };
    // the switched drift adds noise of order β²/(1+t) on top of the Brownian part
    for homogenized in [false, true] {
        let (stats, runs) = engine.ensemble(21, 30, &target, &[50.0, t_end], homogenized)?;
        let mut dist: Vec<f64> = runs.iter().map(|r| m.distance(&r.last().unwrap().theta, &oracle.point)).collect();
        dist.sort_by(f64::total_cmp);
        println!(
            "{}: final distance median {:.4}, max {:.4}; hit fraction within 0.1 at t = 50, {t_end}: {:.3}, {:.3}",
            if homogenized { "homogenized" } else { "switched   " },
            dist[dist.len() / 2],
            dist[dist.len() - 1],
            stats.fractions[0],
            stats.fractions[1]
        );
    }
    Ok(())
}
