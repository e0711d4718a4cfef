//! Annealing on the circle with atoms {0, 0.4}: the 2-mean is 0.2.
//! Runs a small smoothed-mode ensemble and its homogenized reference.

use std::sync::Arc;

use pmeans::anneal::{AnnealConfig, Engine, Mode, Neighborhood, Schedules};
use pmeans::cost::h_functional;
use pmeans::landscape::{elevation_constant, recommended_k, Grid, ScalarField};
use pmeans::manifold::Manifold;
use pmeans::measure::DiscreteMeasure;

fn main() -> pmeans::error::Result<()> {
    let m = Manifold::Circle;
    let nu = DiscreteMeasure::from_coords(m, &[vec![0.0], vec![0.4]], None)?;
    let field = ScalarField::evaluate(Arc::new(Grid::new(m, 4096)?), |y| h_functional(&nu, 2.0, y).unwrap())?;
    let k = recommended_k(elevation_constant(&field).c_u);

    let t_end = 300.0;
    let mut config = AnnealConfig::new(nu, 2.0, Schedules::new(k, Mode::Smoothed)?, t_end);
    config.output_times = vec![10.0, 100.0, t_end];
    let engine = Engine::new(config)?;
    let target = Neighborhood { center: m.point(&[0.2])?, radius: 0.05 };
    let checkpoints = [10.0, 100.0, t_end];

    for homogenized in [false, true] {
        let (stats, _) = engine.ensemble(3, 40, &target, &checkpoints, homogenized)?;
        println!(
            "{}: k = {k:.4}",
            if homogenized { "homogenized" } else { "switched   " }
        );
        for i in 0..stats.checkpoints.len() {
            println!(
                "  t = {:>5}: hit fraction {:.3}  [{:.3}, {:.3}]",
                stats.checkpoints[i], stats.fractions[i], stats.wilson_lo[i], stats.wilson_hi[i]
            );
        }
    }

    let one = engine.run(11, 0)?;
    let last = one.trajectory.last().unwrap();
    println!("single run: theta({}) = {}, {} jumps", last.t, last.theta.to_csv(), last.jumps);
    Ok(())
}
