//! The empirical p-mean process `e_{p,n}` for samples of a smoothed
//! two-atom law, with its basin changes.

use pmeans::empirics::{basin_jumps, mean_process, MeanFinder};
use pmeans::manifold::Manifold;
use pmeans::measure::DiscreteMeasure;
use pmeans::rng::stream;

fn main() -> pmeans::error::Result<()> {
    let m = Manifold::Circle;
    let law = DiscreteMeasure::from_coords(m, &[vec![0.1], vec![0.6]], None)?.smoothed(0.005)?;
    let finder = MeanFinder::new(m, 2.0, 2048, 1e-8)?;

    let mut rng = stream(5, 0);
    let samples = std::iter::from_fn(|| Some(law.sample(&mut rng)));
    let records = mean_process(&finder, samples, 60, 0.2 * m.diameter())?;
    for r in records.iter().filter(|r| r.n <= 10 || r.n % 10 == 0) {
        println!(
            "n = {:>3}: e = {:.5}  H = {:.5}  gap = {:.2e}  basin {}",
            r.n,
            r.e_pn.coords()[0],
            r.h_value,
            r.gap,
            r.basin_id
        );
    }
    println!("{} basin changes over {} steps", basin_jumps(&records), records.len());
    Ok(())
}
