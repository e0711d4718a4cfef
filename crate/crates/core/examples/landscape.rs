//! Grid landscapes: minimizers, uniqueness gap, critical elevation and the
//! Gibbs concentration that annealing exploits.

use std::sync::Arc;

use pmeans::cost::h_functional;
use pmeans::landscape::{elevation_constant, gibbs_mass, minimizers, recommended_k, Grid, ScalarField};
use pmeans::manifold::Manifold;
use pmeans::measure::DiscreteMeasure;

fn main() -> pmeans::error::Result<()> {
    let m = Manifold::Circle;
    let nu = DiscreteMeasure::from_coords(m, &[vec![0.0], vec![0.4]], None)?;
    let grid = Arc::new(Grid::new(m, 4096)?);
    let field = ScalarField::evaluate(grid.clone(), |y| h_functional(&nu, 2.0, y).unwrap())?;

    let mins = minimizers(&field, 1e-12);
    for b in &mins.basins {
        println!("basin at {} with H = {:.6}", grid.node(b.node).to_csv(), b.value);
    }
    println!("uniqueness gap {:.6}", mins.uniqueness_gap);

    let elev = elevation_constant(&field);
    println!(
        "c(U) = {:.6} between {} and {}, barrier {:.6}; recommended k = {:.4}",
        elev.c_u,
        grid.node(elev.argpair.0).to_csv(),
        grid.node(elev.argpair.1).to_csv(),
        elev.barrier_value,
        recommended_k(elev.c_u)
    );

    let center = m.point(&[0.2])?;
    let ball = grid.ball(&center, 0.05);
    for beta in [1.0, 10.0, 50.0, 250.0, 1000.0] {
        println!("Gibbs mass of B(0.2, 0.05) at beta = {beta:>6}: {:.4}", gibbs_mass(&field, beta, &ball)?);
    }
    Ok(())
}
