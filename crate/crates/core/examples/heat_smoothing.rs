//! Smoothed costs and the splitting identity `U(s1, s2) = U(0, s1 + s2)`.

use pmeans::cost::{u_smoothed, GradientBound, PowerCost, SmoothedCost};
use pmeans::manifold::Manifold;
use pmeans::measure::DiscreteMeasure;

fn main() -> pmeans::error::Result<()> {
    let m = Manifold::Circle;
    let nu = DiscreteMeasure::from_coords(m, &[vec![0.0], vec![0.4]], None)?;
    let p = 2.0;

    println!("  theta    H        U(.05,.05)  U(0,.1)    |diff|");
    for theta in [0.1, 0.2, 0.45, 0.7, 0.9] {
        let t = m.point(&[theta])?;
        let h = u_smoothed(&nu, p, 0.0, 0.0, &t, 2048)?;
        let split = u_smoothed(&nu, p, 0.05, 0.05, &t, 2048)?;
        let merged = u_smoothed(&nu, p, 0.0, 0.1, &t, 2048)?;
        println!("  {theta:<7.2}  {h:.6}  {split:.8}  {merged:.8}  {:.1e}", (split - merged).abs());
    }

    // the smoothed gradient never exceeds p·D^(p-1)
    let bound = GradientBound::new(m, p);
    let kappa = SmoothedCost::new(PowerCost::new(p)?, 0.05, 2048)?;
    let y = m.point(&[0.0])?;
    let worst = (0..200)
        .map(|i| kappa.grad_kappa(m, &m.point(&[i as f64 / 200.0]).unwrap(), &y).norm())
        .fold(0.0, f64::max);
    println!("max |grad kappa_0.05| = {worst:.6} <= K = {:.6}", bound.k);
    Ok(())
}
