//! Points, geodesics and heat kernels on the three supported spaces.

use pmeans::manifold::Manifold;
use pmeans::rng::stream;

fn main() -> pmeans::error::Result<()> {
    let mut rng = stream(1, 0);
    for m in [Manifold::Circle, Manifold::torus(2)?, Manifold::Sphere] {
        let x = m.sample_uniform(&mut rng);
        let y = m.sample_uniform(&mut rng);
        let v = m.log(&x, &y);
        let back = m.exp(&x, &v);
        println!("{m}: diameter {:.4}, injectivity radius {:.4}", m.diameter(), m.injectivity_radius());
        println!("  d(x, y) = {:.6}, |log_x y| = {:.6}, exp/log error {:.1e}", m.distance(&x, &y), v.norm(), m.distance(&back, &y));

        // heat kernel at a few times; on a unit-volume space it tends to 1
        for s in [0.01, 0.1, 1.0] {
            println!("  p_{s}(x, y) = {:.6}", m.heat_kernel(s, &x, &y)?);
        }
        let z = m.sample_heat(0.01, &x, &mut rng)?;
        println!("  heat sample from x at s = 0.01 lands {:.4} away", m.distance(&x, &z));
    }
    Ok(())
}
