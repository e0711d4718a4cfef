//! Ties between global minimizers are exceptional: probe random
//! configurations and histogram the uniqueness gap.

use pmeans::empirics::{empirical_p_mean, uniqueness_probe, ProbeLaw};
use pmeans::manifold::Manifold;

fn main() -> pmeans::error::Result<()> {
    for (m, n, p, trials, res) in [(Manifold::Circle, 3, 2.0, 200, 4096), (Manifold::Sphere, 3, 1.0, 30, 80)] {
        let r = uniqueness_probe(m, n, p, &ProbeLaw::Uniform, trials, res, 9)?;
        println!("{m}, N = {n}, p = {p}: {} exact ties, {} near ties in {} trials", r.exact_ties, r.near_ties, r.trials);
        for b in r.histogram.iter().filter(|b| b.count > 0) {
            if b.log10_hi.is_finite() {
                println!("  gap in [1e{}, 1e{}): {}", b.log10_lo, b.log10_hi, b.count);
            } else {
                println!("  gap >= 1 or a single basin: {}", b.count);
            }
        }
    }

    // a hand-built tie is detected, not broken silently
    let m = Manifold::Circle;
    let e = empirical_p_mean(m, &[m.point(&[0.0])?, m.point(&[0.5])?], 2.0, 4096, 1e-8)?;
    println!("antipodal pair: ambiguous = {}, candidates {} and {}", e.ambiguous, e.point.to_csv(), e.runner_up.unwrap().to_csv());
    Ok(())
}
