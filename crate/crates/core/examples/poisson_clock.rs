//! The Poisson clock that refreshes the drift target: intensity `1 + t`,
//! so `E[N_T] = T + T²/2`.

use pmeans::anneal::next_jump_time;
use pmeans::rng::stream;

fn main() {
    let runs = 10_000;
    for horizon in [1.0, 5.0, 10.0] {
        let counts: Vec<f64> = (0..runs)
            .map(|i| {
                let mut rng = stream(42, i);
                let (mut t, mut n) = (0.0, 0u64);
                loop {
                    t = next_jump_time(t, &mut rng);
                    if t > horizon {
                        break n as f64;
                    }
                    n += 1;
                }
            })
            .collect();
        let mean = counts.iter().sum::<f64>() / runs as f64;
        let lambda = horizon + horizon * horizon / 2.0;
        let se = (lambda / runs as f64).sqrt();
        println!("T = {horizon:>4}: mean N_T = {mean:.3}, expected {lambda:.3} (z = {:+.2})", (mean - lambda) / se);
    }
}
