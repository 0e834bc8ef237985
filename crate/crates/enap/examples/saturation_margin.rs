//! The identifiability margin for near-saturated embeddings: two normalized
//! vectors within epsilon of (rescaled) sign vertices that are more than
//! (1 - kappa_max)-cosine-similar must share their vertex, where
//! kappa_max = 2 (1/sqrt(d) - epsilon)^2. Prints the margin table and runs a
//! randomized search for counterexamples (there are none).
//!
//! ```bash
//! cargo run --release --example saturation_margin
//! ```

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use enap::core::{cosine_sim, normalize_in_place};
use enap::history_encoder::{saturation_bound, SaturationBound};

fn main() {
    println!("kappa_max by dimension and epsilon:");
    for d in [1usize, 2, 4, 16, 64] {
        for eps in [0.0, 0.05, 0.1, 0.2] {
            let b = saturation_bound(d, eps);
            let text = match b {
                SaturationBound::Bound(v) => format!("{v:.4}"),
                SaturationBound::Vacuous => "vacuous".to_string(),
            };
            print!("  d={d:<3} eps={eps:<5}: {text:<8}");
        }
        println!();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let trials = 20_000;
    for d in [2usize, 3, 4] {
        let inv_sqrt_d = 1.0 / (d as f64).sqrt();
        let mut violations = 0;
        for _ in 0..trials {
            let eps_budget = rng.gen_range(0.0..0.9 * inv_sqrt_d);
            let make = |rng: &mut ChaCha8Rng| -> (Vec<f64>, Vec<f64>) {
                let vertex: Vec<f64> = (0..d)
                    .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 } / (d as f64).sqrt())
                    .collect();
                let mut delta: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                normalize_in_place(&mut delta);
                let r = rng.gen_range(0.0..eps_budget);
                let mut h: Vec<f64> = vertex.iter().zip(&delta).map(|(v, x)| v + r * x).collect();
                normalize_in_place(&mut h);
                (vertex, h)
            };
            let (v1, h1) = make(&mut rng);
            let (v2, h2) = make(&mut rng);
            let eff_eps = distance(&h1, &v1).max(distance(&h2, &v2));
            let Some(kappa_max) = saturation_bound(d, eff_eps).value() else {
                continue;
            };
            let cos = cosine_sim(&h1, &h2).unwrap();
            if cos >= 1.0 - kappa_max && v1 != v2 {
                violations += 1;
            }
        }
        println!("d={d}: {violations} violations in {trials} randomized trials");
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
