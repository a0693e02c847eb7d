//! Compare the single-pass and alternating alignment heuristics with the
//! exhaustive oracle on random small point sets.
//!
//!     cargo run --release --example omt_oracle_gap -- [pairs] [seed]

use geomflow::alignment::{brute_force_omt, solve_omt};
use geomflow::geometry::{project_zero_com, LatentGeometry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_latent(n: usize, k: usize, rng: &mut ChaCha8Rng) -> LatentGeometry {
    let coords = (0..n)
        .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)])
        .collect();
    let features = (0..n).map(|_| (0..k).map(|_| rng.sample(StandardNormal)).collect()).collect();
    project_zero_com(&LatentGeometry::new(coords, features).expect("consistent shapes"))
}

fn main() -> geomflow::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let pairs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut single_agree = 0;
    let mut multi_agree = 0;
    let mut single_gap = 0.0;
    let mut multi_gap = 0.0;
    for _ in 0..pairs {
        let n = rng.random_range(2..=6);
        let z1 = random_latent(n, 3, &mut rng);
        let z0 = random_latent(n, 3, &mut rng);
        let exact = brute_force_omt(&z1, &z0, 0.5)?.cost;
        let single = solve_omt(&z1, &z0, 0.5, 1)?.cost;
        let multi = solve_omt(&z1, &z0, 0.5, 100)?.cost;
        single_agree += usize::from(single - exact <= 1e-8);
        multi_agree += usize::from(multi - exact <= 1e-8);
        single_gap += single - exact;
        multi_gap += multi - exact;
    }
    let m = pairs as f64;
    println!("pairs            {pairs}");
    println!("single pass      agree {:.1}%  mean gap {:.4}", 100.0 * single_agree as f64 / m, single_gap / m);
    println!("alternating      agree {:.1}%  mean gap {:.4}", 100.0 * multi_agree as f64 / m, multi_gap / m);
    Ok(())
}
