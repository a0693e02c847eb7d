//! Fit the velocity network to a single aligned pair and check that one
//! Euler step from its noise lands on the target.
//!
//! Usage: cargo run --release --example memorize_pair [steps] [lr] [hidden]

use geomflow::costs::CostSpace;
use geomflow::data::{make_dataset, TemplateSpec};
use geomflow::flow::{fine_tune, sample_noise, sample_ode, CouplingPair, CouplingSet, PairSource, SolverConfig, TrainConfig};
use geomflow::geometry::PointSet;
use geomflow::nn::{ModelArch, VectorFieldModel};

fn main() -> geomflow::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(6000);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-2);
    let hidden: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(32);

    let data = make_dataset(&TemplateSpec::default(), 1)?;
    let mut model = VectorFieldModel::init(ModelArch::identity(4, hidden, 3), 0)?;
    let z1 = model.encode(&data[0], 0.0, 0)?;
    let z0 = sample_noise(z1.n(), 4, 7);
    let pair = CouplingPair::new(z0.clone(), z1, PairSource::Random)?.align(0.5, 50)?;
    let target = pair.z1.clone();
    let set = CouplingSet::new(CostSpace::Latent, vec![pair]);
    let cfg = TrainConfig {
        lr,
        batch_size: 16,
        cosine_lr: true,
        ..Default::default()
    };
    let losses = fine_tune(&mut model, &set, &cfg, steps, 0)?;
    let tail = &losses[losses.len().saturating_sub(20)..];
    println!("final loss (mean of last {}): {:.3e}", tail.len(), tail.iter().sum::<f64>() / tail.len() as f64);

    let u: Vec<f64> = target.to_flat().iter().zip(z0.to_flat()).map(|(a, b)| a - b).collect();
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let zt = geomflow::flow::interpolate(&z0, &target, t)?;
        let v = model.forward(&zt, t)?.to_flat();
        let e = v.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("t={t:.2} max velocity error {e:.3e}");
    }
    let (z, _) = sample_ode(&model, &z0, &SolverConfig::euler(1))?;
    let err = z
        .to_flat()
        .iter()
        .zip(target.to_flat())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("one-step Euler max entry error: {err:.3e}");
    Ok(())
}
