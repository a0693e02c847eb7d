//! Train a velocity field on the template fixture and sample from it.
//!
//!     cargo run --release --example train_flow -- [steps] [hidden]

use std::time::Instant;

use geomflow::data::{is_valid, make_dataset, SizeHistogram, TemplateSpec};
use geomflow::flow::{generate, reflow::median_of, train, SolverConfig, TrainConfig};

fn main() -> geomflow::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let hidden: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(32);

    let spec = TemplateSpec::default();
    let data = make_dataset(&spec, 2000)?;
    let cfg = TrainConfig {
        steps,
        hidden,
        lr: 1e-3,
        identity_latent: true,
        ..Default::default()
    };

    let start = Instant::now();
    let out = train(&data, &cfg)?;
    let secs = start.elapsed().as_secs_f64();
    let window = (steps / 5).max(1);
    let head: f64 = out.losses[..window].iter().sum::<f64>() / window as f64;
    let tail: f64 = out.losses[steps - window..].iter().sum::<f64>() / window as f64;
    println!("trained {steps} steps in {secs:.1}s  ({:.1} ms/step)", 1e3 * secs / steps as f64);
    println!("loss: first {window} steps {head:.4}, last {window} steps {tail:.4}");

    let sizes = SizeHistogram::from_geometries(&data);
    let start = Instant::now();
    let samples = generate(&out.model, &sizes, 100, &SolverConfig::default(), 7)?;
    let steps_used: Vec<usize> = samples.iter().map(|(_, s)| *s).collect();
    let valid = samples.iter().filter(|(g, _)| is_valid(g, &spec.validity).valid).count();
    println!(
        "sampled 100 in {:.1}s: median adaptive steps {}, valid {valid}/100",
        start.elapsed().as_secs_f64(),
        median_of(&steps_used)
    );
    Ok(())
}
