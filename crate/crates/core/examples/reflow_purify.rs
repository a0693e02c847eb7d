//! Train, then run reflow rounds with and without purification and compare
//! estimated-coupling costs with independent couplings and step counts.
//!
//!     cargo run --release --example reflow_purify -- [train_steps] [pairs] [reflow_steps]

use geomflow::data::{is_valid, make_dataset, SizeHistogram, TemplateSpec};
use geomflow::flow::{generate, reflow, reflow::median_of, train, TrainConfig};
use geomflow::geometry::Geometry;

fn main() -> geomflow::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, default: usize| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let spec = TemplateSpec::default();
    let data = make_dataset(&spec, 2000)?;
    let cfg = TrainConfig {
        steps: arg(1, 1500),
        hidden: 32,
        lr: 1e-3,
        identity_latent: true,
        reflow_rounds: 1,
        reflow_pairs: Some(arg(2, 1000)),
        reflow_steps: arg(3, 1000),
        ..Default::default()
    };
    let base = train(&data, &cfg)?.model;
    let sizes = SizeHistogram::from_geometries(&data);
    let steps_of = |m: &geomflow::nn::VectorFieldModel| -> geomflow::Result<f64> {
        let s: Vec<usize> = generate(m, &sizes, 200, &cfg.solver, 99)?.into_iter().map(|(_, s)| s).collect();
        Ok(median_of(&s))
    };
    let before = steps_of(&base)?;
    println!("median adaptive steps before reflow: {before}");

    let rule = spec.validity.clone();
    let valid = move |g: &Geometry| is_valid(g, &rule).valid;
    for purify in [false, true] {
        let out = reflow(&base, &data, &TrainConfig { purify, ..cfg.clone() }, &valid)?;
        let r = &out.rounds[0];
        let after = steps_of(&out.model)?;
        println!(
            "purify {:5}: kept {}/{} (validity {:.1}%)  estimated cost {:.4}  random cost {:.4}  median steps after {}",
            purify,
            r.kept,
            r.generated,
            100.0 * r.validity_rate,
            r.estimated.total_cost,
            r.random.total_cost,
            after
        );
    }
    Ok(())
}
