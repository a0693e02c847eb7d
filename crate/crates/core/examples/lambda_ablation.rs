//! Train at several coordinate/feature trade-offs and print the cost table.
//!
//!     cargo run --release --example lambda_ablation -- [steps] [pairs]

use geomflow::data::{make_dataset, TemplateSpec};
use geomflow::experiments::{lambda_ablation, LambdaRow};
use geomflow::flow::TrainConfig;

fn main() -> geomflow::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, default: usize| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let data = make_dataset(&TemplateSpec::default(), 500)?;
    let cfg = TrainConfig {
        steps: arg(1, 300),
        hidden: 16,
        lr: 1e-3,
        identity_latent: true,
        ..Default::default()
    };
    let rows = lambda_ablation(&data, &cfg, &[0.0, 0.25, 0.5, 0.75, 1.0], arg(2, 200))?;
    println!("{}", LambdaRow::CSV_HEADER);
    for r in rows {
        println!("{}", r.csv_row());
    }
    Ok(())
}
