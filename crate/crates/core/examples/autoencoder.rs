//! Train the equivariant autoencoder and report reconstruction quality.
//!
//!     cargo run --release --example autoencoder -- [ae_steps]

use geomflow::data::{make_dataset, snap_onehot, TemplateSpec};
use geomflow::flow::{train_autoencoder, TrainConfig};
use geomflow::geometry::{project_zero_com, PointSet};
use geomflow::nn::VectorFieldModel;

fn main() -> geomflow::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let data = make_dataset(&TemplateSpec::default(), 200)?;
    let cfg = TrainConfig {
        ae_steps: steps,
        hidden: 16,
        ..Default::default()
    };
    let mut model = VectorFieldModel::init(cfg.arch(data[0].feature_dim()), 0)?;
    let losses = train_autoencoder(&mut model, &data, &cfg)?;
    println!("loss {:.4} -> {:.4}", losses[0], losses[losses.len() - 1]);

    let mut coord_err: f64 = 0.0;
    let mut label_hits = 0usize;
    let mut atoms = 0usize;
    for g in &data {
        let g = project_zero_com(g);
        let back = model.decode(&model.encode_mean(&g)?)?;
        for (a, b) in back.coords().iter().zip(g.coords()) {
            coord_err = coord_err.max((0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max));
        }
        let snapped = snap_onehot(&back);
        for (a, b) in snapped.features().iter().zip(g.features()) {
            label_hits += usize::from(a == b);
            atoms += 1;
        }
    }
    println!("max coordinate error {coord_err:.3}, feature labels recovered {:.1}%", 100.0 * label_hits as f64 / atoms as f64);
    Ok(())
}
