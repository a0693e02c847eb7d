//! Compare the hand-written backward pass of the flow-matching loss with
//! central finite differences.

use geomflow::flow::{fm_loss, sample_noise, CouplingPair, PairSource};
use geomflow::nn::{grad_check, EgnnStack, ModelArch, Parameterized, VectorFieldModel};

fn main() -> geomflow::Result<()> {
    let model = VectorFieldModel::init(ModelArch::new(4, 2, 12, 2), 0)?;
    let pair = CouplingPair::new(sample_noise(5, 2, 1), sample_noise(5, 2, 2), PairSource::Random)?.align(0.5, 10)?;
    let t = 0.4;
    let mut grad = model.velocity.zeros_like();
    let loss = fm_loss(&model, &pair, t, Some((&mut grad, 1.0)))?;

    let report = grad_check(
        &model.velocity,
        |s: &EgnnStack| {
            let mut m = model.clone();
            m.velocity = s.clone();
            fm_loss(&m, &pair, t, None).unwrap_or(f64::NAN)
        },
        &grad,
    );
    println!("loss {loss:.6}, {} parameters checked", report.checked);
    println!(
        "max relative error {:.2e} at parameter {:?} (analytic {:.6e}, numeric {:.6e})",
        report.max_rel_error, report.worst_index, report.analytic, report.numeric
    );
    Ok(())
}
