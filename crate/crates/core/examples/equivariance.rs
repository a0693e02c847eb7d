//! Rotate and permute the input of a randomly initialized velocity network
//! and measure how its outputs follow.

use geomflow::flow::sample_noise;
use geomflow::geometry::{apply_permutation, apply_rigid, com_max_abs, random_rotation, Permutation, PointSet, Translation};
use geomflow::nn::{ModelArch, VectorFieldModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> geomflow::Result<()> {
    let model = VectorFieldModel::init(ModelArch::new(4, 2, 32, 3), 1)?;
    let z = sample_noise(7, 2, 5);
    let t = 0.3;
    let v = model.forward(&z, t)?;

    let r = random_rotation(9);
    let none = Translation::default();
    let vr = model.forward(&apply_rigid(&z, &r, &none), t)?;
    let expected = apply_rigid(&v, &r, &none);
    let coord_err = vr
        .coords()
        .iter()
        .zip(expected.coords())
        .flat_map(|(a, b)| (0..3).map(move |i| (a[i] - b[i]).abs()))
        .fold(0.0, f64::max);
    let feat_err = vr
        .features()
        .iter()
        .flatten()
        .zip(v.features().iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("rotation: coordinate error {coord_err:.2e}, feature change {feat_err:.2e}");

    let p = Permutation::random(7, &mut ChaCha8Rng::seed_from_u64(2));
    let vp = model.forward(&apply_permutation(&z, &p)?, t)?;
    println!("permutation: outputs match exactly = {}", vp == apply_permutation(&v, &p)?);
    println!("output center of mass {:.2e}", com_max_abs(v.coords()));
    Ok(())
}
