//! Optimal proper rotation between two corresponded, centered point sets.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geometry::{com_max_abs, Rotation, Vec3};

/// Center-of-mass tolerance for inputs to [`kabsch`].
pub const CENTERING_TOLERANCE: f64 = 1e-8;

/// Proper rotation `R` minimizing `sum_i |R x_target[i] - x_ref[i]|^2`.
///
/// Both inputs must be zero-CoM. For rank-deficient cross-covariances the
/// SVD's output is kept as-is, with the determinant correction applied to
/// the direction of the smallest singular value.
pub fn kabsch(x_target: &[Vec3], x_ref: &[Vec3]) -> Result<Rotation> {
    if x_target.len() != x_ref.len() {
        return Err(Error::SizeMismatch(format!(
            "kabsch inputs have {} and {} rows",
            x_target.len(),
            x_ref.len()
        )));
    }
    let off = com_max_abs(x_target).max(com_max_abs(x_ref));
    if off > CENTERING_TOLERANCE {
        return Err(Error::NotCentered(off));
    }
    Ok(kabsch_unchecked(x_target, x_ref))
}

pub(crate) fn kabsch_unchecked(x_target: &[Vec3], x_ref: &[Vec3]) -> Rotation {
    let mut h = Matrix3::<f64>::zeros();
    for (t, r) in x_target.iter().zip(x_ref) {
        for a in 0..3 {
            for b in 0..3 {
                h[(a, b)] += t[a] * r[b];
            }
        }
    }
    if h.iter().all(|v| *v == 0.0) {
        return Rotation::identity();
    }

    let svd = h.svd(true, true);
    let u = svd.u.expect("svd computed u");
    let v = svd.v_t.expect("svd computed v_t").transpose();
    let smallest = (0..3)
        .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
        .unwrap_or(2);

    let mut d = Matrix3::<f64>::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(smallest, smallest)] = -1.0;
    }
    let r = v * d * u.transpose();

    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = r[(i, j)];
        }
    }
    Rotation::from_matrix_unchecked(out)
}

/// Sum of squared distances between `R x_target[i]` and `x_ref[i]`.
pub fn rotation_objective(rotation: &Rotation, x_target: &[Vec3], x_ref: &[Vec3]) -> f64 {
    x_target
        .iter()
        .zip(x_ref)
        .map(|(&t, &r)| {
            let p = rotation.apply(t);
            (0..3).map(|a| (p[a] - r[a]).powi(2)).sum::<f64>()
        })
        .sum()
}
