//! Experiment drivers shared by the CLI, the examples and the tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::costs::{distribution_cost, optimal_molecule_cost, CostReport, OmtMode};
use crate::data::{is_valid, SizeHistogram, ValidityRule};
use crate::error::Result;
use crate::flow::{estimate_couplings, train, TrainConfig};
use crate::geometry::{Geometry, LatentGeometry, PointSet};
use crate::seed::derive_seed;

/// One row of the lambda ablation table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub lambda: f64,
    /// Estimated-coupling cost under the row's own lambda.
    pub own: CostReport,
    /// Estimated-coupling cost under the default lambda = 0.5, comparable across rows.
    pub reference: CostReport,
    pub validity_rate: f64,
    pub final_loss: f64,
}

impl LambdaRow {
    pub const CSV_HEADER: &'static str =
        "lambda,own_cost,own_coord_part,own_feature_part,reference_cost,validity_rate,final_loss";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.lambda,
            self.own.total_cost,
            self.own.coord_part,
            self.own.feature_part,
            self.reference.total_cost,
            self.validity_rate,
            self.final_loss
        )
    }
}

/// Train without reflow at each lambda and measure the cost of the
/// ODE-estimated coupling (`pairs` pairs per row).
pub fn lambda_ablation(dataset: &[Geometry], base: &TrainConfig, lambdas: &[f64], pairs: usize) -> Result<Vec<LambdaRow>> {
    let sizes = SizeHistogram::from_geometries(dataset);
    let rule = base.validity.clone();
    let valid = move |g: &Geometry| is_valid(g, &rule).valid;
    let mode = OmtMode::Heuristic {
        max_iters: base.eval_omt_iters,
    };
    lambdas
        .iter()
        .map(|&lambda| {
            let cfg = TrainConfig {
                lambda,
                reflow_rounds: 0,
                ..base.clone()
            };
            let out = train(dataset, &cfg)?;
            let (set, _) = estimate_couplings(&out.model, &sizes, pairs, &cfg.solver, &valid, derive_seed(cfg.seed, 50, 0))?;
            let tail = out.losses.len().clamp(1, 50);
            let final_loss = out.losses.iter().rev().take(tail).sum::<f64>() / tail as f64;
            Ok(LambdaRow {
                lambda,
                own: distribution_cost(&set, lambda, mode)?,
                reference: distribution_cost(&set, 0.5, mode)?,
                validity_rate: set.validity_rate().unwrap_or(1.0),
                final_loss,
            })
        })
        .collect()
}

/// Largest change of the optimal cost at `lambda` when the modality that
/// `lambda` should ignore is randomly perturbed (coordinates for 0,
/// features for 1). Zero means exact insensitivity.
pub fn modality_insensitivity(lambda: f64, pairs: &[(LatentGeometry, LatentGeometry)], mode: OmtMode, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for (z0, z1) in pairs {
        let base = optimal_molecule_cost(z0, z1, lambda, mode)?;
        let perturbed = perturb_ignored(z1, lambda, &mut rng);
        let moved = optimal_molecule_cost(z0, &perturbed, lambda, mode)?;
        worst = worst.max((moved - base).abs());
    }
    Ok(worst)
}

fn perturb_ignored(z: &LatentGeometry, lambda: f64, rng: &mut impl Rng) -> LatentGeometry {
    if lambda == 0.0 {
        let coords = z
            .coords()
            .iter()
            .map(|p| [p[0] + rng.sample::<f64, _>(StandardNormal), p[1] + rng.sample::<f64, _>(StandardNormal), p[2] + rng.sample::<f64, _>(StandardNormal)])
            .collect::<Vec<_>>();
        z.with_rows(crate::geometry::center_coords(&coords), z.features().to_vec())
    } else {
        let features = z
            .features()
            .iter()
            .map(|row| row.iter().map(|v| v + rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        z.with_rows(z.coords().to_vec(), features)
    }
}

/// Validity rate of a set of generated geometries.
pub fn validity_rate(samples: &[Geometry], rule: &ValidityRule) -> f64 {
    if samples.is_empty() {
        return 1.0;
    }
    samples.iter().filter(|g| is_valid(g, rule).valid).count() as f64 / samples.len() as f64
}
