//! Flow matching on aligned pairs, ODE sampling, and reflow with purification.

pub mod ode;
pub mod reflow;
pub mod train;

pub use ode::{integrate, sample_ode, sample_ode_with_stats, OdeStats, SolverConfig, SolverMethod};
pub use reflow::{estimate_couplings, generate, random_couplings, reflow, ReflowOutcome, RoundReport};
pub use train::{fine_tune, train, train_autoencoder, TrainConfig, TrainOutcome};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::alignment::solve_omt;
use crate::costs::CostSpace;
use crate::error::{Error, Result};
use crate::geometry::{center_coords, com_max_abs, LatentGeometry, PointSet, Vec3};
use crate::nn::{EgnnStack, Tape, VectorFieldModel};

/// Where a coupling pair came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairSource {
    /// Independent noise and data draws.
    Random,
    /// Noise paired with its ODE endpoint.
    Estimated,
}

/// One noise/target pair. When `aligned` is set, `z1` has been replaced by
/// its OMT alignment onto `z0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingPair {
    pub z0: LatentGeometry,
    pub z1: LatentGeometry,
    pub aligned: bool,
    pub source: PairSource,
    /// Whether the decoded target passed the validity rule, if checked.
    pub valid: Option<bool>,
}

const PAIR_CENTERING_TOLERANCE: f64 = 1e-8;

impl CouplingPair {
    pub fn new(z0: LatentGeometry, z1: LatentGeometry, source: PairSource) -> Result<Self> {
        if z0.n() != z1.n() || z0.feature_dim() != z1.feature_dim() {
            return Err(Error::SizeMismatch(format!(
                "pair shapes ({}, {}) vs ({}, {})",
                z0.n(),
                z0.feature_dim(),
                z1.n(),
                z1.feature_dim()
            )));
        }
        for z in [&z0, &z1] {
            let off = com_max_abs(z.coords());
            if off > PAIR_CENTERING_TOLERANCE {
                return Err(Error::NotCentered(off));
            }
        }
        Ok(CouplingPair {
            z0,
            z1,
            aligned: false,
            source,
            valid: None,
        })
    }

    /// Replace `z1` by its OMT alignment onto `z0`.
    pub fn align(mut self, lambda: f64, max_iters: usize) -> Result<Self> {
        let sol = solve_omt(&self.z1, &self.z0, lambda, max_iters)?;
        self.z1 = sol.aligned_target;
        self.aligned = true;
        Ok(self)
    }

    /// Mark as aligned without changing `z1` (the "w/o OMT" ablation).
    pub fn assume_aligned(mut self) -> Self {
        self.aligned = true;
        self
    }

    pub fn with_valid(mut self, valid: Option<bool>) -> Self {
        self.valid = valid;
        self
    }
}

/// A finite coupling between noise and target samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSet {
    pub space: CostSpace,
    pub pairs: Vec<CouplingPair>,
}

impl CouplingSet {
    pub fn new(space: CostSpace, pairs: Vec<CouplingPair>) -> Self {
        CouplingSet { space, pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Latent width of the pairs (0 when empty).
    pub fn k(&self) -> usize {
        self.pairs.first().map_or(0, |p| p.z0.feature_dim())
    }

    /// Fraction of pairs marked valid among those checked.
    pub fn validity_rate(&self) -> Option<f64> {
        let checked: Vec<bool> = self.pairs.iter().filter_map(|p| p.valid).collect();
        if checked.is_empty() {
            return None;
        }
        Some(checked.iter().filter(|v| **v).count() as f64 / checked.len() as f64)
    }
}

/// Standard Gaussian noise with zero-CoM coordinates.
pub fn sample_noise(n: usize, k: usize, seed: u64) -> LatentGeometry {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_noise_from(n, k, &mut rng)
}

pub fn sample_noise_from(n: usize, k: usize, rng: &mut impl Rng) -> LatentGeometry {
    let x: Vec<Vec3> = (0..n)
        .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)])
        .collect();
    let h = (0..n).map(|_| (0..k).map(|_| rng.sample(StandardNormal)).collect()).collect();
    LatentGeometry::new(center_coords(&x), h).expect("consistent noise shapes")
}

/// `t z1 + (1 - t) z0` on both channels.
pub fn interpolate(z0: &LatentGeometry, z1: &LatentGeometry, t: f64) -> Result<LatentGeometry> {
    if z0.n() != z1.n() || z0.feature_dim() != z1.feature_dim() {
        return Err(Error::ShapeMismatch("interpolation endpoints differ in shape".into()));
    }
    let a = z0.to_flat();
    let b = z1.to_flat();
    let mixed: Vec<f64> = a.iter().zip(&b).map(|(p, q)| t * q + (1.0 - t) * p).collect();
    LatentGeometry::from_flat(&mixed, z0.n(), z0.feature_dim())
}

/// Mean squared error between `v(z_t, t)` and `z1 - z0` over all entries.
/// With `grad`, the velocity-network gradient of the loss is accumulated
/// (scaled by `grad_scale`).
pub fn fm_loss(
    model: &VectorFieldModel,
    pair: &CouplingPair,
    t: f64,
    grad: Option<(&mut EgnnStack, f64)>,
) -> Result<f64> {
    if !pair.aligned {
        return Err(Error::PairNotAligned);
    }
    let zt = interpolate(&pair.z0, &pair.z1, t)?;
    let target: Vec<f64> = pair.z1.to_flat().iter().zip(pair.z0.to_flat()).map(|(a, b)| a - b).collect();
    let mut tape = Tape::new();
    let v = model.forward_recorded(&zt, t, &mut tape)?;
    let pred = v.to_flat();
    let count = pred.len() as f64;
    let resid: Vec<f64> = pred.iter().zip(&target).map(|(p, u)| p - u).collect();
    let loss = resid.iter().map(|r| r * r).sum::<f64>() / count;
    if let Some((g, scale)) = grad {
        let adj: Vec<f64> = resid.iter().map(|r| scale * 2.0 * r / count).collect();
        let adjoint = LatentGeometry::from_flat(&adj, v.n(), v.feature_dim())?;
        model.backward(&tape, &adjoint, g)?;
    }
    Ok(loss)
}
