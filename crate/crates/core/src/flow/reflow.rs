//! Generation, coupling estimation and reflow with purification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::fine_tune;
use super::{sample_noise, sample_ode, CouplingPair, CouplingSet, PairSource, SolverConfig, TrainConfig};
use crate::costs::{distribution_cost, CostReport, CostSpace, OmtMode};
use crate::data::SizeHistogram;
use crate::error::{Error, Result};
use crate::geometry::{Geometry, PointSet};
use crate::nn::{EgnnStack, VectorFieldModel};
use crate::seed::derive_seed;

/// Noise for generated sample `i`: size from the histogram, then Gaussian
/// noise; both streams are derived from `(seed, i)` only.
fn noise_for(sizes: &SizeHistogram, k: usize, seed: u64, i: usize) -> crate::geometry::LatentGeometry {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2, i as u64));
    let n = sizes.sample(&mut rng);
    sample_noise(n, k, derive_seed(seed, 3, i as u64))
}

/// Sample `count` geometries: noise, ODE, decode. Returns each geometry with
/// its accepted-step count.
pub fn generate(
    model: &VectorFieldModel,
    sizes: &SizeHistogram,
    count: usize,
    solver: &SolverConfig,
    seed: u64,
) -> Result<Vec<(Geometry, usize)>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if sizes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    (0..count)
        .into_par_iter()
        .map(|i| {
            let z0 = noise_for(sizes, model.latent_k(), seed, i);
            let (z1, steps) = sample_ode(model, &z0, solver)?;
            Ok((model.decode(&z1)?, steps))
        })
        .collect()
}

/// Pairs `(z0, ODE(z0))` with the decoded endpoint checked against `valid`.
/// Returns the (unaligned) pairs and the accepted-step counts.
pub fn estimate_couplings<V>(
    model: &VectorFieldModel,
    sizes: &SizeHistogram,
    count: usize,
    solver: &SolverConfig,
    valid: &V,
    seed: u64,
) -> Result<(CouplingSet, Vec<usize>)>
where
    V: Fn(&Geometry) -> bool + Sync,
{
    if sizes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let results = (0..count)
        .into_par_iter()
        .map(|i| {
            let z0 = noise_for(sizes, model.latent_k(), seed, i);
            let (z1, steps) = sample_ode(model, &z0, solver)?;
            let ok = valid(&model.decode(&z1)?);
            let z1 = crate::geometry::project_zero_com(&z1);
            Ok((CouplingPair::new(z0, z1, PairSource::Estimated)?.with_valid(Some(ok)), steps))
        })
        .collect::<Result<Vec<_>>>()?;
    let (pairs, steps) = results.into_iter().unzip();
    Ok((CouplingSet::new(CostSpace::Latent, pairs), steps))
}

/// Independent pairs: encoded data samples with fresh noise of matching size.
pub fn random_couplings(model: &VectorFieldModel, dataset: &[Geometry], count: usize, sigma0: f64, seed: u64) -> Result<CouplingSet> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let pairs = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 4, i as u64));
            let g = &dataset[rng.random_range(0..dataset.len())];
            let z1 = model.encode(g, sigma0, rng.random())?;
            let z0 = sample_noise(g.n(), model.latent_k(), rng.random());
            CouplingPair::new(z0, z1, PairSource::Random)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CouplingSet::new(CostSpace::Latent, pairs))
}

/// Summary of one reflow round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub generated: usize,
    pub kept: usize,
    /// Fraction of generated endpoints that decode to valid geometries.
    pub validity_rate: f64,
    /// Cost of the retained estimated coupling.
    pub estimated: CostReport,
    /// Cost of an independent coupling with as many pairs.
    pub random: CostReport,
    pub mean_steps: f64,
    pub median_steps: f64,
}

#[derive(Clone, Debug)]
pub struct ReflowOutcome {
    pub model: VectorFieldModel,
    /// Aligned, retained pairs of the last round.
    pub coupling: CouplingSet,
    pub rounds: Vec<RoundReport>,
    pub losses: Vec<f64>,
}

pub fn mean_of(values: &[usize]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<usize>() as f64 / values.len() as f64
}

pub fn median_of(values: &[usize]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m] as f64
    } else {
        (v[m - 1] + v[m]) as f64 / 2.0
    }
}

/// Estimate couplings with the current model, optionally purify them, align
/// them, and fine-tune the same parameters on the result; repeated
/// `cfg.reflow_rounds` times.
pub fn reflow<V>(model: &VectorFieldModel, dataset: &[Geometry], cfg: &TrainConfig, valid: &V) -> Result<ReflowOutcome>
where
    V: Fn(&Geometry) -> bool + Sync,
{
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.reflow_rounds == 0 {
        return Err(Error::InvalidConfig("reflow needs at least one round".into()));
    }
    cfg.validate()?;
    let sizes = SizeHistogram::from_geometries(dataset);
    let count = cfg.reflow_pairs.unwrap_or(10 * dataset.len());
    let mode = OmtMode::Heuristic {
        max_iters: cfg.eval_omt_iters,
    };
    let mut model = model.clone();
    let mut rounds = Vec::new();
    let mut losses = Vec::new();
    let mut coupling = CouplingSet::new(CostSpace::Latent, Vec::new());
    for round in 0..cfg.reflow_rounds {
        let round_seed = derive_seed(cfg.seed, 40, round as u64);
        let (set, steps) = estimate_couplings(&model, &sizes, count, &cfg.solver, valid, round_seed)?;
        let generated = set.len();
        let validity_rate = set.validity_rate().unwrap_or(1.0);
        let kept: Vec<CouplingPair> = if cfg.purify {
            set.pairs.into_iter().filter(|p| p.valid == Some(true)).collect()
        } else {
            set.pairs
        };
        if kept.is_empty() {
            return Err(Error::PurificationRejectedAll);
        }
        let kept = CouplingSet::new(CostSpace::Latent, kept);
        let estimated = distribution_cost(&kept, cfg.lambda, mode)?;
        let random_set = random_couplings(&model, dataset, kept.len(), cfg.sigma0, derive_seed(round_seed, 5, 0))?;
        let random = distribution_cost(&random_set, cfg.lambda, mode)?;

        let aligned = kept
            .pairs
            .into_par_iter()
            .map(|p| p.align(cfg.lambda, cfg.omt_iters))
            .collect::<Result<Vec<_>>>()?;
        let aligned = CouplingSet::new(CostSpace::Latent, aligned);
        if cfg.fresh_reflow {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(round_seed, 6, 0));
            model.velocity = EgnnStack::init(model.arch.k + 1, model.arch.hidden, model.arch.flow_layers, model.arch.k, &mut rng);
        }
        losses.extend(fine_tune(&mut model, &aligned, cfg, cfg.reflow_steps, round_seed)?);
        rounds.push(RoundReport {
            round,
            generated,
            kept: aligned.len(),
            validity_rate,
            estimated,
            random,
            mean_steps: mean_of(&steps),
            median_steps: median_of(&steps),
        });
        coupling = aligned;
    }
    Ok(ReflowOutcome {
        model,
        coupling,
        rounds,
        losses,
    })
}
