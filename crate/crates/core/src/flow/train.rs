//! Flow-matching training on OMT-aligned pairs and autoencoder pre-training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fm_loss, sample_noise, CouplingPair, CouplingSet, PairSource, SolverConfig};
use crate::alignment::DEFAULT_LAMBDA;
use crate::data::ValidityRule;
use crate::error::{Error, Result};
use crate::geometry::{Geometry, PointSet};
use crate::nn::{adam_step, AdamState, EgnnStack, ModelArch, Parameterized, VectorFieldModel};
use crate::seed::derive_seed;

/// Every knob of the pipeline in one flat JSON object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda: f64,
    /// Optimizer steps of flow training.
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Anneal the learning rate to zero with a cosine over each training run.
    pub cosine_lr: bool,
    /// Encoder noise scale.
    pub sigma0: f64,
    /// Alignment passes per training pair (1 = single Hungarian + Kabsch pass).
    pub omt_iters: usize,
    /// `false` trains on unaligned independent pairs.
    pub use_omt: bool,
    pub seed: u64,

    pub latent_k: usize,
    pub hidden: usize,
    pub flow_layers: usize,
    pub decoder_layers: usize,
    pub identity_latent: bool,
    pub ae_steps: usize,
    pub ae_lr: f64,

    pub reflow_rounds: usize,
    pub purify: bool,
    /// Estimated pairs per reflow round; `None` means ten per training sample.
    pub reflow_pairs: Option<usize>,
    pub reflow_steps: usize,
    pub reflow_lr: Option<f64>,
    /// Re-initialize the velocity network before each reflow round.
    pub fresh_reflow: bool,
    /// Alignment passes used when measuring coupling costs.
    pub eval_omt_iters: usize,

    #[serde(flatten)]
    pub solver: SolverConfig,
    #[serde(flatten)]
    pub validity: ValidityRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: DEFAULT_LAMBDA,
            steps: 2000,
            batch_size: 32,
            lr: 1e-4,
            cosine_lr: false,
            sigma0: 0.01,
            omt_iters: 1,
            use_omt: true,
            seed: 0,
            latent_k: 2,
            hidden: 64,
            flow_layers: 3,
            decoder_layers: 3,
            identity_latent: false,
            ae_steps: 1000,
            ae_lr: 1e-3,
            reflow_rounds: 0,
            purify: true,
            reflow_pairs: None,
            reflow_steps: 500,
            reflow_lr: None,
            fresh_reflow: false,
            eval_omt_iters: 50,
            solver: SolverConfig::default(),
            validity: ValidityRule::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidConfig(format!("lambda = {} outside [0, 1]", self.lambda)));
        }
        if self.batch_size == 0 || !(self.lr > 0.0) || !(self.sigma0 >= 0.0) {
            return Err(Error::InvalidConfig("need batch_size >= 1, lr > 0, sigma0 >= 0".into()));
        }
        self.solver.validate()?;
        self.validity.validate()
    }

    pub fn arch(&self, d: usize) -> ModelArch {
        if self.identity_latent {
            ModelArch::identity(d, self.hidden, self.flow_layers)
        } else {
            ModelArch {
                decoder_layers: self.decoder_layers,
                ..ModelArch::new(d, self.latent_k, self.hidden, self.flow_layers)
            }
        }
    }

    /// Stable short hash of the serialized config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xCBF2_9CE4_8422_2325;
        for b in json.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01B3);
        }
        format!("{h:016x}")
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: VectorFieldModel,
    /// Mean batch loss per optimizer step.
    pub losses: Vec<f64>,
    pub ae_losses: Vec<f64>,
}

/// Encode, draw matching noise, align and evaluate the loss for one sample.
fn sample_gradient(model: &VectorFieldModel, g: &Geometry, cfg: &TrainConfig, seed: u64) -> Result<(f64, EgnnStack)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z1 = model.encode(g, cfg.sigma0, rng.random())?;
    let z0 = sample_noise(g.n(), model.latent_k(), rng.random());
    let pair = CouplingPair::new(z0, z1, PairSource::Random)?;
    let pair = if cfg.use_omt {
        pair.align(cfg.lambda, cfg.omt_iters)?
    } else {
        pair.assume_aligned()
    };
    let t: f64 = rng.random();
    let mut grad = model.velocity.zeros_like();
    let loss = fm_loss(model, &pair, t, Some((&mut grad, 1.0)))?;
    Ok((loss, grad))
}

fn scheduled_lr(cfg: &TrainConfig, base: f64, step: usize, steps: usize) -> f64 {
    if !cfg.cosine_lr || steps == 0 {
        return base;
    }
    0.5 * base * (1.0 + (std::f64::consts::PI * step as f64 / steps as f64).cos())
}

/// Reduce per-sample gradients in index order (deterministic) and take one Adam step.
fn apply_batch(model: &mut VectorFieldModel, results: Vec<(f64, EgnnStack)>, state: &mut AdamState, lr: f64) -> f64 {
    let b = results.len() as f64;
    let mut total = model.velocity.zeros_like();
    let mut loss = 0.0;
    for (l, g) in &results {
        loss += l;
        total.add_scaled(g, 1.0 / b);
    }
    let mut params = model.velocity.to_flat();
    adam_step(&mut params, &total.to_flat(), state, lr);
    model.velocity.load_flat(&params).expect("velocity shape");
    loss / b
}

/// Flow-matching training from a freshly initialized model (autoencoder
/// first unless in identity-latent mode).
pub fn train(dataset: &[Geometry], cfg: &TrainConfig) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cfg.validate()?;
    let d = dataset[0].feature_dim();
    let mut model = VectorFieldModel::init(cfg.arch(d), cfg.seed)?;
    let ae_losses = train_autoencoder(&mut model, dataset, cfg)?;
    let losses = train_flow(&mut model, dataset, cfg, cfg.steps)?;
    Ok(TrainOutcome {
        model,
        losses,
        ae_losses,
    })
}

/// Continue flow-matching training of `model` on fresh independent pairs.
pub fn train_flow(model: &mut VectorFieldModel, dataset: &[Geometry], cfg: &TrainConfig, steps: usize) -> Result<Vec<f64>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut state = AdamState::default();
    let mut losses = Vec::with_capacity(steps);
    let mut picker = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 10, 0));
    for step in 0..steps {
        let picks: Vec<usize> = (0..cfg.batch_size).map(|_| picker.random_range(0..dataset.len())).collect();
        let snapshot = &*model;
        let results = picks
            .par_iter()
            .enumerate()
            .map(|(b, &idx)| sample_gradient(snapshot, &dataset[idx], cfg, derive_seed(cfg.seed, 11 + step as u64, b as u64)))
            .collect::<Result<Vec<_>>>()?;
        losses.push(apply_batch(model, results, &mut state, scheduled_lr(cfg, cfg.lr, step, steps)));
    }
    Ok(losses)
}

/// Fine-tune the velocity network on an aligned coupling set.
pub fn fine_tune(model: &mut VectorFieldModel, set: &CouplingSet, cfg: &TrainConfig, steps: usize, seed: u64) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(Error::EmptyCoupling);
    }
    let lr = cfg.reflow_lr.unwrap_or(cfg.lr);
    let mut state = AdamState::default();
    let mut picker = ChaCha8Rng::seed_from_u64(derive_seed(seed, 20, 0));
    let mut losses = Vec::with_capacity(steps);
    for step in 0..steps {
        let picks: Vec<(usize, f64)> = (0..cfg.batch_size)
            .map(|_| (picker.random_range(0..set.len()), picker.random()))
            .collect();
        let snapshot = &*model;
        let results = picks
            .par_iter()
            .map(|&(idx, t)| {
                let mut grad = snapshot.velocity.zeros_like();
                let loss = fm_loss(snapshot, &set.pairs[idx], t, Some((&mut grad, 1.0)))?;
                Ok((loss, grad))
            })
            .collect::<Result<Vec<_>>>()?;
        losses.push(apply_batch(model, results, &mut state, scheduled_lr(cfg, lr, step, steps)));
    }
    Ok(losses)
}

/// Reconstruction training of the encoder/decoder. No-op in identity mode.
pub fn train_autoencoder(model: &mut VectorFieldModel, dataset: &[Geometry], cfg: &TrainConfig) -> Result<Vec<f64>> {
    if model.encoder.is_none() || cfg.ae_steps == 0 {
        return Ok(Vec::new());
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut state = AdamState::default();
    let mut picker = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 30, 0));
    let mut losses = Vec::with_capacity(cfg.ae_steps);
    for step in 0..cfg.ae_steps {
        let picks: Vec<usize> = (0..cfg.batch_size).map(|_| picker.random_range(0..dataset.len())).collect();
        let snapshot = &*model;
        let results = picks
            .par_iter()
            .enumerate()
            .map(|(b, &idx)| {
                let enc = snapshot.encoder.as_ref().expect("encoder present");
                let dec = snapshot.decoder.as_ref().expect("decoder present");
                let mut ge = enc.zeros_like();
                let mut gd = dec.zeros_like();
                let (c, f) = snapshot.autoencoder_loss(
                    &dataset[idx],
                    cfg.sigma0,
                    derive_seed(cfg.seed, 31 + step as u64, b as u64),
                    Some((&mut ge, &mut gd)),
                )?;
                Ok((c + f, ge, gd))
            })
            .collect::<Result<Vec<_>>>()?;

        let enc = model.encoder.as_mut().expect("encoder present");
        let dec = model.decoder.as_mut().expect("decoder present");
        let b = results.len() as f64;
        let mut ge_total = enc.zeros_like();
        let mut gd_total = dec.zeros_like();
        let mut loss = 0.0;
        for (l, ge, gd) in &results {
            loss += l / b;
            ge_total.add_scaled(ge, 1.0 / b);
            gd_total.add_scaled(gd, 1.0 / b);
        }
        let mut params = enc.to_flat();
        let split = params.len();
        params.extend(dec.to_flat());
        let mut grads = ge_total.to_flat();
        grads.extend(gd_total.to_flat());
        adam_step(&mut params, &grads, &mut state, cfg.ae_lr);
        enc.load_flat(&params[..split])?;
        dec.load_flat(&params[split..])?;
        losses.push(loss);
    }
    Ok(losses)
}
