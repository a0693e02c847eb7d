//! Velocity field, encoder and decoder built from equivariant layers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dense::Linear;
use super::egnn::{EquivariantLayer, LayerCache};
use super::mat::Mat;
use super::Parameterized;
use crate::error::{Error, Result};
use crate::geometry::{center_coords, com_max_abs, project_zero_com, Geometry, LatentGeometry, PointSet, Vec3};

/// Feature embedding, a stack of equivariant layers and a feature head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgnnStack {
    pub embed: Linear,
    pub layers: Vec<EquivariantLayer>,
    pub head: Linear,
}

/// Intermediates of one [`EgnnStack`] forward pass.
#[derive(Clone, Debug)]
pub struct StackCache {
    input: Mat,
    layers: Vec<LayerCache>,
    head_input: Mat,
}

impl EgnnStack {
    pub fn init(input: usize, hidden: usize, layers: usize, output: usize, rng: &mut impl Rng) -> Self {
        EgnnStack {
            embed: Linear::init(input, hidden, 1.0, rng),
            layers: (0..layers).map(|_| EquivariantLayer::init(hidden, hidden, hidden, rng)).collect(),
            head: Linear::init(hidden, output, 1.0, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.embed.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.head.output_dim()
    }

    pub fn forward(&self, x: &[Vec3], h: &Mat) -> (Vec<Vec3>, Mat) {
        let (x, h, _) = self.forward_cached(x, h);
        (x, h)
    }

    /// Coordinates and features after every layer (for layer-wise checks).
    pub fn trace(&self, x: &[Vec3], h: &Mat) -> Vec<(Vec<Vec3>, Mat)> {
        let mut cur_x = x.to_vec();
        let mut cur_h = self.embed.forward(h);
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (nx, nh) = layer.forward(&cur_x, &cur_h);
            out.push((nx.clone(), nh.clone()));
            cur_x = nx;
            cur_h = nh;
        }
        out
    }

    pub fn forward_cached(&self, x: &[Vec3], h: &Mat) -> (Vec<Vec3>, Mat, StackCache) {
        let mut cur_h = self.embed.forward(h);
        let mut cur_x = x.to_vec();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (nx, nh, c) = layer.forward_cached(&cur_x, &cur_h);
            caches.push(c);
            cur_x = nx;
            cur_h = nh;
        }
        let out = self.head.forward(&cur_h);
        let cache = StackCache {
            input: h.clone(),
            layers: caches,
            head_input: cur_h,
        };
        (cur_x, out, cache)
    }

    /// Accumulates parameter gradients; returns gradients of the input
    /// coordinates and input features.
    pub fn backward(&self, cache: &StackCache, gx: &[Vec3], g_out: &Mat, grad: &mut EgnnStack) -> (Vec<Vec3>, Mat) {
        let mut gh = self.head.backward(&cache.head_input, g_out, &mut grad.head);
        let mut gx = gx.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let (nx, nh) = layer.backward(&cache.layers[l], &gx, &gh, &mut grad.layers[l]);
            gx = nx;
            gh = nh;
        }
        let g_in = self.embed.backward(&cache.input, &gh, &mut grad.embed);
        (gx, g_in)
    }
}

impl Parameterized for EgnnStack {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.embed.visit(f);
        self.layers.iter().for_each(|l| l.visit(f));
        self.head.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.embed.visit_mut(f);
        self.layers.iter_mut().for_each(|l| l.visit_mut(f));
        self.head.visit_mut(f);
    }
}

/// Architecture hyperparameters; stored in checkpoint headers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelArch {
    /// Data feature width.
    pub d: usize,
    /// Latent feature width (`k = d` in identity-latent mode).
    pub k: usize,
    pub hidden: usize,
    pub flow_layers: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    /// Replace the encoder and decoder with the identity.
    pub identity_latent: bool,
}

impl ModelArch {
    pub fn new(d: usize, k: usize, hidden: usize, flow_layers: usize) -> Self {
        ModelArch {
            d,
            k,
            hidden,
            flow_layers,
            encoder_layers: 1,
            decoder_layers: flow_layers,
            identity_latent: false,
        }
    }

    pub fn identity(d: usize, hidden: usize, flow_layers: usize) -> Self {
        ModelArch {
            identity_latent: true,
            decoder_layers: 0,
            encoder_layers: 0,
            ..ModelArch::new(d, d, hidden, flow_layers)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 || self.hidden == 0 {
            return Err(Error::InvalidConfig("d, k and hidden must be positive".into()));
        }
        if self.identity_latent && self.k != self.d {
            return Err(Error::InvalidConfig(format!("identity latent needs k = d, got k = {} d = {}", self.k, self.d)));
        }
        Ok(())
    }
}

/// Velocity network `v(z, t)` with an optional latent autoencoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorFieldModel {
    pub arch: ModelArch,
    pub velocity: EgnnStack,
    pub encoder: Option<EgnnStack>,
    pub decoder: Option<EgnnStack>,
}

/// Records one velocity forward pass for a later backward call.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    cache: Option<StackCache>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn is_recorded(&self) -> bool {
        self.cache.is_some()
    }

    pub fn clear(&mut self) {
        self.cache = None;
    }
}

/// Inputs already centered to roundoff pass through bit-unchanged.
fn recenter(x: &[Vec3]) -> Vec<Vec3> {
    if com_max_abs(x) <= 1e-12 {
        x.to_vec()
    } else {
        center_coords(x)
    }
}

fn with_time(features: &[Vec<f64>], t: f64) -> Mat {
    let k = features.first().map_or(0, Vec::len);
    let mut m = Mat::zeros(features.len(), k + 1);
    for (r, row) in features.iter().enumerate() {
        let out = m.row_mut(r);
        out[..k].copy_from_slice(row);
        out[k] = t;
    }
    m
}

fn softmax_rows(logits: &Mat) -> Vec<Vec<f64>> {
    (0..logits.rows)
        .map(|r| {
            let row = logits.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

/// Reconstruction loss of one geometry and its gradient w.r.t. the decoder outputs.
fn reconstruction_loss(target: &Geometry, x: &[Vec3], logits: &Mat) -> (f64, f64, Vec<Vec3>, Mat) {
    let n = x.len();
    let coord_count = (3 * n) as f64;
    let mut coord_loss = 0.0;
    let mut gx = vec![[0.0; 3]; n];
    for i in 0..n {
        for a in 0..3 {
            let r = x[i][a] - target.coords()[i][a];
            coord_loss += r * r / coord_count;
            gx[i][a] = 2.0 * r / coord_count;
        }
    }
    let probs = softmax_rows(logits);
    let mut ce = 0.0;
    let mut g_logits = Mat::zeros(logits.rows, logits.cols);
    for (i, p) in probs.iter().enumerate() {
        let y = &target.features()[i];
        let ysum: f64 = y.iter().sum();
        for (c, (&pc, &yc)) in p.iter().zip(y).enumerate() {
            ce -= yc * pc.max(1e-300).ln() / n as f64;
            g_logits.set(i, c, (ysum * pc - yc) / n as f64);
        }
    }
    (coord_loss, ce, gx, g_logits)
}

impl VectorFieldModel {
    pub fn init(arch: ModelArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let velocity = EgnnStack::init(arch.k + 1, arch.hidden, arch.flow_layers, arch.k, &mut rng);
        let (encoder, decoder) = if arch.identity_latent {
            (None, None)
        } else {
            (
                Some(EgnnStack::init(arch.d, arch.hidden, arch.encoder_layers, arch.k, &mut rng)),
                Some(EgnnStack::init(arch.k, arch.hidden, arch.decoder_layers, arch.d, &mut rng)),
            )
        };
        Ok(VectorFieldModel {
            arch,
            velocity,
            encoder,
            decoder,
        })
    }

    pub fn latent_k(&self) -> usize {
        self.arch.k
    }

    pub fn is_identity_latent(&self) -> bool {
        self.arch.identity_latent
    }

    fn check_latent(&self, z: &LatentGeometry) -> Result<()> {
        if z.feature_dim() != self.arch.k {
            return Err(Error::ShapeMismatch(format!("latent width {} for a model with k = {}", z.feature_dim(), self.arch.k)));
        }
        Ok(())
    }

    /// `v(z, t)`; the coordinate part is zero-CoM.
    pub fn forward(&self, z: &LatentGeometry, t: f64) -> Result<LatentGeometry> {
        self.check_latent(z)?;
        let (x, h) = self.velocity.forward(z.coords(), &with_time(z.features(), t));
        Ok(self.velocity_from(z, x, h))
    }

    fn velocity_from(&self, z: &LatentGeometry, x: Vec<Vec3>, h: Mat) -> LatentGeometry {
        let vx = x.iter().zip(z.coords()).map(|(a, b)| [a[0] - b[0], a[1] - b[1], a[2] - b[2]]).collect();
        z.with_rows(vx, h.to_rows())
    }

    /// Forward pass that records intermediates on `tape`.
    pub fn forward_recorded(&self, z: &LatentGeometry, t: f64, tape: &mut Tape) -> Result<LatentGeometry> {
        self.check_latent(z)?;
        let (x, h, cache) = self.velocity.forward_cached(z.coords(), &with_time(z.features(), t));
        tape.cache = Some(cache);
        Ok(self.velocity_from(z, x, h))
    }

    /// Adds `d<adjoint, v>/d(params)` into `grad` using the pass recorded on `tape`.
    pub fn backward(&self, tape: &Tape, adjoint: &LatentGeometry, grad: &mut EgnnStack) -> Result<()> {
        let cache = tape.cache.as_ref().ok_or(Error::MissingCache)?;
        self.check_latent(adjoint)?;
        let g_out = Mat::from_rows(adjoint.features(), self.arch.k);
        self.velocity.backward(cache, adjoint.coords(), &g_out, grad);
        Ok(())
    }

    /// Latent mean of a geometry: centered input through the encoder.
    pub fn encode_mean(&self, g: &Geometry) -> Result<LatentGeometry> {
        if g.feature_dim() != self.arch.d {
            return Err(Error::ShapeMismatch(format!("feature width {} for a model with d = {}", g.feature_dim(), self.arch.d)));
        }
        let x = recenter(g.coords());
        match &self.encoder {
            None => LatentGeometry::new(x, g.features().to_vec()),
            Some(enc) => {
                let (mx, mh) = enc.forward(&x, &Mat::from_rows(g.features(), self.arch.d));
                LatentGeometry::new(mx, mh.to_rows())
            }
        }
    }

    /// Encoder mean plus zero-CoM Gaussian noise of scale `sigma0`.
    /// Identity-latent models return the centered input unchanged.
    pub fn encode(&self, g: &Geometry, sigma0: f64, seed: u64) -> Result<LatentGeometry> {
        let mean = self.encode_mean(g)?;
        if self.encoder.is_none() || sigma0 == 0.0 {
            return Ok(mean);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise_x: Vec<Vec3> = (0..mean.n())
            .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)])
            .collect();
        let noise_x = center_coords(&noise_x);
        let x = mean
            .coords()
            .iter()
            .zip(&noise_x)
            .map(|(m, e)| [m[0] + sigma0 * e[0], m[1] + sigma0 * e[1], m[2] + sigma0 * e[2]])
            .collect();
        let h = mean
            .features()
            .iter()
            .map(|row| row.iter().map(|m| m + sigma0 * rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        LatentGeometry::new(x, h)
    }

    /// Decoder logits (features before softmax).
    pub fn decode_logits(&self, z: &LatentGeometry) -> Result<(Vec<Vec3>, Mat)> {
        self.check_latent(z)?;
        match &self.decoder {
            None => Ok((z.coords().to_vec(), Mat::from_rows(z.features(), self.arch.k))),
            Some(dec) => Ok(dec.forward(z.coords(), &Mat::from_rows(z.features(), self.arch.k))),
        }
    }

    /// Back to data space; features are softmax probabilities (identity mode: raw).
    pub fn decode(&self, z: &LatentGeometry) -> Result<Geometry> {
        let (x, logits) = self.decode_logits(z)?;
        if self.decoder.is_none() {
            return Geometry::new(x, logits.to_rows(), None);
        }
        let centered = project_zero_com(&LatentGeometry::new(x, softmax_rows(&logits))?);
        Ok(Geometry::from(centered))
    }

    /// Reconstruction loss (coordinate MSE + feature cross-entropy) of one
    /// geometry, accumulating encoder and decoder gradients. Returns
    /// `(coord_loss, feature_loss)`. Identity-latent models return zeros.
    pub fn autoencoder_loss(
        &self,
        g: &Geometry,
        sigma0: f64,
        seed: u64,
        grad: Option<(&mut EgnnStack, &mut EgnnStack)>,
    ) -> Result<(f64, f64)> {
        let (Some(enc), Some(dec)) = (&self.encoder, &self.decoder) else {
            return Ok((0.0, 0.0));
        };
        let target = Geometry::new(recenter(g.coords()), g.features().to_vec(), None)?;
        let h_in = Mat::from_rows(target.features(), self.arch.d);
        let (mx, mh, enc_cache) = enc.forward_cached(target.coords(), &h_in);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut zx = mx.clone();
        let mut zh = mh.clone();
        if sigma0 > 0.0 {
            let noise: Vec<Vec3> = (0..zx.len())
                .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)])
                .collect();
            for (p, e) in zx.iter_mut().zip(center_coords(&noise)) {
                for a in 0..3 {
                    p[a] += sigma0 * e[a];
                }
            }
            for v in &mut zh.data {
                *v += sigma0 * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let (x, logits, dec_cache) = dec.forward_cached(&zx, &zh);
        let (coord_loss, ce, gx, g_logits) = reconstruction_loss(&target, &x, &logits);
        if let Some((g_enc, g_dec)) = grad {
            let (gzx, gzh) = dec.backward(&dec_cache, &gx, &g_logits, g_dec);
            enc.backward(&enc_cache, &gzx, &gzh, g_enc);
        }
        Ok((coord_loss, ce))
    }
}

impl Parameterized for VectorFieldModel {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.velocity.visit(f);
        if let Some(e) = &self.encoder {
            e.visit(f);
        }
        if let Some(d) = &self.decoder {
            d.visit(f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.velocity.visit_mut(f);
        if let Some(e) = &mut self.encoder {
            e.visit_mut(f);
        }
        if let Some(d) = &mut self.decoder {
            d.visit_mut(f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_permutation, apply_rigid, random_rotation, Permutation, Rotation, Translation};
    use crate::nn::gradcheck::grad_check;

    fn random_latent(n: usize, k: usize, rng: &mut ChaCha8Rng) -> LatentGeometry {
        let x: Vec<Vec3> = (0..n)
            .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)])
            .collect();
        let h = (0..n).map(|_| (0..k).map(|_| rng.sample(StandardNormal)).collect()).collect();
        LatentGeometry::new(center_coords(&x), h).unwrap()
    }

    fn one_hot_geometry(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Geometry {
        let x: Vec<Vec3> = (0..n)
            .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)])
            .collect();
        let h = (0..n)
            .map(|_| {
                let c = rng.random_range(0..d);
                (0..d).map(|j| if j == c { 1.0 } else { 0.0 }).collect()
            })
            .collect();
        Geometry::new(center_coords(&x), h, None).unwrap()
    }

    fn max_abs_diff(a: &LatentGeometry, b: &LatentGeometry) -> (f64, f64) {
        let dx = a.coords().iter().flatten().zip(b.coords().iter().flatten()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let dh = a.features().iter().flatten().zip(b.features().iter().flatten()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        (dx, dh)
    }

    #[test]
    fn zero_parameters_give_zero_velocity() {
        let mut model = VectorFieldModel::init(ModelArch::new(3, 2, 8, 2), 0).unwrap();
        model.fill(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = model.forward(&random_latent(5, 2, &mut rng), 0.3).unwrap();
        assert!(v.to_flat().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn velocity_is_equivariant_and_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for seed in 0..5 {
            let model = VectorFieldModel::init(ModelArch::new(3, 2, 12, 3), seed).unwrap();
            let z = random_latent(6, 2, &mut rng);
            let t = rng.random::<f64>();
            let v = model.forward(&z, t).unwrap();
            assert!(com_max_abs(v.coords()) <= 1e-9);

            let r = random_rotation(seed + 100);
            let vr = model.forward(&apply_rigid(&z, &r, &Translation::default()), t).unwrap();
            let expected = apply_rigid(&v, &r, &Translation::default());
            let (dx, dh) = max_abs_diff(&vr, &expected);
            assert!(dx <= 1e-7 && dh <= 1e-7, "{dx} {dh}");

            let p = Permutation::random(6, &mut rng);
            let vp = model.forward(&apply_permutation(&z, &p).unwrap(), t).unwrap();
            assert_eq!(vp, apply_permutation(&v, &p).unwrap());
        }
    }

    #[test]
    fn every_layer_keeps_zero_com() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = VectorFieldModel::init(ModelArch::new(3, 2, 8, 4), 9).unwrap();
        let z = random_latent(7, 2, &mut rng);
        for (x, _) in model.velocity.trace(z.coords(), &with_time(z.features(), 0.5)) {
            assert!(com_max_abs(&x) <= 1e-9);
        }
    }

    #[test]
    fn single_atom_has_no_coordinate_velocity() {
        let model = VectorFieldModel::init(ModelArch::new(3, 2, 8, 2), 3).unwrap();
        let z = LatentGeometry::new(vec![[0.0; 3]], vec![vec![0.5, -0.5]]).unwrap();
        let v = model.forward(&z, 0.1).unwrap();
        assert_eq!(v.coords(), &[[0.0; 3]]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = VectorFieldModel::init(ModelArch::new(3, 2, 8, 2), 4).unwrap();
        let z = random_latent(5, 2, &mut rng);
        let adjoint = random_latent(5, 2, &mut rng);
        let t = 0.37;
        let dot = |v: &LatentGeometry| v.to_flat().iter().zip(adjoint.to_flat()).map(|(a, b)| a * b).sum::<f64>();
        let mut tape = Tape::new();
        model.forward_recorded(&z, t, &mut tape).unwrap();
        let mut grad = model.velocity.zeros_like();
        model.backward(&tape, &adjoint, &mut grad).unwrap();
        let loss = |stack: &EgnnStack| {
            let mut m = model.clone();
            m.velocity = stack.clone();
            dot(&m.forward(&z, t).unwrap())
        };
        let report = grad_check(&model.velocity, loss, &grad);
        assert!(report.max_rel_error <= 1e-4, "{report:?}");
    }

    #[test]
    fn backward_without_forward_is_an_error() {
        let model = VectorFieldModel::init(ModelArch::new(3, 2, 8, 1), 0).unwrap();
        let adjoint = LatentGeometry::new(vec![[0.0; 3]], vec![vec![0.0, 0.0]]).unwrap();
        let err = model.backward(&Tape::new(), &adjoint, &mut model.velocity.zeros_like());
        assert!(matches!(err, Err(Error::MissingCache)));
    }

    #[test]
    fn zero_adjoint_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = VectorFieldModel::init(ModelArch::new(3, 2, 8, 2), 5).unwrap();
        let z = random_latent(4, 2, &mut rng);
        let mut tape = Tape::new();
        model.forward_recorded(&z, 0.5, &mut tape).unwrap();
        let mut grad = model.velocity.zeros_like();
        let zero = LatentGeometry::new(vec![[0.0; 3]; 4], vec![vec![0.0; 2]; 4]).unwrap();
        model.backward(&tape, &zero, &mut grad).unwrap();
        assert!(grad.to_flat().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn encode_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let model = VectorFieldModel::init(ModelArch::new(4, 2, 8, 1), 6).unwrap();
        for _ in 0..100 {
            let g = one_hot_geometry(rng.random_range(2..9), 4, &mut rng);
            let shifted = apply_rigid(&g, &Rotation::identity(), &Translation([3.0, -1.0, 2.0]));
            let z = model.encode(&shifted, 0.01, 11).unwrap();
            assert!(com_max_abs(z.coords()) <= 1e-9);
        }
        let g = one_hot_geometry(5, 4, &mut rng);
        assert_eq!(model.encode(&g, 0.0, 1).unwrap(), model.encode_mean(&g).unwrap());
        assert_eq!(model.encode(&g, 0.1, 1).unwrap(), model.encode(&g, 0.1, 1).unwrap());
        assert_ne!(model.encode(&g, 0.1, 1).unwrap(), model.encode(&g, 0.1, 2).unwrap());
    }

    #[test]
    fn decode_is_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = VectorFieldModel::init(ModelArch::new(4, 2, 8, 2), 7).unwrap();
        let z = random_latent(6, 2, &mut rng);
        let r = random_rotation(3);
        let a = LatentGeometry::from(model.decode(&apply_rigid(&z, &r, &Translation::default())).unwrap());
        let b = apply_rigid(&LatentGeometry::from(model.decode(&z).unwrap()), &r, &Translation::default());
        let (dx, dh) = max_abs_diff(&a, &b);
        assert!(dx <= 1e-7 && dh <= 1e-7);
        let g = model.decode(&z).unwrap();
        assert!(com_max_abs(g.coords()) <= 1e-9);
        assert_eq!(g.feature_dim(), 4);
    }

    #[test]
    fn identity_latent_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = VectorFieldModel::init(ModelArch::identity(4, 8, 2), 8).unwrap();
        let g = one_hot_geometry(6, 4, &mut rng);
        let z = model.encode(&g, 0.5, 3).unwrap();
        assert_eq!(model.decode(&z).unwrap(), g);
    }

    #[test]
    fn autoencoder_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = VectorFieldModel::init(ModelArch::new(3, 2, 6, 1), 9).unwrap();
        let g = one_hot_geometry(4, 3, &mut rng);
        let enc = model.encoder.clone().unwrap();
        let dec = model.decoder.clone().unwrap();
        let mut g_enc = enc.zeros_like();
        let mut g_dec = dec.zeros_like();
        model.autoencoder_loss(&g, 0.05, 1, Some((&mut g_enc, &mut g_dec))).unwrap();

        let loss_with = |e: &EgnnStack, d: &EgnnStack| {
            let mut m = model.clone();
            m.encoder = Some(e.clone());
            m.decoder = Some(d.clone());
            let (a, b) = m.autoencoder_loss(&g, 0.05, 1, None).unwrap();
            a + b
        };
        let enc_report = grad_check(&enc, |e| loss_with(e, &dec), &g_enc);
        let dec_report = grad_check(&dec, |d| loss_with(&enc, d), &g_dec);
        assert!(enc_report.max_rel_error <= 1e-4, "{enc_report:?}");
        assert!(dec_report.max_rel_error <= 1e-4, "{dec_report:?}");
    }
}
