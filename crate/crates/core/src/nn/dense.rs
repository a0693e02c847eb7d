//! Affine layers and SiLU multilayer perceptrons.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mat::{silu, silu_grad, Mat};
use super::Parameterized;

/// `y = x W^T + b` applied row-wise; `w` is `out x in`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: Mat,
    pub b: Vec<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Linear {
            w: Mat::zeros(output, input),
            b: vec![0.0; output],
        }
    }

    /// Uniform `+-gain/sqrt(fan_in)` weights, zero bias.
    pub fn init(input: usize, output: usize, gain: f64, rng: &mut impl Rng) -> Self {
        let bound = gain / (input.max(1) as f64).sqrt();
        let mut l = Linear::zeros(input, output);
        for w in &mut l.w.data {
            *w = rng.random_range(-bound..=bound);
        }
        l
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols
    }

    pub fn output_dim(&self) -> usize {
        self.w.rows
    }

    pub fn forward(&self, x: &Mat) -> Mat {
        assert_eq!(x.cols, self.input_dim(), "linear input width");
        let out = self.output_dim();
        let mut y = Mat::zeros(x.rows, out);
        for r in 0..x.rows {
            let xr = x.row(r);
            let yr = y.row_mut(r);
            for (o, y) in yr.iter_mut().enumerate() {
                let wr = self.w.row(o);
                let mut acc = self.b[o];
                for (a, b) in xr.iter().zip(wr) {
                    acc += a * b;
                }
                *y = acc;
            }
        }
        y
    }

    /// Accumulates parameter gradients into `grad` and returns the input gradient.
    pub fn backward(&self, x: &Mat, gy: &Mat, grad: &mut Linear) -> Mat {
        self.accumulate_param_grad(x, gy, grad);
        self.input_grad(gy)
    }

    pub fn accumulate_param_grad(&self, x: &Mat, gy: &Mat, grad: &mut Linear) {
        for r in 0..x.rows {
            let xr = x.row(r);
            for (o, &g) in gy.row(r).iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grad.b[o] += g;
                for (gw, a) in grad.w.row_mut(o).iter_mut().zip(xr) {
                    *gw += g * a;
                }
            }
        }
    }

    pub fn input_grad(&self, gy: &Mat) -> Mat {
        let mut gx = Mat::zeros(gy.rows, self.input_dim());
        for r in 0..gy.rows {
            let gxr = gx.row_mut(r);
            for (o, &g) in gy.row(r).iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                for (a, w) in gxr.iter_mut().zip(self.w.row(o)) {
                    *a += g * w;
                }
            }
        }
        gx
    }
}

impl Parameterized for Linear {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        f(&self.w.data);
        f(&self.b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        f(&mut self.w.data);
        f(&mut self.b);
    }
}

/// Linear layers with SiLU between them; the last layer is linear.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    pub layers: Vec<Linear>,
}

/// Intermediates of one [`DenseNet`] forward pass.
#[derive(Clone, Debug)]
pub struct DenseCache {
    /// Input of each layer.
    inputs: Vec<Mat>,
    /// Pre-activation output of each hidden layer.
    pre: Vec<Mat>,
}

impl DenseNet {
    /// `widths = [in, hidden..., out]`; `last_gain` scales the final layer's init.
    pub fn init(widths: &[usize], last_gain: f64, rng: &mut impl Rng) -> Self {
        assert!(widths.len() >= 2, "dense net needs at least one layer");
        let count = widths.len() - 1;
        let layers = (0..count)
            .map(|l| {
                let gain = if l + 1 == count { last_gain } else { 1.0 };
                Linear::init(widths[l], widths[l + 1], gain, rng)
            })
            .collect();
        DenseNet { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn forward(&self, x: &Mat) -> Mat {
        self.forward_cached(x).0
    }

    pub fn forward_cached(&self, x: &Mat) -> (Mat, DenseCache) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len() - 1);
        let mut cur = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let y = layer.forward(&cur);
            inputs.push(cur);
            if l + 1 == self.layers.len() {
                return (y, DenseCache { inputs, pre });
            }
            let mut act = y.clone();
            act.data.iter_mut().for_each(|v| *v = silu(*v));
            pre.push(y);
            cur = act;
        }
        unreachable!("dense net has at least one layer")
    }

    pub fn backward(&self, cache: &DenseCache, gy: &Mat, grad: &mut DenseNet) -> Mat {
        let mut g = gy.clone();
        for l in (0..self.layers.len()).rev() {
            let gx = self.layers[l].backward(&cache.inputs[l], &g, &mut grad.layers[l]);
            if l == 0 {
                return gx;
            }
            g = gx;
            for (gv, p) in g.data.iter_mut().zip(&cache.pre[l - 1].data) {
                *gv *= silu_grad(*p);
            }
        }
        unreachable!("dense net has at least one layer")
    }
}

impl Parameterized for DenseNet {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.layers.iter().for_each(|l| l.visit(f));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.layers.iter_mut().for_each(|l| l.visit_mut(f));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
        Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn single_layer_squared_error_closed_form() {
        // L = |W x - y|^2, dL/dW = 2 (W x - y) x^T, dL/db = 2 (W x - y).
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = Linear::init(4, 3, 1.0, &mut rng);
        let x = random_mat(1, 4, &mut rng);
        let y = random_mat(1, 3, &mut rng);
        let out = layer.forward(&x);
        let resid: Vec<f64> = out.data.iter().zip(&y.data).map(|(a, b)| a - b).collect();
        let gy = Mat::from_vec(1, 3, resid.iter().map(|r| 2.0 * r).collect());
        let mut grad = Linear::zeros(4, 3);
        layer.backward(&x, &gy, &mut grad);
        for o in 0..3 {
            assert!((grad.b[o] - 2.0 * resid[o]).abs() < 1e-9);
            for i in 0..4 {
                assert!((grad.w.get(o, i) - 2.0 * resid[o] * x.get(0, i)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_adjoint_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = DenseNet::init(&[3, 5, 2], 1.0, &mut rng);
        let x = random_mat(4, 3, &mut rng);
        let (_, cache) = net.forward_cached(&x);
        let mut grad = net.zeros_like();
        let gx = net.backward(&cache, &Mat::zeros(4, 2), &mut grad);
        assert!(grad.to_flat().iter().all(|g| *g == 0.0));
        assert!(gx.data.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn dense_net_passes_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = DenseNet::init(&[3, 6, 6, 2], 1.0, &mut rng);
        let x = random_mat(5, 3, &mut rng);
        let adj = random_mat(5, 2, &mut rng);
        let loss = |m: &DenseNet| -> f64 { m.forward(&x).data.iter().zip(&adj.data).map(|(a, b)| a * b).sum() };
        let (_, cache) = net.forward_cached(&x);
        let mut grad = net.zeros_like();
        net.backward(&cache, &adj, &mut grad);
        let report = grad_check(&net, loss, &grad);
        assert!(report.max_rel_error <= 1e-6, "{report:?}");
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = DenseNet::init(&[3, 4, 2], 1.0, &mut rng);
        let x = random_mat(2, 3, &mut rng);
        let adj = random_mat(2, 2, &mut rng);
        let (_, cache) = net.forward_cached(&x);
        let gx = net.backward(&cache, &adj, &mut net.zeros_like());
        let f = |x: &Mat| -> f64 { net.forward(x).data.iter().zip(&adj.data).map(|(a, b)| a * b).sum() };
        for idx in 0..x.data.len() {
            let mut p = x.clone();
            let mut m = x.clone();
            p.data[idx] += 1e-5;
            m.data[idx] -= 1e-5;
            let fd = (f(&p) - f(&m)) / 2e-5;
            assert!((fd - gx.data[idx]).abs() < 1e-8);
        }
    }
}
