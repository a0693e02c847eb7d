//! E(3)-equivariant message-passing layer on a fully connected graph.
//!
//! ```text
//! m_ij  = edge_net(h_i, h_j, |x_i - x_j|^2)
//! dx_i  = 1/(n-1) sum_{j != i} (x_i - x_j) coord_net(m_ij)
//! x_i' = x_i + dx_i - mean_k dx_k
//! h_i' = node_net(h_i, sum_{j != i} m_ij)
//! ```
//!
//! Subtracting the mean update keeps the coordinate channel at zero CoM
//! (coord_net is not symmetric in i, j, so the raw update can drift).

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dense::{DenseCache, DenseNet, Linear};
use super::mat::{canonical_sum, silu, silu_grad, Mat};
use super::Parameterized;
use crate::geometry::{sub3, Vec3};

/// Init gain of the last coord_net layer; starts the coordinate update near zero.
pub const COORD_INIT_GAIN: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivariantLayer {
    /// First edge layer on `[h_i, h_j, d_ij^2]`, evaluated in factored form.
    pub edge_in: Linear,
    /// Remaining edge layers, applied after a SiLU.
    pub edge_out: DenseNet,
    pub coord_net: DenseNet,
    pub node_net: DenseNet,
}

/// Intermediates of one [`EquivariantLayer`] forward pass.
#[derive(Clone, Debug)]
pub struct LayerCache {
    x: Vec<Vec3>,
    h: Mat,
    edge_pre: Mat,
    d2: Vec<f64>,
    edge_out: DenseCache,
    coord: DenseCache,
    weights: Vec<f64>,
    node: DenseCache,
}

fn edges(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
}

impl EquivariantLayer {
    pub fn init(features: usize, hidden: usize, out_features: usize, rng: &mut impl Rng) -> Self {
        EquivariantLayer {
            edge_in: Linear::init(2 * features + 1, hidden, 1.0, rng),
            edge_out: DenseNet::init(&[hidden, hidden], 1.0, rng),
            coord_net: DenseNet::init(&[hidden, hidden, 1], COORD_INIT_GAIN, rng),
            node_net: DenseNet::init(&[features + hidden, hidden, out_features], 1.0, rng),
        }
    }

    pub fn feature_dim(&self) -> usize {
        (self.edge_in.input_dim() - 1) / 2
    }

    pub fn output_dim(&self) -> usize {
        self.node_net.output_dim()
    }

    pub fn forward(&self, x: &[Vec3], h: &Mat) -> (Vec<Vec3>, Mat) {
        let (x2, h2, _) = self.forward_cached(x, h);
        (x2, h2)
    }

    pub fn forward_cached(&self, x: &[Vec3], h: &Mat) -> (Vec<Vec3>, Mat, LayerCache) {
        let n = x.len();
        let f = self.feature_dim();
        assert_eq!(h.rows, n, "feature rows");
        assert_eq!(h.cols, f, "feature width");
        let hidden = self.edge_in.output_dim();
        let num_edges = n * n.saturating_sub(1);

        // First edge layer: W [h_i, h_j, d2] + b = A h_i + B h_j + w_d d2 + b.
        let mut a = Mat::zeros(n, hidden);
        let mut b = Mat::zeros(n, hidden);
        for i in 0..n {
            let hi = h.row(i);
            for c in 0..hidden {
                let w = self.edge_in.w.row(c);
                a.set(i, c, hi.iter().zip(&w[..f]).map(|(p, q)| p * q).sum());
                b.set(i, c, hi.iter().zip(&w[f..2 * f]).map(|(p, q)| p * q).sum());
            }
        }
        let mut edge_pre = Mat::zeros(num_edges, hidden);
        let mut d2 = Vec::with_capacity(num_edges);
        for (e, (i, j)) in edges(n).enumerate() {
            let diff = sub3(x[i], x[j]);
            let dist = diff[0] * diff[0] + diff[1] * diff[1] + diff[2] * diff[2];
            d2.push(dist);
            let (ai, bj) = (a.row(i), b.row(j));
            for (c, out) in edge_pre.row_mut(e).iter_mut().enumerate() {
                *out = self.edge_in.b[c] + ai[c] + bj[c] + self.edge_in.w.get(c, 2 * f) * dist;
            }
        }
        let mut act = edge_pre.clone();
        act.data.iter_mut().for_each(|v| *v = silu(*v));
        let (messages, edge_out) = self.edge_out.forward_cached(&act);
        let (w, coord) = self.coord_net.forward_cached(&messages);
        let weights = w.data;

        // Coordinate update; per-node sums in canonical order keep permutations exact.
        let mut x_new = x.to_vec();
        if n > 1 {
            let scale = 1.0 / (n - 1) as f64;
            let mut terms = vec![0.0; n - 1];
            let mut dx = vec![[0.0; 3]; n];
            for (i, dxi) in dx.iter_mut().enumerate() {
                for (axis, slot) in dxi.iter_mut().enumerate() {
                    for (k, j) in (0..n).filter(|&j| j != i).enumerate() {
                        let e = i * (n - 1) + k;
                        terms[k] = (x[i][axis] - x[j][axis]) * weights[e];
                    }
                    *slot = scale * canonical_sum(&mut terms);
                }
            }
            let mut col = vec![0.0; n];
            let mut mean = [0.0; 3];
            for (axis, m) in mean.iter_mut().enumerate() {
                for (i, v) in col.iter_mut().enumerate() {
                    *v = dx[i][axis];
                }
                *m = canonical_sum(&mut col) / n as f64;
            }
            for (xi, dxi) in x_new.iter_mut().zip(&dx) {
                for axis in 0..3 {
                    xi[axis] += dxi[axis] - mean[axis];
                }
            }
        }

        let mut agg = Mat::zeros(n, hidden);
        if n > 1 {
            let mut terms = vec![0.0; n - 1];
            for i in 0..n {
                for c in 0..hidden {
                    for (k, t) in terms.iter_mut().enumerate() {
                        *t = messages.get(i * (n - 1) + k, c);
                    }
                    agg.set(i, c, canonical_sum(&mut terms));
                }
            }
        }
        let (h_new, node) = self.node_net.forward_cached(&h.hcat(&agg));

        let cache = LayerCache {
            x: x.to_vec(),
            h: h.clone(),
            edge_pre,
            d2,
            edge_out,
            coord,
            weights,
            node,
        };
        (x_new, h_new, cache)
    }

    /// Accumulates parameter gradients and returns `(dL/dx, dL/dh)`.
    pub fn backward(&self, cache: &LayerCache, gx_out: &[Vec3], gh_out: &Mat, grad: &mut EquivariantLayer) -> (Vec<Vec3>, Mat) {
        let x = &cache.x;
        let n = x.len();
        let f = self.feature_dim();
        let hidden = self.edge_in.output_dim();

        let g_node_in = self.node_net.backward(&cache.node, gh_out, &mut grad.node_net);
        let (mut gh, g_agg) = g_node_in.hsplit(f);
        let mut gx: Vec<Vec3> = gx_out.to_vec();
        if n < 2 {
            return (gx, gh);
        }

        let num_edges = n * (n - 1);
        let mut g_msg = Mat::zeros(num_edges, hidden);
        for (e, (i, _)) in edges(n).enumerate() {
            g_msg.row_mut(e).copy_from_slice(g_agg.row(i));
        }

        // x' = x + dx - mean(dx)  =>  g_dx = g_out - mean(g_out).
        let mut g_mean = [0.0; 3];
        for g in gx_out {
            for axis in 0..3 {
                g_mean[axis] += g[axis] / n as f64;
            }
        }
        let scale = 1.0 / (n - 1) as f64;
        let mut g_w = Mat::zeros(num_edges, 1);
        for (e, (i, j)) in edges(n).enumerate() {
            let diff = sub3(x[i], x[j]);
            let g_dx = [gx_out[i][0] - g_mean[0], gx_out[i][1] - g_mean[1], gx_out[i][2] - g_mean[2]];
            g_w.data[e] = scale * (diff[0] * g_dx[0] + diff[1] * g_dx[1] + diff[2] * g_dx[2]);
            let w = scale * cache.weights[e];
            for axis in 0..3 {
                gx[i][axis] += w * g_dx[axis];
                gx[j][axis] -= w * g_dx[axis];
            }
        }
        g_msg.add_assign(&self.coord_net.backward(&cache.coord, &g_w, &mut grad.coord_net));

        let mut g_pre = self.edge_out.backward(&cache.edge_out, &g_msg, &mut grad.edge_out);
        for (g, p) in g_pre.data.iter_mut().zip(&cache.edge_pre.data) {
            *g *= silu_grad(*p);
        }

        let mut g_a = Mat::zeros(n, hidden);
        let mut g_b = Mat::zeros(n, hidden);
        for (e, (i, j)) in edges(n).enumerate() {
            let gp = g_pre.row(e);
            let mut g_d2 = 0.0;
            for c in 0..hidden {
                let g = gp[c];
                grad.edge_in.b[c] += g;
                let wd = self.edge_in.w.get(c, 2 * f);
                grad.edge_in.w.data[c * (2 * f + 1) + 2 * f] += g * cache.d2[e];
                g_d2 += g * wd;
            }
            for (acc, g) in g_a.row_mut(i).iter_mut().zip(gp) {
                *acc += g;
            }
            for (acc, g) in g_b.row_mut(j).iter_mut().zip(gp) {
                *acc += g;
            }
            let diff = sub3(x[i], x[j]);
            for axis in 0..3 {
                gx[i][axis] += 2.0 * g_d2 * diff[axis];
                gx[j][axis] -= 2.0 * g_d2 * diff[axis];
            }
        }
        let width = 2 * f + 1;
        for node in 0..n {
            let hr = cache.h.row(node);
            for c in 0..hidden {
                let (ga, gb) = (g_a.get(node, c), g_b.get(node, c));
                let w = self.edge_in.w.row(c);
                let gw = &mut grad.edge_in.w.data[c * width..(c + 1) * width];
                for q in 0..f {
                    gw[q] += ga * hr[q];
                    gw[f + q] += gb * hr[q];
                }
                let ghr = gh.row_mut(node);
                for q in 0..f {
                    ghr[q] += ga * w[q] + gb * w[f + q];
                }
            }
        }
        (gx, gh)
    }
}

impl Parameterized for EquivariantLayer {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.edge_in.visit(f);
        self.edge_out.visit(f);
        self.coord_net.visit(f);
        self.node_net.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.edge_in.visit_mut(f);
        self.edge_out.visit_mut(f);
        self.coord_net.visit_mut(f);
        self.node_net.visit_mut(f);
    }
}
