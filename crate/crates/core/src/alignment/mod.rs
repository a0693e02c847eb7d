//! Optimal molecule transport: the rotation and permutation that bring one
//! zero-CoM point set closest to another under the joint cost
//!
//! ```text
//! lambda * |pi(R x1) - x0|^2 + (1 - lambda) * |pi(h1) - h0|^2
//! ```
//!
//! Translation is handled by requiring zero-CoM inputs. [`solve_omt`] runs
//! Hungarian on the atom-level cost matrix and then Kabsch on the permuted
//! coordinates; with `max_iters > 1` it keeps alternating the two
//! subproblems (from several starting rotations) until the cost stalls.
//! [`brute_force_omt`] is the exact oracle for small `n`.

mod hungarian;
mod kabsch;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub use hungarian::hungarian;
pub use kabsch::{kabsch, rotation_objective, CENTERING_TOLERANCE};

use crate::error::{Error, Result};
use crate::geometry::{apply_permutation, com_max_abs, norm_sq3, sub3, Permutation, PointSet, Rotation, Vec3};

/// Default trade-off between coordinate and feature cost.
pub const DEFAULT_LAMBDA: f64 = 0.5;

/// Alternation stops once a full pass improves the cost by less than this.
pub const ALTERNATION_TOL: f64 = 1e-10;

/// Largest `n` accepted by [`brute_force_omt`].
pub const ORACLE_MAX_N: usize = 8;

/// Square matrix of non-negative assignment costs, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::SizeMismatch(format!(
                "{} entries for a {n}x{n} cost matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidGeometry(
                "cost matrix entries must be finite and non-negative".into(),
            ));
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// `sum_j c[perm(j), j]`, accumulated in column order.
    pub fn assignment_cost(&self, perm: &Permutation) -> f64 {
        perm.as_slice()
            .iter()
            .enumerate()
            .map(|(j, &i)| self.get(i, j))
            .sum()
    }
}

fn check_pair<P: PointSet>(z1: &P, z0: &P) -> Result<()> {
    if z1.n() != z0.n() {
        return Err(Error::SizeMismatch(format!("{} vs {} points", z1.n(), z0.n())));
    }
    if z1.feature_dim() != z0.feature_dim() {
        return Err(Error::SizeMismatch(format!(
            "feature widths {} vs {}",
            z1.feature_dim(),
            z0.feature_dim()
        )));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidConfig(format!("lambda = {lambda} outside [0, 1]")));
    }
    Ok(())
}

fn check_centered<P: PointSet>(z: &P) -> Result<()> {
    let off = com_max_abs(z.coords());
    if off > CENTERING_TOLERANCE {
        return Err(Error::NotCentered(off));
    }
    Ok(())
}

fn feature_dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn weighted_matrix(x1: &[Vec3], h1: &[Vec<f64>], x0: &[Vec3], h0: &[Vec<f64>], lambda: f64) -> CostMatrix {
    let n = x1.len();
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let c = norm_sq3(sub3(x1[i], x0[j]));
            let f = feature_dist_sq(&h1[i], &h0[j]);
            data.push(lambda * c + (1.0 - lambda) * f);
        }
    }
    CostMatrix { n, data }
}

/// Atom-level transport costs: entry `[i, j]` is
/// `lambda |x1_i - x0_j|^2 + (1 - lambda) |h1_i - h0_j|^2`.
pub fn cost_matrix<P: PointSet>(z1: &P, z0: &P, lambda: f64) -> Result<CostMatrix> {
    check_pair(z1, z0)?;
    check_lambda(lambda)?;
    Ok(weighted_matrix(z1.coords(), z1.features(), z0.coords(), z0.features(), lambda))
}

/// Breakdown of the joint cost of one alignment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignmentCost {
    /// `|x_aligned - x0|^2` (unweighted).
    pub coord_sq: f64,
    /// `|h_aligned - h0|^2` (unweighted).
    pub feature_sq: f64,
}

impl AlignmentCost {
    /// The minimized objective `lambda coord_sq + (1 - lambda) feature_sq`.
    pub fn weighted(&self, lambda: f64) -> f64 {
        lambda * self.coord_sq + (1.0 - lambda) * self.feature_sq
    }

    /// Same weighting on un-squared norms.
    pub fn weighted_unsquared(&self, lambda: f64) -> f64 {
        lambda * self.coord_sq.sqrt() + (1.0 - lambda) * self.feature_sq.sqrt()
    }
}

/// Cost parts of `perm(R z1)` against `z0`, without materializing the aligned copy.
pub fn alignment_cost<P: PointSet>(z1: &P, z0: &P, rotation: &Rotation, perm: &Permutation) -> AlignmentCost {
    let (x1, h1, x0, h0) = (z1.coords(), z1.features(), z0.coords(), z0.features());
    let mut coord_sq = 0.0;
    let mut feature_sq = 0.0;
    for (i, &src) in perm.as_slice().iter().enumerate() {
        coord_sq += norm_sq3(sub3(rotation.apply(x1[src]), x0[i]));
        feature_sq += feature_dist_sq(&h1[src], &h0[i]);
    }
    AlignmentCost { coord_sq, feature_sq }
}

/// Result of aligning a target point set onto a reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmtSolution<P> {
    pub rotation: Rotation,
    pub permutation: Permutation,
    /// `perm(R z1)`: row `i` is paired with row `i` of the reference.
    pub aligned_target: P,
    pub lambda: f64,
    /// The minimized objective, `parts.weighted(lambda)`.
    pub cost: f64,
    /// `lambda |dx| + (1 - lambda) |dh|` with un-squared norms at the same alignment.
    pub cost_unsquared: f64,
    pub parts: AlignmentCost,
    /// Hungarian/Kabsch passes performed for the returned alignment.
    pub iterations: usize,
}

struct Candidate {
    rotation: Rotation,
    permutation: Permutation,
    cost: f64,
    iterations: usize,
}

/// One Hungarian + Kabsch pass starting from `rotation`.
fn omt_pass<P: PointSet>(z1: &P, z0: &P, lambda: f64, rotation: &Rotation) -> (Rotation, Permutation, f64) {
    let rotated: Vec<Vec3> = z1.coords().iter().map(|&x| rotation.apply(x)).collect();
    let m = weighted_matrix(&rotated, z1.features(), z0.coords(), z0.features(), lambda);
    let perm = hungarian(&m);
    let permuted = perm.apply_to(z1.coords());
    let r = kabsch::kabsch_unchecked(&permuted, z0.coords());
    let cost = alignment_cost(z1, z0, &r, &perm).weighted(lambda);
    (r, perm, cost)
}

fn alternate<P: PointSet>(z1: &P, z0: &P, lambda: f64, start: &Rotation, max_iters: usize) -> Candidate {
    let (mut rotation, mut permutation, mut cost) = omt_pass(z1, z0, lambda, start);
    let mut iterations = 1;
    while iterations < max_iters {
        let (r, p, c) = omt_pass(z1, z0, lambda, &rotation);
        iterations += 1;
        // Each half-step is an exact minimization, so c <= cost up to rounding.
        let improvement = cost - c;
        if c <= cost {
            rotation = r;
            permutation = p;
            cost = c;
        }
        if improvement < ALTERNATION_TOL {
            break;
        }
    }
    Candidate {
        rotation,
        permutation,
        cost,
        iterations,
    }
}

fn principal_axes(x: &[Vec3]) -> Matrix3<f64> {
    let mut cov = Matrix3::<f64>::zeros();
    for p in x {
        for a in 0..3 {
            for b in 0..3 {
                cov[(a, b)] += p[a] * p[b];
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    Matrix3::from_columns(&[
        eig.eigenvectors.column(order[0]).into_owned(),
        eig.eigenvectors.column(order[1]).into_owned(),
        eig.eigenvectors.column(order[2]).into_owned(),
    ])
}

/// Starting rotations for the alternation: every proper rotation that maps
/// the principal axes of `x1` onto those of `x0` up to axis order and sign.
fn principal_axis_starts(x1: &[Vec3], x0: &[Vec3]) -> Vec<Rotation> {
    let e1 = principal_axes(x1);
    let e0 = principal_axes(x0);
    let axis_orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(24);
    for order in axis_orders {
        for signs in 0..8u8 {
            let mut q = Matrix3::<f64>::zeros();
            for (col, &row) in order.iter().enumerate() {
                q[(row, col)] = if signs >> col & 1 == 1 { -1.0 } else { 1.0 };
            }
            let r = e0 * q * e1.transpose();
            if r.determinant() > 0.0 {
                let mut m = [[0.0; 3]; 3];
                for (i, row) in m.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = r[(i, j)];
                    }
                }
                out.push(Rotation::from_matrix_unchecked(m));
            }
        }
    }
    out
}

fn finish<P: PointSet>(z1: &P, z0: &P, lambda: f64, c: Candidate) -> Result<OmtSolution<P>> {
    let rotated = crate::geometry::apply_rigid(z1, &c.rotation, &Default::default());
    let aligned_target = apply_permutation(&rotated, &c.permutation)?;
    let parts = alignment_cost(z1, z0, &c.rotation, &c.permutation);
    Ok(OmtSolution {
        rotation: c.rotation,
        permutation: c.permutation,
        aligned_target,
        lambda,
        cost: parts.weighted(lambda),
        cost_unsquared: parts.weighted_unsquared(lambda),
        parts,
        iterations: c.iterations,
    })
}

/// Align `z1` onto `z0`.
///
/// `max_iters = 1` is a single cost-matrix -> Hungarian -> Kabsch pass from the
/// identity rotation. Larger values alternate the permutation and rotation
/// subproblems, from the identity start and from each principal-axis start,
/// keeping the best result; the cost is non-increasing in `max_iters`.
pub fn solve_omt<P: PointSet>(z1: &P, z0: &P, lambda: f64, max_iters: usize) -> Result<OmtSolution<P>> {
    check_pair(z1, z0)?;
    check_lambda(lambda)?;
    check_centered(z1)?;
    check_centered(z0)?;
    let max_iters = max_iters.max(1);

    let mut best = alternate(z1, z0, lambda, &Rotation::identity(), max_iters);
    if max_iters > 1 && z1.n() > 1 {
        for start in principal_axis_starts(z1.coords(), z0.coords()) {
            let c = alternate(z1, z0, lambda, &start, max_iters);
            if c.cost < best.cost {
                best = c;
            }
        }
    }
    finish(z1, z0, lambda, best)
}

/// Visit every permutation of `0..n` (Heap's algorithm).
fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&p);
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            f(&p);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Exact minimum of the joint cost over all permutations and proper rotations.
///
/// For a fixed correspondence Kabsch gives the optimal rotation and the
/// feature term does not depend on it, so enumerating permutations is exact.
pub fn brute_force_omt<P: PointSet>(z1: &P, z0: &P, lambda: f64) -> Result<OmtSolution<P>> {
    check_pair(z1, z0)?;
    check_lambda(lambda)?;
    if z1.n() > ORACLE_MAX_N {
        return Err(Error::OracleSizeLimit(z1.n()));
    }
    check_centered(z1)?;
    check_centered(z0)?;

    let n = z1.n();
    let (x1, h1, x0, h0) = (z1.coords(), z1.features(), z0.coords(), z0.features());
    let mut best: Option<Candidate> = None;
    let mut permuted = vec![[0.0; 3]; n];
    for_each_permutation(n, |p| {
        for (dst, &src) in permuted.iter_mut().zip(p) {
            *dst = x1[src];
        }
        let r = kabsch::kabsch_unchecked(&permuted, x0);
        let coord_sq = rotation_objective(&r, &permuted, x0);
        let feature_sq: f64 = p
            .iter()
            .enumerate()
            .map(|(i, &src)| feature_dist_sq(&h1[src], &h0[i]))
            .sum();
        let cost = lambda * coord_sq + (1.0 - lambda) * feature_sq;
        if best.as_ref().is_none_or(|b| cost < b.cost) {
            best = Some(Candidate {
                rotation: r,
                permutation: Permutation::new(p.to_vec()).expect("enumerated permutation"),
                cost,
                iterations: 0,
            });
        }
    });
    finish(z1, z0, lambda, best.expect("at least one permutation"))
}
