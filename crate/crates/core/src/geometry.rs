//! Featured point sets and the rigid/permutation group actions on them.
//!
//! A [`Geometry`] is a point set in data space: `n` coordinate rows in R^3
//! plus `n` feature rows of width `d`. A [`LatentGeometry`] has the same
//! shape in the encoded space (feature width `k`). Everything that only
//! needs coordinates and features is written against the [`PointSet`] trait
//! so it works on both.
//!
//! Zero center-of-mass projection only ever touches coordinates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

#[inline]
pub fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm_sq3(a: Vec3) -> f64 {
    dot3(a, a)
}

/// Shared view over data-space and latent-space point sets.
pub trait PointSet: Clone {
    fn coords(&self) -> &[Vec3];
    fn features(&self) -> &[Vec<f64>];

    /// Rebuild a point set of the same kind with new rows, keeping any
    /// metadata.
    fn with_rows(&self, coords: Vec<Vec3>, features: Vec<Vec<f64>>) -> Self;

    fn n(&self) -> usize {
        self.coords().len()
    }

    fn feature_dim(&self) -> usize {
        self.features().first().map_or(0, Vec::len)
    }
}

fn validate_rows(coords: &[Vec3], features: &[Vec<f64>]) -> Result<()> {
    if coords.is_empty() {
        return Err(Error::InvalidGeometry("a geometry needs at least one point".into()));
    }
    if coords.len() != features.len() {
        return Err(Error::InvalidGeometry(format!(
            "{} coordinate rows but {} feature rows",
            coords.len(),
            features.len()
        )));
    }
    let d = features[0].len();
    if let Some(row) = features.iter().position(|r| r.len() != d) {
        return Err(Error::InvalidGeometry(format!(
            "feature row {row} has width {}, expected {d}",
            features[row].len()
        )));
    }
    let finite = coords.iter().flatten().all(|v| v.is_finite())
        && features.iter().flatten().all(|v| v.is_finite());
    if !finite {
        return Err(Error::InvalidGeometry("non-finite entry".into()));
    }
    Ok(())
}

/// A featured point set in data space (coordinates plus per-point features).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeometryRecord", into = "GeometryRecord")]
pub struct Geometry {
    coords: Vec<Vec3>,
    features: Vec<Vec<f64>>,
    tag: Option<String>,
}

impl Geometry {
    pub fn new(coords: Vec<Vec3>, features: Vec<Vec<f64>>, tag: Option<String>) -> Result<Self> {
        validate_rows(&coords, &features)?;
        Ok(Self {
            coords,
            features,
            tag,
        })
    }

    pub fn tag(&self) -> Option<&str> {
        self.tag.as_deref()
    }

    pub fn with_tag(mut self, tag: Option<String>) -> Self {
        self.tag = tag;
        self
    }

    pub fn into_parts(self) -> (Vec<Vec3>, Vec<Vec<f64>>, Option<String>) {
        (self.coords, self.features, self.tag)
    }
}

impl PointSet for Geometry {
    fn coords(&self) -> &[Vec3] {
        &self.coords
    }

    fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    fn with_rows(&self, coords: Vec<Vec3>, features: Vec<Vec<f64>>) -> Self {
        debug_assert!(validate_rows(&coords, &features).is_ok());
        Self {
            coords,
            features,
            tag: self.tag.clone(),
        }
    }
}

/// On-disk form of a geometry: one JSON object per line of a `.geoms.jsonl` file.
#[derive(Serialize, Deserialize)]
struct GeometryRecord {
    n: usize,
    coords: Vec<Vec3>,
    features: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tag: Option<String>,
}

impl TryFrom<GeometryRecord> for Geometry {
    type Error = Error;

    fn try_from(r: GeometryRecord) -> Result<Self> {
        if r.n != r.coords.len() {
            return Err(Error::InvalidGeometry(format!(
                "header says n = {} but {} coordinate rows present",
                r.n,
                r.coords.len()
            )));
        }
        Geometry::new(r.coords, r.features, r.tag)
    }
}

impl From<Geometry> for GeometryRecord {
    fn from(g: Geometry) -> Self {
        Self {
            n: g.coords.len(),
            coords: g.coords,
            features: g.features,
            tag: g.tag,
        }
    }
}

/// An encoded point set: latent coordinates (zero-CoM by construction) and
/// latent invariant features of width `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentGeometry {
    coords: Vec<Vec3>,
    features: Vec<Vec<f64>>,
}

impl LatentGeometry {
    pub fn new(coords: Vec<Vec3>, features: Vec<Vec<f64>>) -> Result<Self> {
        validate_rows(&coords, &features)?;
        Ok(Self { coords, features })
    }

    /// Build from a flat buffer laid out as `n*3` coordinates followed by `n*k` features.
    pub fn from_flat(flat: &[f64], n: usize, k: usize) -> Result<Self> {
        if flat.len() != n * (3 + k) {
            return Err(Error::ShapeMismatch(format!(
                "flat buffer of {} entries for n = {n}, k = {k}",
                flat.len()
            )));
        }
        let coords = flat[..3 * n]
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        let features = if k == 0 {
            vec![Vec::new(); n]
        } else {
            flat[3 * n..].chunks_exact(k).map(<[f64]>::to_vec).collect()
        };
        Self::new(coords, features)
    }

    /// Flat copy in the layout accepted by [`LatentGeometry::from_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n() * (3 + self.feature_dim()));
        out.extend(self.coords.iter().flatten());
        out.extend(self.features.iter().flatten());
        out
    }

    pub fn into_parts(self) -> (Vec<Vec3>, Vec<Vec<f64>>) {
        (self.coords, self.features)
    }
}

impl PointSet for LatentGeometry {
    fn coords(&self) -> &[Vec3] {
        &self.coords
    }

    fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    fn with_rows(&self, coords: Vec<Vec3>, features: Vec<Vec<f64>>) -> Self {
        debug_assert!(validate_rows(&coords, &features).is_ok());
        Self { coords, features }
    }
}

impl From<Geometry> for LatentGeometry {
    fn from(g: Geometry) -> Self {
        Self {
            coords: g.coords,
            features: g.features,
        }
    }
}

impl From<LatentGeometry> for Geometry {
    fn from(z: LatentGeometry) -> Self {
        Self {
            coords: z.coords,
            features: z.features,
            tag: None,
        }
    }
}

/// A proper rotation of R^3, stored row-major.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation([[f64; 3]; 3]);

impl Rotation {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn identity() -> Self {
        Rotation([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Checked constructor: `r^T r = I` and `det r = +1` within [`Rotation::TOLERANCE`].
    pub fn new(r: [[f64; 3]; 3]) -> Result<Self> {
        let rot = Rotation(r);
        let orth = rot.orthogonality_error();
        let det = rot.det();
        if !(orth <= Self::TOLERANCE) || !((det - 1.0).abs() <= Self::TOLERANCE) {
            return Err(Error::InvalidGeometry(format!(
                "not a proper rotation: |R^T R - I|_F = {orth:.3e}, det = {det}"
            )));
        }
        Ok(rot)
    }

    pub(crate) fn from_matrix_unchecked(r: [[f64; 3]; 3]) -> Self {
        Rotation(r)
    }

    /// Right-handed rotation by `angle` radians about the unit vector `axis`.
    pub fn about_axis(axis: Vec3, angle: f64) -> Self {
        let len = norm_sq3(axis).sqrt();
        let [x, y, z] = [axis[0] / len, axis[1] / len, axis[2] / len];
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Rotation([
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ])
    }

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.0
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let r = &self.0;
        [dot3(r[0], v), dot3(r[1], v), dot3(r[2], v)]
    }

    pub fn transpose(&self) -> Self {
        let r = &self.0;
        Rotation([
            [r[0][0], r[1][0], r[2][0]],
            [r[0][1], r[1][1], r[2][1]],
            [r[0][2], r[1][2], r[2][2]],
        ])
    }

    /// Matrix product `self * other` (apply `other` first).
    pub fn compose(&self, other: &Rotation) -> Self {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[i][k] * other.0[k][j]).sum();
            }
        }
        Rotation(out)
    }

    pub fn det(&self) -> f64 {
        det3(&self.0)
    }

    pub fn orthogonality_error(&self) -> f64 {
        let rtr = self.transpose().compose(self);
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                acc += (rtr.0[i][j] - target).powi(2);
            }
        }
        acc.sqrt()
    }

    pub fn frobenius_distance(&self, other: &Rotation) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Translation(pub Vec3);

/// A bijection on `0..n`. Applying it to a point set puts input row `map[i]`
/// at output row `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &m in &map {
            if m >= n || seen[m] {
                return Err(Error::InvalidPermutation(format!(
                    "{map:?} is not a bijection on 0..{n}"
                )));
            }
            seen[m] = true;
        }
        Ok(Permutation(map))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &m)| i == m)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &m) in self.0.iter().enumerate() {
            inv[m] = i;
        }
        Permutation(inv)
    }

    /// The permutation equivalent to applying `self` and then `next`.
    pub fn then(&self, next: &Permutation) -> Self {
        Permutation(next.0.iter().map(|&j| self.0[j]).collect())
    }

    pub fn apply_to<T: Clone>(&self, rows: &[T]) -> Vec<T> {
        self.0.iter().map(|&j| rows[j].clone()).collect()
    }

    /// Uniformly random permutation from a seeded Fisher-Yates shuffle.
    pub fn random(n: usize, rng: &mut impl rand::Rng) -> Self {
        use rand::seq::SliceRandom;
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(rng);
        Permutation(map)
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

/// Arithmetic mean of the coordinate rows. Returns the origin for an empty slice.
pub fn center_of_mass(coords: &[Vec3]) -> Vec3 {
    if coords.is_empty() {
        return [0.0; 3];
    }
    let mut acc = [0.0; 3];
    for c in coords {
        for a in 0..3 {
            acc[a] += c[a];
        }
    }
    let n = coords.len() as f64;
    [acc[0] / n, acc[1] / n, acc[2] / n]
}

/// Largest absolute component of the center of mass.
pub fn com_max_abs(coords: &[Vec3]) -> f64 {
    center_of_mass(coords).iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn center_coords(coords: &[Vec3]) -> Vec<Vec3> {
    let com = center_of_mass(coords);
    coords.iter().map(|&c| sub3(c, com)).collect()
}

/// Translate coordinates so their mean is the origin; features are untouched.
pub fn project_zero_com<P: PointSet>(p: &P) -> P {
    p.with_rows(center_coords(p.coords()), p.features().to_vec())
}

/// `x_i -> R x_i + t` on every coordinate row.
pub fn apply_rigid<P: PointSet>(p: &P, rotation: &Rotation, translation: &Translation) -> P {
    let t = translation.0;
    let coords = p
        .coords()
        .iter()
        .map(|&x| {
            let r = rotation.apply(x);
            [r[0] + t[0], r[1] + t[1], r[2] + t[2]]
        })
        .collect();
    p.with_rows(coords, p.features().to_vec())
}

/// Reorder rows of coordinates and features together.
pub fn apply_permutation<P: PointSet>(p: &P, perm: &Permutation) -> Result<P> {
    if perm.len() != p.n() {
        return Err(Error::PermutationSizeMismatch {
            perm: perm.len(),
            n: p.n(),
        });
    }
    Ok(p.with_rows(perm.apply_to(p.coords()), perm.apply_to(p.features())))
}

/// Deterministic proper rotation: orthonormalize a Gaussian 3x3 matrix and
/// flip one axis when the result is a reflection.
pub fn random_rotation(seed: u64) -> Rotation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_rotation_from(&mut rng)
}

pub fn random_rotation_from(rng: &mut impl rand::Rng) -> Rotation {
    loop {
        let mut rows = [[0.0; 3]; 3];
        for v in rows.iter_mut().flatten() {
            *v = StandardNormal.sample(rng);
        }
        if let Some(r) = gram_schmidt(rows) {
            return r;
        }
    }
}

fn gram_schmidt(mut rows: [[f64; 3]; 3]) -> Option<Rotation> {
    for i in 0..3 {
        for j in 0..i {
            let proj = dot3(rows[i], rows[j]);
            for a in 0..3 {
                rows[i][a] -= proj * rows[j][a];
            }
        }
        let len = norm_sq3(rows[i]).sqrt();
        if len < 1e-8 {
            return None;
        }
        for a in 0..3 {
            rows[i][a] /= len;
        }
    }
    if det3(&rows) < 0.0 {
        for v in rows[2].iter_mut() {
            *v = -*v;
        }
    }
    Some(Rotation(rows))
}

/// All pairwise Euclidean distances, row-major `n x n`.
pub fn distance_matrix(coords: &[Vec3]) -> Vec<f64> {
    let n = coords.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = norm_sq3(sub3(coords[i], coords[j])).sqrt();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_geometry(n: usize, d: usize, seed: u64) -> Geometry {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = (0..n)
            .map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)])
            .collect();
        let features = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        Geometry::new(coords, features, None).unwrap()
    }

    #[test]
    fn com_examples() {
        assert_eq!(center_of_mass(&[[0.0; 3]; 3]), [0.0; 3]);
        assert_eq!(center_of_mass(&[[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]), [0.0; 3]);
        let com = center_of_mass(&[[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]]);
        for c in com {
            assert!((c - 2.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_com_projection() {
        let g = Geometry::new(
            vec![[2.0, 1.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 1.0]],
            vec![vec![1.0], vec![2.0], vec![3.0]],
            Some("t".into()),
        )
        .unwrap();
        let p = project_zero_com(&g);
        assert_eq!(p.coords(), &[[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        assert_eq!(p.features(), g.features());
        assert_eq!(p.tag(), Some("t"));
        assert_eq!(project_zero_com(&p), p);

        let r = project_zero_com(&random_geometry(9, 3, 7));
        assert!(com_max_abs(r.coords()) <= 1e-12);
    }

    #[test]
    fn rigid_examples() {
        let g = Geometry::new(vec![[1.0, 0.0, 0.0]], vec![vec![0.5]], None).unwrap();
        assert_eq!(apply_rigid(&g, &Rotation::identity(), &Translation::default()), g);
        let quarter = Rotation::about_axis([0.0, 0.0, 1.0], std::f64::consts::FRAC_PI_2);
        let out = apply_rigid(&g, &quarter, &Translation::default());
        let c = out.coords()[0];
        assert!(c[0].abs() < 1e-15 && (c[1] - 1.0).abs() < 1e-15 && c[2].abs() < 1e-15);
    }

    #[test]
    fn rigid_preserves_distances() {
        let g = random_geometry(12, 2, 3);
        let out = apply_rigid(&g, &random_rotation(11), &Translation([0.3, -4.0, 2.5]));
        let before = distance_matrix(g.coords());
        let after = distance_matrix(out.coords());
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn rigid_keeps_zero_com() {
        let g = project_zero_com(&random_geometry(10, 2, 5));
        let out = apply_rigid(&g, &random_rotation(2), &Translation::default());
        assert!(com_max_abs(out.coords()) <= 1e-12);
    }

    #[test]
    fn permutation_examples() {
        let g = Geometry::new(
            vec![[0.0, 0.0, 1.0], [5.0, 0.0, 0.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            None,
        )
        .unwrap();
        assert_eq!(apply_permutation(&g, &Permutation::identity(2)).unwrap(), g);
        let swap = Permutation::new(vec![1, 0]).unwrap();
        let s = apply_permutation(&g, &swap).unwrap();
        assert_eq!(s.coords(), &[[5.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        assert_eq!(s.features(), &[vec![0.0, 1.0], vec![1.0, 0.0]]);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let big = random_geometry(7, 3, 9);
        let p = Permutation::random(7, &mut rng);
        let back = apply_permutation(&apply_permutation(&big, &p).unwrap(), &p.inverse()).unwrap();
        assert_eq!(back, big);

        let err = apply_permutation(&g, &Permutation::identity(3)).unwrap_err();
        assert!(err.to_string().contains("permutation size mismatch"));
    }

    #[test]
    fn permutation_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_geometry(6, 1, 1);
        let a = Permutation::random(6, &mut rng);
        let b = Permutation::random(6, &mut rng);
        let two_step = apply_permutation(&apply_permutation(&g, &a).unwrap(), &b).unwrap();
        assert_eq!(apply_permutation(&g, &a.then(&b)).unwrap(), two_step);
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
    }

    #[test]
    fn random_rotation_contract() {
        for seed in 0..50 {
            let r = random_rotation(seed);
            assert!(Rotation::new(*r.matrix()).is_ok());
            assert_eq!(r, random_rotation(seed));
        }
        assert!(random_rotation(1).frobenius_distance(&random_rotation(2)) > 0.0);
    }

    #[test]
    fn invalid_geometry_rejected() {
        assert!(Geometry::new(vec![], vec![], None).is_err());
        assert!(Geometry::new(vec![[0.0; 3]], vec![vec![0.0], vec![1.0]], None).is_err());
        assert!(Geometry::new(vec![[f64::NAN, 0.0, 0.0]], vec![vec![0.0]], None).is_err());
        assert!(Rotation::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]).is_err());
    }

    #[test]
    fn latent_flat_round_trip() {
        let z: LatentGeometry = random_geometry(4, 2, 8).into();
        let flat = z.to_flat();
        assert_eq!(LatentGeometry::from_flat(&flat, 4, 2).unwrap(), z);
        assert!(LatentGeometry::from_flat(&flat, 4, 3).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn geometry_strategy() -> impl Strategy<Value = Geometry> {
            (1usize..9).prop_flat_map(|n| {
                (
                    prop::collection::vec(prop::array::uniform3(-10.0f64..10.0), n),
                    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), n),
                )
                    .prop_map(|(c, f)| Geometry::new(c, f, None).unwrap())
            })
        }

        proptest! {
            #[test]
            fn projection_idempotent_and_commutes_with_permutation(g in geometry_strategy(), seed in 0u64..1000) {
                let p = project_zero_com(&g);
                prop_assert!(com_max_abs(p.coords()) <= 1e-12);
                let pp = project_zero_com(&p);
                for (a, b) in p.coords().iter().flatten().zip(pp.coords().iter().flatten()) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let perm = Permutation::random(g.n(), &mut rng);
                let a = project_zero_com(&apply_permutation(&g, &perm).unwrap());
                let b = apply_permutation(&project_zero_com(&g), &perm).unwrap();
                for (x, y) in a.coords().iter().flatten().zip(b.coords().iter().flatten()) {
                    prop_assert!((x - y).abs() <= 1e-12);
                }
            }

            #[test]
            fn permutation_preserves_row_pairs(g in geometry_strategy(), seed in 0u64..1000) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let perm = Permutation::random(g.n(), &mut rng);
                let out = apply_permutation(&g, &perm).unwrap();
                let key = |p: &Geometry| {
                    let mut rows: Vec<String> = p.coords().iter().zip(p.features())
                        .map(|(c, f)| format!("{c:?}{f:?}")).collect();
                    rows.sort();
                    rows
                };
                prop_assert_eq!(key(&g), key(&out));
            }
        }
    }
}
