//! Transport-cost functionals on single pairs and on couplings.
//!
//! * [`molecule_cost`] is the raw cost `|x1 - x0| + |h1 - h0|` with no alignment.
//! * [`optimal_molecule_cost`] minimizes the lambda-weighted squared cost over
//!   rotation, translation and permutation (exactly or heuristically).
//! * [`distribution_cost`] is the Monte Carlo mean of the optimal cost over a
//!   coupling, reported with coordinate/feature parts and a per-atom figure.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{brute_force_omt, solve_omt, AlignmentCost};
use crate::error::{Error, Result};
use crate::flow::CouplingSet;
use crate::geometry::{project_zero_com, PointSet};

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// How the inner rotation/permutation minimization is solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OmtMode {
    /// Exhaustive permutation enumeration (n <= 8).
    Exact,
    /// [`solve_omt`] with the given alternation budget.
    Heuristic { max_iters: usize },
}

impl OmtMode {
    /// `exact = false` maps to the single Hungarian + Kabsch pass.
    pub fn from_exact_flag(exact: bool) -> Self {
        if exact {
            OmtMode::Exact
        } else {
            OmtMode::Heuristic { max_iters: 1 }
        }
    }
}

fn check_same_shape<P: PointSet>(a: &P, b: &P) -> Result<()> {
    if a.n() != b.n() || a.feature_dim() != b.feature_dim() {
        return Err(Error::SizeMismatch(format!(
            "({}, d = {}) vs ({}, d = {})",
            a.n(),
            a.feature_dim(),
            b.n(),
            b.feature_dim()
        )));
    }
    Ok(())
}

/// `|x1 - x0|_F + |h1 - h0|_F` with rows taken as given.
pub fn molecule_cost<P: PointSet>(g0: &P, g1: &P) -> Result<f64> {
    check_same_shape(g0, g1)?;
    let coord: f64 = g0
        .coords()
        .iter()
        .flatten()
        .zip(g1.coords().iter().flatten())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    let feat: f64 = g0
        .features()
        .iter()
        .flatten()
        .zip(g1.features().iter().flatten())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(coord.sqrt() + feat.sqrt())
}

/// Cost parts of the best alignment of `g1` onto `g0`. Both inputs are
/// re-centered first, which is the optimal translation.
pub fn optimal_alignment_parts<P: PointSet>(g0: &P, g1: &P, lambda: f64, mode: OmtMode) -> Result<AlignmentCost> {
    check_same_shape(g0, g1)?;
    let c0 = project_zero_com(g0);
    let c1 = project_zero_com(g1);
    let sol = match mode {
        OmtMode::Exact => brute_force_omt(&c1, &c0, lambda)?,
        OmtMode::Heuristic { max_iters } => solve_omt(&c1, &c0, lambda, max_iters)?,
    };
    Ok(sol.parts)
}

/// Minimum over rotation, translation and permutation of
/// `lambda |dx|^2 + (1 - lambda) |dh|^2`.
pub fn optimal_molecule_cost<P: PointSet>(g0: &P, g1: &P, lambda: f64, mode: OmtMode) -> Result<f64> {
    Ok(optimal_alignment_parts(g0, g1, lambda, mode)?.weighted(lambda))
}

/// Which space a cost was measured in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostSpace {
    Data,
    Latent,
}

impl std::fmt::Display for CostSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CostSpace::Data => "data",
            CostSpace::Latent => "latent",
        })
    }
}

/// Monte Carlo estimate of the distribution transport cost of a coupling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub space: CostSpace,
    /// Mean optimal pair cost.
    pub total_cost: f64,
    /// Sum of pair costs divided by the summed atom counts.
    pub per_atom_cost: f64,
    pub num_pairs: usize,
    /// Mean of `lambda |dx|^2`; `total_cost = coord_part + feature_part`.
    pub coord_part: f64,
    /// Mean of `(1 - lambda) |dh|^2`.
    pub feature_part: f64,
    /// Summed atom counts (kept so reports can be merged).
    #[serde(default)]
    pub num_atoms: usize,
}

impl CostReport {
    pub const CSV_HEADER: &'static str = "space,total_cost,per_atom_cost,coord_part,feature_part,num_pairs";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.space, self.total_cost, self.per_atom_cost, self.coord_part, self.feature_part, self.num_pairs
        )
    }

    /// Report for the union of two couplings.
    pub fn merge(&self, other: &CostReport) -> CostReport {
        let pairs = self.num_pairs + other.num_pairs;
        let atoms = self.num_atoms + other.num_atoms;
        let w = |a: f64, na: usize, b: f64, nb: usize| (a * na as f64 + b * nb as f64) / (na + nb) as f64;
        CostReport {
            space: self.space,
            total_cost: w(self.total_cost, self.num_pairs, other.total_cost, other.num_pairs),
            per_atom_cost: w(self.per_atom_cost, self.num_atoms, other.per_atom_cost, other.num_atoms),
            num_pairs: pairs,
            coord_part: w(self.coord_part, self.num_pairs, other.coord_part, other.num_pairs),
            feature_part: w(self.feature_part, self.num_pairs, other.feature_part, other.num_pairs),
            num_atoms: atoms,
        }
    }
}

/// Optimal cost parts for each `(z0, z1)` pair, in input order.
pub fn pair_costs<P: PointSet + Sync>(pairs: &[(&P, &P)], lambda: f64, mode: OmtMode) -> Result<Vec<AlignmentCost>> {
    pairs
        .par_iter()
        .map(|(z0, z1)| optimal_alignment_parts(*z0, *z1, lambda, mode))
        .collect()
}

/// Cost report over explicit `(z0, z1)` pairs.
pub fn distribution_cost_of<P: PointSet + Sync>(
    pairs: &[(&P, &P)],
    lambda: f64,
    mode: OmtMode,
    space: CostSpace,
) -> Result<CostReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyCoupling);
    }
    let parts = pair_costs(pairs, lambda, mode)?;
    let total: CompensatedSum = parts.iter().map(|p| p.weighted(lambda)).collect();
    let coord: CompensatedSum = parts.iter().map(|p| lambda * p.coord_sq).collect();
    let feature: CompensatedSum = parts.iter().map(|p| (1.0 - lambda) * p.feature_sq).collect();
    let atoms: usize = pairs.iter().map(|(z0, _)| z0.n()).sum();
    let m = pairs.len() as f64;
    Ok(CostReport {
        space,
        total_cost: total.value() / m,
        per_atom_cost: total.value() / atoms as f64,
        num_pairs: pairs.len(),
        coord_part: coord.value() / m,
        feature_part: feature.value() / m,
        num_atoms: atoms,
    })
}

/// Cost report of a stored coupling set.
pub fn distribution_cost(set: &CouplingSet, lambda: f64, mode: OmtMode) -> Result<CostReport> {
    let pairs: Vec<_> = set.pairs.iter().map(|p| (&p.z0, &p.z1)).collect();
    distribution_cost_of(&pairs, lambda, mode, set.space)
}

/// Mean and standard error of a sample.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().copied().collect::<CompensatedSum>().value() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{CouplingPair, PairSource};
    use crate::geometry::{apply_permutation, apply_rigid, random_rotation, Geometry, LatentGeometry, Permutation, Translation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_geometry(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Geometry {
        let coords = (0..n)
            .map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
            .collect();
        let features = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        Geometry::new(coords, features, None).unwrap()
    }

    #[test]
    fn molecule_cost_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = random_geometry(5, 3, &mut rng);
        assert_eq!(molecule_cost(&g, &g).unwrap(), 0.0);

        let mut coords = g.coords().to_vec();
        coords[2][0] += 3.0;
        let moved = g.with_rows(coords, g.features().to_vec());
        assert!((molecule_cost(&g, &moved).unwrap() - 3.0).abs() < 1e-12);

        let h = random_geometry(5, 3, &mut rng);
        let mut cs = 0.0;
        let mut fs = 0.0;
        for i in 0..5 {
            for a in 0..3 {
                cs += (g.coords()[i][a] - h.coords()[i][a]).powi(2);
                fs += (g.features()[i][a] - h.features()[i][a]).powi(2);
            }
        }
        assert!((molecule_cost(&g, &h).unwrap() - (cs.sqrt() + fs.sqrt())).abs() < 1e-12);
        assert!(molecule_cost(&g, &random_geometry(4, 3, &mut rng)).is_err());
    }

    #[test]
    fn optimal_cost_of_rigid_permuted_copy_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g0 = random_geometry(6, 2, &mut rng);
        let perm = Permutation::random(6, &mut rng);
        let g1 = apply_permutation(&apply_rigid(&g0, &random_rotation(5), &Translation([1.0, 2.0, 3.0])), &perm).unwrap();
        for mode in [OmtMode::Exact, OmtMode::Heuristic { max_iters: 50 }] {
            assert!(optimal_molecule_cost(&g0, &g1, 0.5, mode).unwrap() < 1e-8);
        }
    }

    #[test]
    fn heuristic_never_beats_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a = random_geometry(5, 2, &mut rng);
            let b = random_geometry(5, 2, &mut rng);
            let exact = optimal_molecule_cost(&a, &b, 0.5, OmtMode::Exact).unwrap();
            let heur = optimal_molecule_cost(&a, &b, 0.5, OmtMode::Heuristic { max_iters: 1 }).unwrap();
            assert!(heur >= exact - 1e-9);
        }
    }

    #[test]
    fn lambda_zero_ignores_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_geometry(5, 2, &mut rng);
        let jittered = g.with_rows(random_geometry(5, 2, &mut rng).coords().to_vec(), g.features().to_vec());
        assert!(optimal_molecule_cost(&g, &jittered, 0.0, OmtMode::Exact).unwrap().abs() < 1e-12);
    }

    #[test]
    fn exact_cost_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let a = random_geometry(5, 2, &mut rng);
            let b = random_geometry(5, 2, &mut rng);
            let ab = optimal_molecule_cost(&a, &b, 0.5, OmtMode::Exact).unwrap();
            let ba = optimal_molecule_cost(&b, &a, 0.5, OmtMode::Exact).unwrap();
            assert!((ab - ba).abs() <= 1e-8);
        }
    }

    fn latent(g: Geometry) -> LatentGeometry {
        project_zero_com(&LatentGeometry::from(g))
    }

    fn set_of(pairs: Vec<(LatentGeometry, LatentGeometry)>) -> CouplingSet {
        CouplingSet::new(
            CostSpace::Latent,
            pairs
                .into_iter()
                .map(|(z0, z1)| CouplingPair::new(z0, z1, PairSource::Random).unwrap())
                .collect(),
        )
    }

    #[test]
    fn distribution_cost_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = latent(random_geometry(5, 2, &mut rng));
        let b = latent(random_geometry(6, 2, &mut rng));
        let same = set_of(vec![(a.clone(), a.clone()), (b.clone(), b.clone())]);
        assert!(distribution_cost(&same, 0.5, OmtMode::Exact).unwrap().total_cost.abs() < 1e-12);

        let a1 = latent(random_geometry(5, 2, &mut rng));
        let b1 = latent(random_geometry(6, 2, &mut rng));
        let ca = optimal_molecule_cost(&a, &a1, 0.5, OmtMode::Exact).unwrap();
        let cb = optimal_molecule_cost(&b, &b1, 0.5, OmtMode::Exact).unwrap();
        let r = distribution_cost(&set_of(vec![(a.clone(), a1.clone()), (b.clone(), b1.clone())]), 0.5, OmtMode::Exact).unwrap();
        assert!((r.total_cost - (ca + cb) / 2.0).abs() < 1e-12);
        assert!((r.per_atom_cost - (ca + cb) / 11.0).abs() < 1e-12);
        assert!((r.total_cost - (r.coord_part + r.feature_part)).abs() < 1e-9);

        let empty = CouplingSet::new(CostSpace::Latent, vec![]);
        assert!(matches!(distribution_cost(&empty, 0.5, OmtMode::Exact), Err(Error::EmptyCoupling)));
    }

    #[test]
    fn reports_merge_like_concatenation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mk = |rng: &mut ChaCha8Rng, n| (latent(random_geometry(n, 2, rng)), latent(random_geometry(n, 2, rng)));
        let first: Vec<_> = (0..3).map(|i| mk(&mut rng, 4 + i)).collect();
        let second: Vec<_> = (0..4).map(|i| mk(&mut rng, 3 + i)).collect();
        let mode = OmtMode::Exact;
        let r1 = distribution_cost(&set_of(first.clone()), 0.5, mode).unwrap();
        let r2 = distribution_cost(&set_of(second.clone()), 0.5, mode).unwrap();
        let all = distribution_cost(&set_of(first.into_iter().chain(second).collect()), 0.5, mode).unwrap();
        let merged = r1.merge(&r2);
        assert_eq!(merged.num_pairs, all.num_pairs);
        assert!((merged.total_cost - all.total_cost).abs() < 1e-12);
        assert!((merged.per_atom_cost - all.per_atom_cost).abs() < 1e-12);
    }

    #[test]
    fn compensated_sum_order_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut v: Vec<f64> = (0..10_000).map(|_| rng.random_range(0.0..1e3) * 10f64.powi(rng.random_range(-8..8))).collect();
        let forward = v.iter().copied().collect::<CompensatedSum>().value();
        v.reverse();
        let backward = v.iter().copied().collect::<CompensatedSum>().value();
        assert!((forward - backward).abs() <= 1e-12 * forward.abs());
    }
}
