//! Synthetic featured point sets built from rigid templates, the validity
//! rule used for purification, and file persistence.

pub mod persist;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{apply_rigid, center_coords, norm_sq3, random_rotation_from, sub3, Geometry, PointSet, Translation, Vec3};
use crate::seed::derive_seed;

/// Geometric stand-in for chemical validity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidityRule {
    pub min_pair_dist: f64,
    pub max_radius: f64,
    /// Required gap between the largest and second-largest feature entry.
    pub onehot_margin: f64,
}

impl Default for ValidityRule {
    fn default() -> Self {
        ValidityRule {
            min_pair_dist: 0.5,
            max_radius: 5.0,
            onehot_margin: 0.5,
        }
    }
}

impl ValidityRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_pair_dist > 0.0 && self.min_pair_dist < self.max_radius) {
            return Err(Error::InvalidConfig("need 0 < min_pair_dist < max_radius".into()));
        }
        if !(self.onehot_margin > 0.0 && self.onehot_margin <= 1.0) {
            return Err(Error::InvalidConfig("onehot_margin must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Outcome of [`is_valid`]; `reason` names the first failed clause.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Validity {
    pub valid: bool,
    pub reason: Option<&'static str>,
}

impl Validity {
    const OK: Validity = Validity { valid: true, reason: None };

    fn fail(reason: &'static str) -> Self {
        Validity {
            valid: false,
            reason: Some(reason),
        }
    }
}

pub fn min_pair_distance(coords: &[Vec3]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..coords.len() {
        for j in i + 1..coords.len() {
            best = best.min(norm_sq3(sub3(coords[i], coords[j])));
        }
    }
    best.sqrt()
}

fn feature_margin(row: &[f64]) -> f64 {
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &v in row {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    first - second
}

pub fn is_valid(g: &Geometry, rule: &ValidityRule) -> Validity {
    if min_pair_distance(g.coords()) < rule.min_pair_dist {
        return Validity::fail("min_pair_dist");
    }
    if g.coords().iter().any(|p| norm_sq3(*p).sqrt() > rule.max_radius) {
        return Validity::fail("max_radius");
    }
    if g.features().iter().any(|row| !(feature_margin(row) >= rule.onehot_margin)) {
        return Validity::fail("onehot_margin");
    }
    Validity::OK
}

/// Replace each feature row by the one-hot of its argmax (lowest index on ties).
pub fn snap_onehot(g: &Geometry) -> Geometry {
    let features = g
        .features()
        .iter()
        .map(|row| {
            let mut best = 0;
            for (i, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = i;
                }
            }
            (0..row.len()).map(|i| if i == best { 1.0 } else { 0.0 }).collect()
        })
        .collect();
    g.with_rows(g.coords().to_vec(), features)
}

/// Parameters of the template distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemplateSpec {
    pub num_templates: usize,
    /// Template `i` has `atoms_per_template[i % len]` points.
    pub atoms_per_template: Vec<usize>,
    /// Radius of the ball template points are drawn from.
    pub coord_scale: f64,
    pub feature_classes: usize,
    pub jitter_sigma: f64,
    pub seed: u64,
    pub validity: ValidityRule,
}

impl Default for TemplateSpec {
    fn default() -> Self {
        TemplateSpec {
            num_templates: 4,
            atoms_per_template: vec![5, 6, 7, 8],
            coord_scale: 2.0,
            feature_classes: 4,
            jitter_sigma: 0.05,
            seed: 0,
            validity: ValidityRule::default(),
        }
    }
}

/// Per-sample attempt cap.
const REJECTION_WINDOW: usize = 200;
/// Attempts needed before the overall rejection rate is judged.
const MIN_MONITORED_ATTEMPTS: usize = 50;
const MAX_REJECTION_RATE: f64 = 0.5;

impl TemplateSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_templates == 0 || self.atoms_per_template.is_empty() {
            return Err(Error::InvalidConfig("need at least one template and one size".into()));
        }
        if self.atoms_per_template.iter().any(|&n| n < 2) {
            return Err(Error::InvalidConfig("template sizes must be at least 2".into()));
        }
        if !(self.jitter_sigma >= 0.0) || !(self.coord_scale > 0.0) || self.feature_classes == 0 {
            return Err(Error::InvalidConfig("need jitter_sigma >= 0, coord_scale > 0, feature_classes >= 1".into()));
        }
        self.validity.validate()
    }

    pub fn template_size(&self, t: usize) -> usize {
        self.atoms_per_template[t % self.atoms_per_template.len()]
    }

    /// Draw the rigid templates: points in a ball with a class label each,
    /// rejection-sampled to satisfy the validity rule with slack for jitter.
    pub fn templates(&self) -> Result<Vec<Geometry>> {
        self.validate()?;
        let rule = &self.validity;
        let min_dist = 2.0 * rule.min_pair_dist;
        (0..self.num_templates)
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, 0, t as u64));
                let n = self.template_size(t);
                for _ in 0..10_000 {
                    let pts: Vec<Vec3> = (0..n).map(|_| point_in_ball(self.coord_scale, &mut rng)).collect();
                    let pts = center_coords(&pts);
                    let radius = pts.iter().map(|p| norm_sq3(*p).sqrt()).fold(0.0, f64::max);
                    if min_pair_distance(&pts) >= min_dist && radius <= rule.max_radius - rule.min_pair_dist {
                        let features = (0..n)
                            .map(|_| {
                                let c = rng.random_range(0..self.feature_classes);
                                (0..self.feature_classes).map(|j| if j == c { 1.0 } else { 0.0 }).collect()
                            })
                            .collect();
                        return Geometry::new(pts, features, Some(format!("template-{t}")));
                    }
                }
                Err(Error::InconsistentSpec(format!(
                    "cannot place {n} points {min_dist} apart within radius {}",
                    self.coord_scale
                )))
            })
            .collect()
    }
}

fn point_in_ball(radius: f64, rng: &mut impl Rng) -> Vec3 {
    loop {
        let p = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        if norm_sq3(p) <= 1.0 {
            return [radius * p[0], radius * p[1], radius * p[2]];
        }
    }
}

/// One sample from template draws; returns the sample and the attempts used.
fn draw_sample(spec: &TemplateSpec, templates: &[Geometry], seed: u64) -> Result<(Geometry, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=REJECTION_WINDOW {
        let t = rng.random_range(0..templates.len());
        let rotated = apply_rigid(&templates[t], &random_rotation_from(&mut rng), &Translation::default());
        let jittered: Vec<Vec3> = rotated
            .coords()
            .iter()
            .map(|p| {
                let mut q = *p;
                for v in &mut q {
                    *v += spec.jitter_sigma * rng.sample::<f64, _>(StandardNormal);
                }
                q
            })
            .collect();
        let g = rotated.with_rows(center_coords(&jittered), rotated.features().to_vec());
        if is_valid(&g, &spec.validity).valid {
            return Ok((g, attempt));
        }
    }
    Err(Error::InconsistentSpec(format!("no valid sample in {REJECTION_WINDOW} attempts")))
}

/// `count` samples: random template, random rotation, Gaussian jitter, recentered.
/// Every sample satisfies `spec.validity`.
pub fn make_dataset(spec: &TemplateSpec, count: usize) -> Result<Vec<Geometry>> {
    if count == 0 {
        return Err(Error::InvalidConfig("count must be at least 1".into()));
    }
    let templates = spec.templates()?;
    let draws: Vec<(Geometry, usize)> = (0..count)
        .into_par_iter()
        .map(|i| draw_sample(spec, &templates, derive_seed(spec.seed, 1, i as u64)))
        .collect::<Result<_>>()?;
    let attempts: usize = draws.iter().map(|(_, a)| a).sum();
    let rejection = 1.0 - count as f64 / attempts as f64;
    if attempts >= MIN_MONITORED_ATTEMPTS && rejection > MAX_REJECTION_RATE {
        return Err(Error::InconsistentSpec(format!("rejection rate {:.1}%", 100.0 * rejection)));
    }
    Ok(draws.into_iter().map(|(g, _)| g).collect())
}

/// Empirical distribution of point counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeHistogram {
    pub counts: BTreeMap<usize, usize>,
}

impl SizeHistogram {
    pub fn from_geometries<P: PointSet>(data: &[P]) -> Self {
        let mut counts = BTreeMap::new();
        for g in data {
            *counts.entry(g.n()).or_insert(0) += 1;
        }
        SizeHistogram { counts }
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Panics on an empty histogram.
    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let mut r = rng.random_range(0..self.total());
        for (&n, &c) in &self.counts {
            if r < c {
                return n;
            }
            r -= c;
        }
        unreachable!("draw below total count")
    }
}
