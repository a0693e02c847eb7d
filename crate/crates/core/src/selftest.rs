//! Built-in verification suites run by `geomflow selftest`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::alignment::{brute_force_omt, hungarian, kabsch, rotation_objective, solve_omt, CostMatrix};
use crate::costs::{mean_and_stderr, optimal_molecule_cost, OmtMode};
use crate::data::{make_dataset, SizeHistogram, TemplateSpec};
use crate::error::Result;
use crate::flow::{estimate_couplings, integrate, random_couplings, train, SolverConfig, TrainConfig};
use crate::geometry::{
    apply_permutation, apply_rigid, center_coords, com_max_abs, project_zero_com, random_rotation_from, Geometry, LatentGeometry,
    Permutation, PointSet, Translation, Vec3,
};
use crate::nn::{adam_step, grad_check, AdamState, EgnnStack, Mat, ModelArch, Parameterized, Tape, VectorFieldModel};

/// One measured check: passes when `measured <= tolerance` (or `>=` when `at_least`).
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub at_least: bool,
}

impl Check {
    fn at_most(name: &str, measured: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            tolerance,
            at_least: false,
        }
    }

    fn at_least(name: &str, measured: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            tolerance,
            at_least: true,
        }
    }

    pub fn passed(&self) -> bool {
        if self.at_least {
            self.measured >= self.tolerance
        } else {
            self.measured <= self.tolerance
        }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let op = if self.at_least { ">=" } else { "<=" };
        write!(f, "{status} {:<40} {:.3e} {op} {:.3e}", self.name, self.measured, self.tolerance)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Align,
    Nn,
    Flow,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Align => "align",
            Suite::Nn => "nn",
            Suite::Flow => "flow",
        }
    }

    pub fn run(self) -> Result<Vec<Check>> {
        match self {
            Suite::Align => align_suite(),
            Suite::Nn => nn_suite(),
            Suite::Flow => flow_suite(),
        }
    }
}

fn gaussian_latent(n: usize, k: usize, rng: &mut impl Rng) -> LatentGeometry {
    let x: Vec<Vec3> = (0..n)
        .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)])
        .collect();
    let h = (0..n).map(|_| (0..k).map(|_| rng.sample(StandardNormal)).collect()).collect();
    LatentGeometry::new(center_coords(&x), h).expect("consistent shapes")
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn align_suite() -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut checks = Vec::new();

    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=6);
        let c = CostMatrix::new(n, (0..n * n).map(|_| rng.random::<f64>()).collect())?;
        let best = permutations(n)
            .into_iter()
            .map(|p| c.assignment_cost(&Permutation::new(p).expect("valid")))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((c.assignment_cost(&hungarian(&c)) - best).abs());
    }
    checks.push(Check::at_most("hungarian vs enumeration", worst, 0.0));

    let mut recovery: f64 = 0.0;
    let mut beaten: f64 = 0.0;
    for _ in 0..50 {
        let x = gaussian_latent(6, 0, &mut rng);
        let r0 = random_rotation_from(&mut rng);
        let moved: Vec<Vec3> = x.coords().iter().map(|&p| r0.apply(p)).collect();
        let r = kabsch(&moved, x.coords())?;
        recovery = recovery.max(r.frobenius_distance(&r0.transpose()));
        let y = gaussian_latent(6, 0, &mut rng);
        let r = kabsch(x.coords(), y.coords())?;
        let best = rotation_objective(&r, x.coords(), y.coords());
        for _ in 0..200 {
            let q = random_rotation_from(&mut rng);
            beaten = beaten.max(best - rotation_objective(&q, x.coords(), y.coords()));
        }
    }
    checks.push(Check::at_most("kabsch planted rotation recovery", recovery, 1e-9));
    checks.push(Check::at_most("kabsch vs random rotations", beaten, 1e-12));

    let mut agree = 0usize;
    let mut below: f64 = 0.0;
    let trials = 100;
    for _ in 0..trials {
        let n = rng.random_range(2..=6);
        let z1 = gaussian_latent(n, 2, &mut rng);
        let z0 = gaussian_latent(n, 2, &mut rng);
        let exact = brute_force_omt(&z1, &z0, 0.5)?.cost;
        let heur = solve_omt(&z1, &z0, 0.5, 50)?.cost;
        agree += usize::from((heur - exact).abs() <= 1e-8);
        below = below.max(exact - heur);
    }
    checks.push(Check::at_least("omt oracle agreement rate", agree as f64 / trials as f64, 0.95));
    checks.push(Check::at_most("omt below oracle", below, 1e-9));

    let mut drift: f64 = 0.0;
    for _ in 0..30 {
        let a = gaussian_latent(5, 2, &mut rng);
        let b = gaussian_latent(5, 2, &mut rng);
        let base = optimal_molecule_cost(&a, &b, 0.5, OmtMode::Exact)?;
        let t = Translation([rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]);
        let moved = apply_rigid(&b, &random_rotation_from(&mut rng), &t);
        let moved = apply_permutation(&moved, &Permutation::random(5, &mut rng))?;
        drift = drift.max((optimal_molecule_cost(&a, &project_zero_com(&moved), 0.5, OmtMode::Exact)? - base).abs());
    }
    checks.push(Check::at_most("oracle cost transform invariance", drift, 1e-8));
    Ok(checks)
}

fn nn_suite() -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut checks = Vec::new();
    let (mut rot, mut inv, mut perm, mut com) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for seed in 0..10 {
        let model = VectorFieldModel::init(ModelArch::new(3, 2, 12, 3), seed)?;
        let n = rng.random_range(2..=8);
        let z = gaussian_latent(n, 2, &mut rng);
        let t = rng.random::<f64>();
        let v = model.forward(&z, t)?;
        let r = random_rotation_from(&mut rng);
        let vr = model.forward(&apply_rigid(&z, &r, &Translation::default()), t)?;
        let expected = apply_rigid(&v, &r, &Translation::default());
        for (a, b) in vr.coords().iter().zip(expected.coords()) {
            for axis in 0..3 {
                rot = rot.max((a[axis] - b[axis]).abs());
            }
        }
        for (a, b) in vr.features().iter().flatten().zip(v.features().iter().flatten()) {
            inv = inv.max((a - b).abs());
        }
        let p = Permutation::random(n, &mut rng);
        let vp = model.forward(&apply_permutation(&z, &p)?, t)?;
        let pv = apply_permutation(&v, &p)?;
        if vp != pv {
            perm = 1.0;
        }
        let mut input = Mat::zeros(n, 3);
        for (i, row) in z.features().iter().enumerate() {
            input.row_mut(i)[..2].copy_from_slice(row);
            input.set(i, 2, t);
        }
        for (x, _) in model.velocity.trace(z.coords(), &input) {
            com = com.max(com_max_abs(&x));
        }
    }
    checks.push(Check::at_most("velocity rotation equivariance", rot, 1e-7));
    checks.push(Check::at_most("velocity feature invariance", inv, 1e-7));
    checks.push(Check::at_most("velocity permutation mismatch", perm, 0.0));
    checks.push(Check::at_most("per-layer zero CoM", com, 1e-9));

    let mut worst: f64 = 0.0;
    for seed in 0..3 {
        let model = VectorFieldModel::init(ModelArch::new(3, 2, 8, 2), seed)?;
        let z = gaussian_latent(5, 2, &mut rng);
        let adj = gaussian_latent(5, 2, &mut rng);
        let mut tape = Tape::new();
        model.forward_recorded(&z, 0.5, &mut tape)?;
        let mut grad = model.velocity.zeros_like();
        model.backward(&tape, &adj, &mut grad)?;
        let adj_flat = adj.to_flat();
        let loss = |s: &EgnnStack| {
            let mut m = model.clone();
            m.velocity = s.clone();
            m.forward(&z, 0.5)
                .map(|v| v.to_flat().iter().zip(&adj_flat).map(|(a, b)| a * b).sum::<f64>())
                .unwrap_or(f64::NAN)
        };
        worst = worst.max(grad_check(&model.velocity, loss, &grad).max_rel_error);
    }
    checks.push(Check::at_most("gradient check max relative error", worst, 1e-4));

    let mut p = vec![1.0, 2.0];
    let mut state = AdamState::new(2);
    adam_step(&mut p, &[0.0, 0.0], &mut state, 0.1);
    checks.push(Check::at_most("adam zero-gradient drift", (p[0] - 1.0).abs() + (p[1] - 2.0).abs(), 0.0));
    Ok(checks)
}

fn flow_suite() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let c = vec![0.3, -1.7, 2.9];
    let cc = c.clone();
    let (y, _) = integrate(move |_, _| Ok(cc.clone()), &[1.0, 2.0, 3.0], &SolverConfig::euler(7), |_, _| {})?;
    let err = y.iter().zip([1.3, 2.0 - 1.7, 3.0 + 2.9]).map(|(a, b): (&f64, f64)| (a - b).abs()).fold(0.0, f64::max);
    checks.push(Check::at_most("euler constant field", err, 0.0));
    let (y, _) = integrate(|_, y| Ok(y.iter().map(|v| -0.5 * v).collect()), &[1.0, -2.0], &SolverConfig::rk4(200), |_, _| {})?;
    let err = (y[0] - (-0.5f64).exp()).abs().max((y[1] + 2.0 * (-0.5f64).exp()).abs());
    checks.push(Check::at_most("rk4 linear field", err, 1e-10));

    // Small-scale coupling-cost comparison.
    let spec = TemplateSpec::default();
    let data: Vec<Geometry> = make_dataset(&spec, 200)?;
    let cfg = TrainConfig {
        steps: 300,
        batch_size: 16,
        hidden: 16,
        flow_layers: 2,
        lr: 2e-3,
        identity_latent: true,
        ..Default::default()
    };
    let model = train(&data, &cfg)?.model;
    let sizes = SizeHistogram::from_geometries(&data);
    let count = 300;
    let (est, _) = estimate_couplings(&model, &sizes, count, &cfg.solver, &|_: &Geometry| true, 1)?;
    let rnd = random_couplings(&model, &data, count, cfg.sigma0, 2)?;
    let mode = OmtMode::Heuristic { max_iters: 20 };
    let costs = |pairs: &[crate::flow::CouplingPair]| -> Result<Vec<f64>> {
        pairs.iter().map(|p| optimal_molecule_cost(&p.z0, &p.z1, cfg.lambda, mode)).collect()
    };
    let (me, se) = mean_and_stderr(&costs(&est.pairs)?);
    let (mr, sr) = mean_and_stderr(&costs(&rnd.pairs)?);
    checks.push(Check::at_most(
        "estimated minus random coupling cost (2 se)",
        me - mr - 2.0 * (se * se + sr * sr).sqrt(),
        0.0,
    ));
    Ok(checks)
}
