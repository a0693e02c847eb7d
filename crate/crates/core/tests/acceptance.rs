//! Acceptance gate. Each test prints one `criterion N: PASS|FAIL ...` line to
//! stderr (uncaptured) and then asserts.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use geomflow::alignment::{brute_force_omt, hungarian, kabsch, rotation_objective, solve_omt, CostMatrix};
use geomflow::costs::{mean_and_stderr, optimal_molecule_cost, CostSpace, OmtMode};
use geomflow::data::persist::{
    load_checkpoint, load_geometries, load_metrics, load_pairs, save_checkpoint, save_geometries, save_pairs, append_metrics,
    Checkpoint, RunMetrics,
};
use geomflow::data::{is_valid, make_dataset, SizeHistogram, TemplateSpec};
use geomflow::experiments::{lambda_ablation, modality_insensitivity, LambdaRow};
use geomflow::flow::reflow::median_of;
use geomflow::flow::{
    estimate_couplings, fine_tune, fm_loss, integrate, random_couplings, reflow, sample_noise, sample_ode,
    CouplingPair, CouplingSet, PairSource, ReflowOutcome, SolverConfig, TrainConfig,
};
use geomflow::geometry::{
    apply_permutation, apply_rigid, com_max_abs, project_zero_com, random_rotation_from, Geometry, LatentGeometry, Permutation,
    PointSet, Translation, Vec3,
};
use geomflow::nn::{grad_check, Mat, ModelArch, Parameterized, VectorFieldModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn report(id: usize, passed: bool, detail: impl std::fmt::Display) {
    let status = if passed { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr();
    let _ = writeln!(err, "criterion {id:>2}: {status}  {detail}");
}

fn gaussian(n: usize, k: usize, rng: &mut impl Rng) -> LatentGeometry {
    let x: Vec<Vec3> = (0..n)
        .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)])
        .collect();
    let h = (0..n).map(|_| (0..k).map(|_| rng.sample(StandardNormal)).collect()).collect();
    project_zero_com(&LatentGeometry::new(x, h).unwrap())
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

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn l2(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

// Shared fixture: synthetic dataset and a flow model trained on it.

struct Fixture {
    spec: TemplateSpec,
    data: Vec<Geometry>,
    cfg: TrainConfig,
    model: VectorFieldModel,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let spec = TemplateSpec::default();
        let data = make_dataset(&spec, 2000).unwrap();
        let cfg = TrainConfig {
            steps: 1500,
            hidden: 32,
            lr: 1e-3,
            identity_latent: true,
            reflow_rounds: 1,
            reflow_pairs: Some(1000),
            reflow_steps: 1000,
            validity: spec.validity.clone(),
            ..Default::default()
        };
        let model = geomflow::flow::train(&data, &cfg).unwrap().model;
        Fixture { spec, data, cfg, model }
    })
}

fn reflowed(purify: bool) -> &'static ReflowOutcome {
    static ON: OnceLock<ReflowOutcome> = OnceLock::new();
    static OFF: OnceLock<ReflowOutcome> = OnceLock::new();
    let cell = if purify { &ON } else { &OFF };
    cell.get_or_init(|| {
        let f = fixture();
        let rule = f.spec.validity.clone();
        let cfg = TrainConfig { purify, ..f.cfg.clone() };
        reflow(&f.model, &f.data, &cfg, &|g: &Geometry| is_valid(g, &rule).valid).unwrap()
    })
}

#[test]
fn criterion_01_assignment_exactness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let perms: Vec<Vec<Vec<usize>>> = (0..=7).map(permutations).collect();
    let mut mismatches = 0;
    for trial in 0..500 {
        let n = 2 + trial % 6;
        let c: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>() * 10.0).collect();
        let m = CostMatrix::new(n, c.clone()).unwrap();
        let cost_of = |p: &[usize]| (0..n).map(|j| c[p[j] * n + j]).sum::<f64>();
        let best = perms[n].iter().map(|p| cost_of(p)).fold(f64::INFINITY, f64::min);
        if cost_of(hungarian(&m).as_slice()) != best {
            mismatches += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = mismatches == 0 && secs < 10.0;
    report(1, ok, format!("hungarian vs enumeration: {mismatches}/500 mismatches, {secs:.2}s"));
    assert!(ok);
}

#[test]
fn criterion_02_rotation_optimality() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_recovery: f64 = 0.0;
    let mut beaten = 0;
    for _ in 0..200 {
        let n = rng.random_range(3..=10);
        let x = gaussian(n, 0, &mut rng);
        let r0 = random_rotation_from(&mut rng);
        let noise_scale = 0.3;
        let target: Vec<Vec3> = x.coords().iter().map(|&p| r0.apply(p)).collect();
        let r = kabsch(&target, x.coords()).unwrap();
        worst_recovery = worst_recovery.max(r.frobenius_distance(&r0.transpose()));

        // Same rotation with noisy correspondences: optimum is no longer zero.
        let noisy: Vec<Vec3> = target
            .iter()
            .map(|p| {
                [
                    p[0] + noise_scale * rng.sample::<f64, _>(StandardNormal),
                    p[1] + noise_scale * rng.sample::<f64, _>(StandardNormal),
                    p[2] + noise_scale * rng.sample::<f64, _>(StandardNormal),
                ]
            })
            .collect();
        let noisy = geomflow::geometry::center_coords(&noisy);
        let rn = kabsch(&noisy, x.coords()).unwrap();
        let obj = rotation_objective(&rn, &noisy, x.coords());
        let mut best_random = |t: &[Vec3]| {
            (0..10_000)
                .map(|_| rotation_objective(&random_rotation_from(&mut rng), t, x.coords()))
                .fold(f64::INFINITY, f64::min)
        };
        let obj_planted = rotation_objective(&r, &target, x.coords());
        if obj_planted > best_random(&target) || obj > best_random(&noisy) {
            beaten += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst_recovery <= 1e-9 && beaten == 0 && secs < 30.0;
    report(
        2,
        ok,
        format!("kabsch recovery max frobenius {worst_recovery:.2e}, beaten by random on {beaten}/200, {secs:.2}s"),
    );
    assert!(ok);
}

#[test]
fn criterion_03_omt_oracle_agreement() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut agree, mut single_agree) = (0usize, 0usize);
    let mut below: f64 = 0.0;
    let mut single_gap: f64 = 0.0;
    let trials = 300;
    for _ in 0..trials {
        let n = rng.random_range(2..=6);
        let z1 = gaussian(n, 3, &mut rng);
        let z0 = gaussian(n, 3, &mut rng);
        let exact = brute_force_omt(&z1, &z0, 0.5).unwrap().cost;
        let alt = solve_omt(&z1, &z0, 0.5, 50).unwrap().cost;
        let single = solve_omt(&z1, &z0, 0.5, 1).unwrap().cost;
        agree += usize::from((alt - exact).abs() <= 1e-8);
        single_agree += usize::from((single - exact).abs() <= 1e-8);
        below = below.max(exact - alt);
        single_gap += (single - exact) / trials as f64;
    }
    let secs = start.elapsed().as_secs_f64();
    let rate = agree as f64 / trials as f64;
    let ok = rate >= 0.95 && below <= 1e-9 && secs < 60.0;
    report(
        3,
        ok,
        format!(
            "alternating agreement {:.1}%, max below oracle {below:.1e}; single pass agreement {:.1}%, mean gap {single_gap:.4}; {secs:.2}s",
            100.0 * rate,
            100.0 * single_agree as f64 / trials as f64
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_04_transform_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let n = rng.random_range(2..=6);
        let a = gaussian(n, 2, &mut rng);
        let b = gaussian(n, 2, &mut rng);
        let base = brute_force_omt(&a, &b, 0.5).unwrap().cost;
        let t = Translation([rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]);
        let r = random_rotation_from(&mut rng);
        let p = Permutation::random(n, &mut rng);
        let moved = |g: &LatentGeometry| project_zero_com(&apply_permutation(&apply_rigid(g, &r, &t), &p).unwrap());
        let cost = if trial % 2 == 0 {
            brute_force_omt(&moved(&a), &b, 0.5).unwrap().cost
        } else {
            brute_force_omt(&a, &moved(&b), 0.5).unwrap().cost
        };
        worst = worst.max((cost - base).abs());
    }
    let ok = worst <= 1e-8;
    report(4, ok, format!("max oracle cost change {worst:.2e} over 100 transforms"));
    assert!(ok);
}

#[test]
fn criterion_05_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut rot, mut inv, mut com) = (0.0f64, 0.0f64, 0.0f64);
    let mut perm_mismatch = 0;
    for draw in 0..50u64 {
        let arch = if draw % 2 == 0 {
            ModelArch::new(4, 2, 16, 3)
        } else {
            ModelArch::identity(4, 16, 3)
        };
        let model = VectorFieldModel::init(arch, draw).unwrap();
        let k = model.latent_k();
        let n = rng.random_range(1..=9);
        let z = gaussian(n, k, &mut rng);
        let t = rng.random::<f64>();
        let v = model.forward(&z, t).unwrap();
        let r = random_rotation_from(&mut rng);
        let zero = Translation::default();
        let vr = model.forward(&apply_rigid(&z, &r, &zero), t).unwrap();
        for (a, &b) in vr.coords().iter().zip(v.coords()) {
            let rb = r.apply(b);
            rot = rot.max((0..3).map(|i| (a[i] - rb[i]).abs()).fold(0.0, f64::max));
        }
        for (a, b) in vr.features().iter().zip(v.features()) {
            inv = inv.max(max_abs_diff(a, b));
        }
        let p = Permutation::random(n, &mut rng);
        let vp = model.forward(&apply_permutation(&z, &p).unwrap(), t).unwrap();
        if vp != apply_permutation(&v, &p).unwrap() {
            perm_mismatch += 1;
        }
        com = com.max(com_max_abs(v.coords()));
        let mut input = Mat::zeros(n, k + 1);
        for (i, row) in z.features().iter().enumerate() {
            input.row_mut(i)[..k].copy_from_slice(row);
            input.set(i, k, t);
        }
        for (x, _) in model.velocity.trace(z.coords(), &input) {
            com = com.max(com_max_abs(&x));
        }
    }
    let ok = rot <= 1e-7 && inv <= 1e-7 && perm_mismatch == 0 && com <= 1e-9;
    report(
        5,
        ok,
        format!("rotation {rot:.2e}, feature invariance {inv:.2e}, permutation mismatches {perm_mismatch}, per-layer CoM {com:.2e}"),
    );
    assert!(ok);
}

#[test]
fn criterion_06_gradient_correctness() {
    let mut worst: f64 = 0.0;
    let mut params = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let model = VectorFieldModel::init(ModelArch::new(4, 2, 12, 2), seed).unwrap();
        params = model.velocity.param_count();
        let n = rng.random_range(2..=6);
        let pair = CouplingPair::new(gaussian(n, 2, &mut rng), gaussian(n, 2, &mut rng), PairSource::Random)
            .unwrap()
            .assume_aligned();
        let t = rng.random::<f64>();
        let mut grad = model.velocity.zeros_like();
        fm_loss(&model, &pair, t, Some((&mut grad, 1.0))).unwrap();
        let loss = |s: &geomflow::nn::EgnnStack| {
            let mut m = model.clone();
            m.velocity = s.clone();
            fm_loss(&m, &pair, t, None).unwrap()
        };
        let rep = grad_check(&model.velocity, loss, &grad);
        worst = worst.max(rep.max_rel_error);
    }
    let ok = params <= 5000 && worst <= 1e-4;
    report(6, ok, format!("{params} parameters, max relative error {worst:.2e} over 10 seeds"));
    assert!(ok);
}

#[test]
fn criterion_07_estimated_coupling_cost() {
    let f = fixture();
    let sizes = SizeHistogram::from_geometries(&f.data);
    let rule = f.spec.validity.clone();
    let count = 1000;
    let (est, _) = estimate_couplings(&f.model, &sizes, count, &f.cfg.solver, &|g: &Geometry| is_valid(g, &rule).valid, 71).unwrap();
    let rnd = random_couplings(&f.model, &f.data, count, f.cfg.sigma0, 72).unwrap();
    let mode = OmtMode::Heuristic { max_iters: 50 };
    let costs = |set: &CouplingSet| -> Vec<f64> {
        set.pairs
            .iter()
            .map(|p| optimal_molecule_cost(&p.z0, &p.z1, f.cfg.lambda, mode).unwrap())
            .collect()
    };
    let (me, se) = mean_and_stderr(&costs(&est));
    let (mr, sr) = mean_and_stderr(&costs(&rnd));
    let se_diff = (se * se + sr * sr).sqrt();
    let ok = est.len() >= 1000 && rnd.len() >= 1000 && me <= mr + 2.0 * se_diff;
    report(
        7,
        ok,
        format!(
            "estimated {me:.4} vs random {mr:.4} (+2 se {:.4}), {} vs {} pairs",
            2.0 * se_diff,
            est.len(),
            rnd.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_08_reflow_reduces_steps() {
    let f = fixture();
    let after = reflowed(true);
    let sizes = SizeHistogram::from_geometries(&f.data);
    let steps = |m: &VectorFieldModel| -> f64 {
        let s: Vec<usize> = geomflow::flow::generate(m, &sizes, 200, &f.cfg.solver, 81)
            .unwrap()
            .into_iter()
            .map(|(_, s)| s)
            .collect();
        median_of(&s)
    };
    let before = steps(&f.model);
    let after = steps(&after.model);
    let ok = after <= before;
    report(8, ok, format!("median adaptive steps {before} -> {after} (ratio {:.3})", after / before));
    assert!(ok);
}

#[test]
fn criterion_09_purification() {
    let f = fixture();
    let rule = &f.spec.validity;
    let rate = |out: &ReflowOutcome| -> f64 {
        let ok = out
            .coupling
            .pairs
            .iter()
            .filter(|p| is_valid(&out_model_decode(f, &p.z1), rule).valid)
            .count();
        ok as f64 / out.coupling.len() as f64
    };
    let on = reflowed(true);
    let off = reflowed(false);
    let on_rate = rate(on);
    let off_rate = rate(off);
    let ok = on_rate == 1.0 && off_rate < 1.0;
    report(
        9,
        ok,
        format!(
            "retained validity purify on {:.1}% ({} pairs), purify off {:.1}% ({} pairs)",
            100.0 * on_rate,
            on.coupling.len(),
            100.0 * off_rate,
            off.coupling.len()
        ),
    );
    assert!(ok);
}

// Retained targets are decoded with the pre-reflow model: reflow never
// changes the decoder.
fn out_model_decode(f: &Fixture, z: &LatentGeometry) -> Geometry {
    f.model.decode(z).unwrap()
}

#[test]
fn criterion_10_lambda_ablation() {
    let f = fixture();
    let base = TrainConfig {
        steps: 300,
        hidden: 16,
        ..f.cfg.clone()
    };
    let lambdas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let rows: Vec<LambdaRow> = lambda_ablation(&f.data[..500], &base, &lambdas, 200).unwrap();
    let mut table = String::from(LambdaRow::CSV_HEADER);
    for r in &rows {
        table.push('\n');
        table.push_str(&r.csv_row());
    }
    eprintln!("{table}");

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let pairs: Vec<(LatentGeometry, LatentGeometry)> = (0..50)
        .map(|_| {
            let n = rng.random_range(2..=6);
            (gaussian(n, 3, &mut rng), gaussian(n, 3, &mut rng))
        })
        .collect();
    let mut worst: f64 = 0.0;
    for lambda in [0.0, 1.0] {
        for mode in [OmtMode::Exact, OmtMode::Heuristic { max_iters: 50 }] {
            worst = worst.max(modality_insensitivity(lambda, &pairs, mode, 11).unwrap());
        }
    }
    let table_ok = rows.len() == lambdas.len()
        && rows.iter().all(|r| r.own.total_cost.is_finite() && r.reference.total_cost.is_finite())
        && rows[0].own.coord_part == 0.0
        && rows[4].own.feature_part == 0.0;
    let ok = table_ok && worst <= 1e-12;
    report(10, ok, format!("{} table rows, max cost change under ignored-modality perturbation {worst:.1e}", rows.len()));
    assert!(ok);
}

#[test]
fn criterion_11_ode_solvers() {
    // Closed forms: constant field, linear field y' = a y.
    let c = [0.7, -1.3, 2.2, 0.1];
    let y0 = [1.0, 2.0, -3.0, 0.5];
    let mut euler_err: f64 = 0.0;
    for steps in [1, 3, 10, 100, 1000] {
        let (y, _) = integrate(|_, _| Ok(c.to_vec()), &y0, &SolverConfig::euler(steps), |_, _| {}).unwrap();
        let exact: Vec<f64> = y0.iter().zip(&c).map(|(a, b)| a + b).collect();
        euler_err = euler_err.max(max_abs_diff(&y, &exact));
    }
    let a = -0.8;
    let (y, _) = integrate(|_, y| Ok(y.iter().map(|v| a * v).collect()), &y0, &SolverConfig::rk4(200), |_, _| {}).unwrap();
    let exact: Vec<f64> = y0.iter().map(|v| v * a.exp()).collect();
    let rk4_err = max_abs_diff(&y, &exact);

    let f = fixture();
    let sizes = SizeHistogram::from_geometries(&f.data);
    let adaptive = SolverConfig::adaptive(1e-4, 1e-5);
    let reference = SolverConfig::rk4(1000);
    let mut worst_ratio: f64 = 0.0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1100 + seed);
        let z0 = sample_noise(sizes.sample(&mut rng), f.model.latent_k(), seed);
        let (za, _) = sample_ode(&f.model, &z0, &adaptive).unwrap();
        let (zr, _) = sample_ode(&f.model, &z0, &reference).unwrap();
        let diff: Vec<f64> = za.to_flat().iter().zip(zr.to_flat()).map(|(p, q)| p - q).collect();
        let tol = 10.0 * (adaptive.rtol * l2(&zr.to_flat())).max(adaptive.atol);
        worst_ratio = worst_ratio.max(l2(&diff) / tol);
    }
    let ok = euler_err == 0.0 && rk4_err <= 1e-10 && worst_ratio <= 1.0;
    report(
        11,
        ok,
        format!("euler constant error {euler_err:.1e}, rk4 linear error {rk4_err:.1e}, adaptive vs rk4 worst error/tolerance {worst_ratio:.3}"),
    );
    assert!(ok);
}

#[test]
fn criterion_12_memorization() {
    let data = make_dataset(&TemplateSpec::default(), 1).unwrap();
    let mut model = VectorFieldModel::init(ModelArch::identity(4, 32, 3), 0).unwrap();
    let z1 = model.encode(&data[0], 0.0, 0).unwrap();
    let z0 = sample_noise(z1.n(), model.latent_k(), 7);
    let pair = CouplingPair::new(z0.clone(), z1, PairSource::Random).unwrap().align(0.5, 50).unwrap();
    let target = pair.z1.clone();
    let set = CouplingSet::new(CostSpace::Latent, vec![pair.clone()]);
    let cfg = TrainConfig {
        lr: 1e-2,
        batch_size: 16,
        cosine_lr: true,
        ..Default::default()
    };
    let budget = 6000;
    fine_tune(&mut model, &set, &cfg, budget, 0).unwrap();
    let grid = 101;
    let loss = (0..grid)
        .map(|i| fm_loss(&model, &pair, i as f64 / (grid - 1) as f64, None).unwrap())
        .sum::<f64>()
        / grid as f64;
    let (z, _) = sample_ode(&model, &z0, &SolverConfig::euler(1)).unwrap();
    let err = max_abs_diff(&z.to_flat(), &target.to_flat());
    let ok = loss < 1e-3 && err <= 1e-2;
    report(12, ok, format!("loss {loss:.2e} after {budget} steps, one-step Euler max entry error {err:.2e}"));
    assert!(ok);
}

fn run_cli(dir: &Path, args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_geomflow"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn pipeline(dir: &Path) -> (Vec<Vec<u8>>, Vec<RunMetrics>, String) {
    std::fs::write(
        dir.join("cfg.json"),
        r#"{"steps":60,"hidden":8,"flow_layers":2,"batch_size":8,"identity_latent":true,"lr":0.002,"reflow_pairs":40,"reflow_steps":20}"#,
    )
    .unwrap();
    let seed = ["--seed", "13"];
    run_cli(dir, &[&seed[..], &["gendata", "--count", "60", "--out", "d.geoms.jsonl"]].concat());
    run_cli(dir, &[&seed[..], &["train", "--data", "d.geoms.jsonl", "--config", "cfg.json", "--out", "m.ckpt"]].concat());
    run_cli(
        dir,
        &[&seed[..], &["reflow", "--ckpt", "m.ckpt", "--rounds", "1", "--purify", "off", "--out", "r.ckpt", "--pairs-out", "p.bin"]].concat(),
    );
    run_cli(dir, &[&seed[..], &["sample", "--ckpt", "r.ckpt", "--count", "10", "--solver", "rk4", "--steps", "10", "--out", "s.jsonl"]].concat());
    let eval = run_cli(dir, &["eval", "--pairs", "p.bin", "--lambda", "0.5"]);
    let files = ["d.geoms.jsonl", "m.ckpt", "m.ckpt.loss.csv", "r.ckpt", "p.bin", "s.jsonl"]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).unwrap())
        .collect();
    (files, load_metrics(dir.join("metrics.csv")).unwrap(), eval)
}

#[test]
fn criterion_13_determinism_and_persistence() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (fa, ma, ea) = pipeline(a.path());
    let (fb, mb, eb) = pipeline(b.path());
    let strip = |m: &[RunMetrics]| -> Vec<RunMetrics> {
        m.iter()
            .map(|r| RunMetrics {
                wall_seconds: 0.0,
                ..r.clone()
            })
            .collect()
    };
    let reproducible = fa == fb && strip(&ma) == strip(&mb) && ea == eb;

    // Save/load round trips.
    let dir = a.path();
    let data = load_geometries(dir.join("d.geoms.jsonl")).unwrap();
    save_geometries(dir.join("again.jsonl"), &data).unwrap();
    let geoms_ok = load_geometries(dir.join("again.jsonl")).unwrap() == data;
    let ckpt: Checkpoint = load_checkpoint(dir.join("r.ckpt")).unwrap();
    save_checkpoint(dir.join("again.ckpt"), &ckpt).unwrap();
    let ckpt_ok = load_checkpoint(dir.join("again.ckpt")).unwrap() == ckpt
        && std::fs::read(dir.join("again.ckpt")).unwrap() == std::fs::read(dir.join("r.ckpt")).unwrap();
    let pairs = load_pairs(dir.join("p.bin")).unwrap();
    save_pairs(dir.join("again.bin"), &pairs).unwrap();
    let pairs_ok = load_pairs(dir.join("again.bin")).unwrap() == pairs;
    append_metrics(dir.join("again.csv"), &ma).unwrap();
    let metrics_ok = load_metrics(dir.join("again.csv")).unwrap() == ma;
    let cfg = ckpt.config.clone().unwrap();
    let cfg_ok = serde_json::from_str::<TrainConfig>(&serde_json::to_string(&cfg).unwrap()).unwrap() == cfg;

    let ok = reproducible && geoms_ok && ckpt_ok && pairs_ok && metrics_ok && cfg_ok;
    report(
        13,
        ok,
        format!(
            "pipeline reproducible {reproducible}; round trips geoms {geoms_ok} ckpt {ckpt_ok} pairs {pairs_ok} metrics {metrics_ok} config {cfg_ok}"
        ),
    );
    assert!(ok);
}
