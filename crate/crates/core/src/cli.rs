//! Command-line driver. `run` parses arguments and returns the process exit
//! code: 0 success, 1 usage error, 2 data error, 3 self-test failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::costs::{distribution_cost, OmtMode};
use crate::data::persist::{
    append_metrics, load_checkpoint, load_geometries, load_pairs, save_checkpoint, save_geometries, save_loss_curve, save_pairs,
    Checkpoint, RunMetrics,
};
use crate::data::{is_valid, make_dataset, SizeHistogram, TemplateSpec};
use crate::error::{Error, Result};
use crate::flow::reflow::{mean_of, median_of};
use crate::flow::{estimate_couplings, reflow, train, SolverConfig, SolverMethod, TrainConfig};
use crate::geometry::Geometry;
use crate::selftest::Suite;

#[derive(Parser, Debug)]
#[command(name = "geomflow", version, about = "Optimal-transport flow matching on featured point sets")]
pub struct Cli {
    /// Base seed; overrides the seed stored in spec and config files.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread cap (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Align,
    Nn,
    Flow,
    All,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset from a template spec.
    Gendata {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a flow model; writes the checkpoint and `<out>.loss.csv`.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate, purify and refit couplings.
    Reflow {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 1)]
        rounds: usize,
        #[arg(long, value_enum, default_value_t = Toggle::On)]
        purify: Toggle,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        pairs_out: PathBuf,
        /// Training data; defaults to the path recorded in the checkpoint.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Replaces the config stored in the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Generate samples by integrating the learned ODE.
    Sample {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value = "adaptive")]
        solver: String,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        rtol: Option<f64>,
        #[arg(long)]
        atol: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to `metrics.csv` next to `--out`.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Print the transport cost of a coupling file.
    Eval {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        /// Enumerate permutations instead of alternating (n <= 8).
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = 50)]
        omt_iters: usize,
    },
    /// Run the built-in verification suites.
    Selftest {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
    },
}

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_SELFTEST: i32 = 3;

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_data_error() {
                EXIT_DATA
            } else {
                EXIT_USAGE
            }
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::malformed(path, e.to_string()))
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().map(|d| d.join(name)).unwrap_or_else(|| PathBuf::from(name))
}

fn loss_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".loss.csv");
    PathBuf::from(s)
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Gendata { spec, count, out } => {
            let mut spec: TemplateSpec = match spec {
                Some(p) => read_json(p)?,
                None => TemplateSpec::default(),
            };
            if let Some(s) = cli.seed {
                spec.seed = s;
            }
            let data = make_dataset(&spec, *count)?;
            save_geometries(out, &data)?;
            let sizes = SizeHistogram::from_geometries(&data);
            println!("wrote {} geometries to {} (sizes {:?})", data.len(), out.display(), sizes.counts);
        }
        Command::Train { data, config, out } => {
            let mut cfg: TrainConfig = match config {
                Some(p) => read_json(p)?,
                None => TrainConfig::default(),
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let dataset = load_geometries(data)?;
            let start = Instant::now();
            let outcome = train(&dataset, &cfg)?;
            let ckpt = Checkpoint {
                model: outcome.model,
                sizes: SizeHistogram::from_geometries(&dataset),
                config: Some(cfg.clone()),
                data: Some(data.display().to_string()),
            };
            save_checkpoint(out, &ckpt)?;
            save_loss_curve(loss_path(out), &outcome.losses)?;
            let last = outcome.losses.last().copied().unwrap_or(f64::NAN);
            println!(
                "trained {} steps in {:.1}s, final loss {last:.6}, config {}",
                outcome.losses.len(),
                start.elapsed().as_secs_f64(),
                cfg.hash()
            );
        }
        Command::Reflow {
            ckpt,
            rounds,
            purify,
            out,
            pairs_out,
            data,
            config,
            metrics,
        } => {
            let loaded = load_checkpoint(ckpt)?;
            let mut cfg = match config {
                Some(p) => read_json(p)?,
                None => loaded.config.clone().unwrap_or_default(),
            };
            cfg.reflow_rounds = *rounds;
            cfg.purify = *purify == Toggle::On;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let data_path = match (data, &loaded.data) {
                (Some(p), _) => p.clone(),
                (None, Some(p)) => PathBuf::from(p),
                (None, None) => return Err(Error::InvalidConfig("checkpoint records no data path; pass --data".into())),
            };
            let dataset = load_geometries(&data_path)?;
            let rule = cfg.validity.clone();
            let start = Instant::now();
            let result = reflow(&loaded.model, &dataset, &cfg, &|g: &Geometry| is_valid(g, &rule).valid)?;
            let wall = start.elapsed().as_secs_f64();
            save_checkpoint(
                out,
                &Checkpoint {
                    model: result.model,
                    sizes: loaded.sizes.clone(),
                    config: Some(cfg.clone()),
                    data: Some(data_path.display().to_string()),
                },
            )?;
            save_pairs(pairs_out, &result.coupling)?;
            save_loss_curve(loss_path(out), &result.losses)?;
            println!("round,generated,kept,validity_rate,random_cost,estimated_cost,median_steps");
            let mut rows = Vec::new();
            for r in &result.rounds {
                println!(
                    "{},{},{},{:.4},{:.6},{:.6},{}",
                    r.round, r.generated, r.kept, r.validity_rate, r.random.total_cost, r.estimated.total_cost, r.median_steps
                );
                rows.push(RunMetrics {
                    phase: format!("reflow-{}", r.round),
                    distribution_cost: r.estimated.total_cost,
                    per_atom_cost: r.estimated.per_atom_cost,
                    mean_steps: r.mean_steps,
                    median_steps: r.median_steps,
                    validity_rate: r.validity_rate,
                    wall_seconds: wall,
                    seed: cfg.seed,
                    config_hash: cfg.hash(),
                });
            }
            append_metrics(metrics.clone().unwrap_or_else(|| sibling(out, "metrics.csv")), &rows)?;
        }
        Command::Sample {
            ckpt,
            count,
            solver,
            steps,
            rtol,
            atol,
            out,
            metrics,
        } => {
            let loaded = load_checkpoint(ckpt)?;
            let cfg = loaded.config.clone().unwrap_or_default();
            let seed = cli.seed.unwrap_or(cfg.seed);
            let method: SolverMethod = solver.parse()?;
            let mut solver_cfg = SolverConfig {
                method,
                ..cfg.solver.clone()
            };
            if let Some(n) = steps {
                solver_cfg.fixed_steps = *n;
            }
            if let Some(r) = rtol {
                solver_cfg.rtol = *r;
            }
            if let Some(a) = atol {
                solver_cfg.atol = *a;
            }
            solver_cfg.validate()?;
            let rule = cfg.validity.clone();
            let start = Instant::now();
            let (set, step_counts) =
                estimate_couplings(&loaded.model, &loaded.sizes, *count, &solver_cfg, &|g: &Geometry| is_valid(g, &rule).valid, seed)?;
            let samples = set
                .pairs
                .iter()
                .map(|p| loaded.model.decode(&p.z1))
                .collect::<Result<Vec<_>>>()?;
            let wall = start.elapsed().as_secs_f64();
            save_geometries(out, &samples)?;
            let (cost, per_atom) = if set.is_empty() {
                (0.0, 0.0)
            } else {
                let r = distribution_cost(&set, cfg.lambda, OmtMode::Heuristic { max_iters: cfg.eval_omt_iters })?;
                (r.total_cost, r.per_atom_cost)
            };
            let row = RunMetrics {
                phase: "sample".into(),
                distribution_cost: cost,
                per_atom_cost: per_atom,
                mean_steps: if step_counts.is_empty() { 0.0 } else { mean_of(&step_counts) },
                median_steps: if step_counts.is_empty() { 0.0 } else { median_of(&step_counts) },
                validity_rate: set.validity_rate().unwrap_or(0.0),
                wall_seconds: wall,
                seed,
                config_hash: cfg.hash(),
            };
            append_metrics(metrics.clone().unwrap_or_else(|| sibling(out, "metrics.csv")), std::slice::from_ref(&row))?;
            println!(
                "wrote {} samples to {}: validity {:.3}, median steps {}, {:.2}s",
                samples.len(),
                out.display(),
                row.validity_rate,
                row.median_steps,
                wall
            );
        }
        Command::Eval {
            pairs,
            lambda,
            exact,
            omt_iters,
        } => {
            if !(0.0..=1.0).contains(lambda) {
                return Err(Error::InvalidConfig(format!("lambda {lambda} outside [0, 1]")));
            }
            let set = match load_pairs(pairs) {
                Err(Error::EmptyFile(_)) => return Err(Error::EmptyCoupling),
                other => other?,
            };
            let mode = if *exact {
                OmtMode::Exact
            } else {
                OmtMode::Heuristic { max_iters: *omt_iters }
            };
            let report = distribution_cost(&set, *lambda, mode)?;
            println!("{}", crate::costs::CostReport::CSV_HEADER);
            println!("{}", report.csv_row());
        }
        Command::Selftest { suite } => {
            let suites = match suite {
                SuiteArg::Align => vec![Suite::Align],
                SuiteArg::Nn => vec![Suite::Nn],
                SuiteArg::Flow => vec![Suite::Flow],
                SuiteArg::All => vec![Suite::Align, Suite::Nn, Suite::Flow],
            };
            let mut failed = 0;
            for s in suites {
                let checks = s.run()?;
                let bad = checks.iter().filter(|c| !c.passed()).count();
                for c in &checks {
                    println!("[{}] {c}", s.name());
                }
                println!("[{}] {}", s.name(), if bad == 0 { "PASS" } else { "FAIL" });
                failed += bad;
            }
            if failed > 0 {
                return Ok(EXIT_SELFTEST);
            }
        }
    }
    Ok(0)
}
