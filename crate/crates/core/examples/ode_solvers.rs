//! Integrate y' = -y from t = 0 to 1 with each solver and compare to exp(-1).

use geomflow::flow::{integrate, SolverConfig};

fn main() -> geomflow::Result<()> {
    let exact = (-1.0f64).exp();
    let f = |_: f64, y: &[f64]| Ok(y.iter().map(|v| -v).collect::<Vec<_>>());
    for (name, cfg) in [
        ("euler 100", SolverConfig::euler(100)),
        ("rk4 10", SolverConfig::rk4(10)),
        ("rk4 100", SolverConfig::rk4(100)),
        ("dopri5 1e-4", SolverConfig::adaptive(1e-4, 1e-6)),
        ("dopri5 1e-8", SolverConfig::adaptive(1e-8, 1e-10)),
    ] {
        let (y, stats) = integrate(f, &[1.0], &cfg, |_, _| {})?;
        println!(
            "{name:<12} error {:.2e}  accepted {:>3}  rejected {:>2}  evaluations {:>4}",
            (y[0] - exact).abs(),
            stats.accepted,
            stats.rejected,
            stats.evaluations
        );
    }
    Ok(())
}
