//! Fixed-step and adaptive integrators for `dz/dt = v(z, t)` on `t in [0, 1]`.
//!
//! States are flat: `3n` coordinates followed by `n k` features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{com_max_abs, LatentGeometry, PointSet, Vec3};
use crate::nn::VectorFieldModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    Euler,
    Rk4,
    /// Dormand-Prince 5(4) with a PI step-size controller.
    Adaptive,
}

impl std::str::FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(SolverMethod::Euler),
            "rk4" => Ok(SolverMethod::Rk4),
            "adaptive" | "dopri5" => Ok(SolverMethod::Adaptive),
            other => Err(Error::InvalidConfig(format!("unknown solver {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Step count for euler and rk4.
    pub fixed_steps: usize,
    pub rtol: f64,
    pub atol: f64,
    /// Cap on attempted adaptive steps.
    pub max_steps: usize,
    pub initial_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: SolverMethod::Adaptive,
            fixed_steps: 100,
            rtol: 1e-4,
            atol: 1e-5,
            max_steps: 10_000,
            initial_step: 0.05,
        }
    }
}

impl SolverConfig {
    pub fn euler(steps: usize) -> Self {
        SolverConfig {
            method: SolverMethod::Euler,
            fixed_steps: steps,
            ..Default::default()
        }
    }

    pub fn rk4(steps: usize) -> Self {
        SolverConfig {
            method: SolverMethod::Rk4,
            fixed_steps: steps,
            ..Default::default()
        }
    }

    pub fn adaptive(rtol: f64, atol: f64) -> Self {
        SolverConfig {
            rtol,
            atol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::InvalidConfig("solver tolerances must be positive".into()));
        }
        if self.fixed_steps == 0 || self.max_steps == 0 {
            return Err(Error::InvalidConfig("solver step counts must be at least 1".into()));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::InvalidConfig("initial step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OdeStats {
    /// Accepted steps (the fixed step count for euler/rk4).
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Largest coordinate CoM seen at any accepted state (set by [`sample_ode_with_stats`]).
    pub max_com_drift: f64,
}

/// Error-free sum `a + b = s + e`.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Euler with the displacement kept in double-double precision, so a
/// constant field integrates to `y0 + c` exactly for any step count.
fn euler<F, O>(mut f: F, y0: &[f64], steps: usize, mut observer: O) -> Result<(Vec<f64>, OdeStats)>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    O: FnMut(f64, &[f64]),
{
    let dim = y0.len();
    let mut hi = vec![0.0; dim];
    let mut lo = vec![0.0; dim];
    let mut y = y0.to_vec();
    let mut stats = OdeStats::default();
    for i in 0..steps {
        let t = i as f64 / steps as f64;
        let h = (i + 1) as f64 / steps as f64 - t;
        let v = f(t, &y)?;
        stats.evaluations += 1;
        for j in 0..dim {
            let p = v[j] * h;
            let pe = v[j].mul_add(h, -p);
            let (s, e) = two_sum(hi[j], p);
            hi[j] = s;
            lo[j] += e + pe;
            let (s, e) = two_sum(hi[j], lo[j]);
            hi[j] = s;
            lo[j] = e;
            y[j] = y0[j] + (hi[j] + lo[j]);
        }
        stats.accepted += 1;
        observer((i + 1) as f64 / steps as f64, &y);
    }
    Ok((y, stats))
}

fn axpy(y: &[f64], h: f64, terms: &[(&[f64], f64)]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (k, c) in terms {
        if *c == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(k.iter()) {
            *o += h * c * v;
        }
    }
    out
}

fn rk4<F, O>(mut f: F, y0: &[f64], steps: usize, mut observer: O) -> Result<(Vec<f64>, OdeStats)>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    O: FnMut(f64, &[f64]),
{
    let mut y = y0.to_vec();
    let mut stats = OdeStats::default();
    for i in 0..steps {
        let t = i as f64 / steps as f64;
        let h = (i + 1) as f64 / steps as f64 - t;
        let k1 = f(t, &y)?;
        let k2 = f(t + h / 2.0, &axpy(&y, h, &[(&k1, 0.5)]))?;
        let k3 = f(t + h / 2.0, &axpy(&y, h, &[(&k2, 0.5)]))?;
        let k4 = f(t + h, &axpy(&y, h, &[(&k3, 1.0)]))?;
        for j in 0..y.len() {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        stats.evaluations += 4;
        stats.accepted += 1;
        observer(t + h, &y);
    }
    Ok((y, stats))
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
/// Fifth- minus fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

// PI controller constants.
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

fn dopri5<F, O>(mut f: F, y0: &[f64], cfg: &SolverConfig, mut observer: O) -> Result<(Vec<f64>, OdeStats)>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    O: FnMut(f64, &[f64]),
{
    let mut stats = OdeStats::default();
    let mut y = y0.to_vec();
    let mut t = 0.0f64;
    let mut h = cfg.initial_step.min(1.0);
    let mut fac_old = 1e-4f64;
    let mut last_rejected = false;
    let mut k1 = f(t, &y)?;
    stats.evaluations += 1;

    while t < 1.0 {
        if stats.accepted + stats.rejected >= cfg.max_steps {
            return Err(Error::SolverBudgetExceeded(cfg.max_steps));
        }
        let last = t + h >= 1.0;
        if last {
            h = 1.0 - t;
        }
        let k2 = f(t + C[1] * h, &axpy(&y, h, &[(&k1, A2[0])]))?;
        let k3 = f(t + C[2] * h, &axpy(&y, h, &[(&k1, A3[0]), (&k2, A3[1])]))?;
        let k4 = f(t + C[3] * h, &axpy(&y, h, &[(&k1, A4[0]), (&k2, A4[1]), (&k3, A4[2])]))?;
        let k5 = f(
            t + C[4] * h,
            &axpy(&y, h, &[(&k1, A5[0]), (&k2, A5[1]), (&k3, A5[2]), (&k4, A5[3])]),
        )?;
        let k6 = f(
            t + C[5] * h,
            &axpy(&y, h, &[(&k1, A6[0]), (&k2, A6[1]), (&k3, A6[2]), (&k4, A6[3]), (&k5, A6[4])]),
        )?;
        let y_new = axpy(&y, h, &[(&k1, B[0]), (&k3, B[2]), (&k4, B[3]), (&k5, B[4]), (&k6, B[5])]);
        let t_new = if last { 1.0 } else { t + h };
        let k7 = f(t_new, &y_new)?;
        stats.evaluations += 6;

        let mut acc = 0.0;
        for j in 0..y.len() {
            let e = h
                * (E[0] * k1[j] + E[2] * k3[j] + E[3] * k4[j] + E[4] * k5[j] + E[5] * k6[j] + E[6] * k7[j]);
            let sc = cfg.atol + cfg.rtol * y[j].abs().max(y_new[j].abs());
            acc += (e / sc).powi(2);
        }
        let err = if y.is_empty() { 0.0 } else { (acc / y.len() as f64).sqrt() };

        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            fac_old = err.max(1e-4);
            y = y_new;
            k1 = k7;
            t = t_new;
            stats.accepted += 1;
            last_rejected = false;
            observer(t, &y);
            h = h_new;
        } else {
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            stats.rejected += 1;
            last_rejected = true;
        }
    }
    Ok((y, stats))
}

/// Integrate `dy/dt = f(t, y)` from `t = 0` to `1`, calling `observer`
/// after every accepted step.
pub fn integrate<F, O>(f: F, y0: &[f64], cfg: &SolverConfig, observer: O) -> Result<(Vec<f64>, OdeStats)>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    O: FnMut(f64, &[f64]),
{
    cfg.validate()?;
    match cfg.method {
        SolverMethod::Euler => euler(f, y0, cfg.fixed_steps, observer),
        SolverMethod::Rk4 => rk4(f, y0, cfg.fixed_steps, observer),
        SolverMethod::Adaptive => dopri5(f, y0, cfg, observer),
    }
}

fn coords_of(flat: &[f64], n: usize) -> Vec<Vec3> {
    flat[..3 * n].chunks(3).map(|c| [c[0], c[1], c[2]]).collect()
}

/// Integrate the model's velocity field from `z0`; also tracks CoM drift.
pub fn sample_ode_with_stats(model: &VectorFieldModel, z0: &LatentGeometry, solver: &SolverConfig) -> Result<(LatentGeometry, OdeStats)> {
    let (n, k) = (z0.n(), z0.feature_dim());
    let field = |t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let z = LatentGeometry::from_flat(y, n, k)?;
        Ok(model.forward(&z, t)?.to_flat())
    };
    let mut drift = com_max_abs(z0.coords());
    let (y, mut stats) = integrate(field, &z0.to_flat(), solver, |_, y| {
        drift = drift.max(com_max_abs(&coords_of(y, n)));
    })?;
    stats.max_com_drift = drift;
    Ok((LatentGeometry::from_flat(&y, n, k)?, stats))
}

/// Terminal state and accepted-step count.
pub fn sample_ode(model: &VectorFieldModel, z0: &LatentGeometry, solver: &SolverConfig) -> Result<(LatentGeometry, usize)> {
    let (z, stats) = sample_ode_with_stats(model, z0, solver)?;
    Ok((z, stats.accepted))
}
