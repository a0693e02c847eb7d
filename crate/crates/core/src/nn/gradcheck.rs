//! Central finite-difference check of analytic gradients.

use super::Parameterized;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Denominator floor of the relative error, for parameters with near-zero gradient.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter index attaining `max_rel_error`.
    pub worst_index: Option<usize>,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_error <= tolerance
    }
}

/// `|a - b| / max(|a|, |b|, REL_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Compares `analytic` (same shape as `model`) with central differences of
/// `loss` in every parameter.
pub fn grad_check<M, F>(model: &M, loss: F, analytic: &M) -> GradCheckReport
where
    M: Parameterized + Clone,
    F: Fn(&M) -> f64,
{
    let base = model.to_flat();
    let grads = analytic.to_flat();
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: None,
        analytic: 0.0,
        numeric: 0.0,
        checked: base.len(),
    };
    let mut flat = base.clone();
    for i in 0..base.len() {
        flat[i] = base[i] + FD_STEP;
        probe.load_flat(&flat).expect("same shape");
        let plus = loss(&probe);
        flat[i] = base[i] - FD_STEP;
        probe.load_flat(&flat).expect("same shape");
        let minus = loss(&probe);
        flat[i] = base[i];
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let err = relative_error(grads[i], numeric);
        if err > report.max_rel_error || report.worst_index.is_none() {
            report.max_rel_error = err;
            report.worst_index = Some(i);
            report.analytic = grads[i];
            report.numeric = numeric;
        }
    }
    report
}
