//! Small differentiable networks with hand-written backward passes.

pub mod adam;
pub mod dense;
pub mod egnn;
pub mod gradcheck;
pub mod mat;
pub mod model;

pub use adam::{adam_step, Adam, AdamState};
pub use dense::{DenseNet, Linear};
pub use egnn::EquivariantLayer;
pub use gradcheck::{grad_check, GradCheckReport};
pub use mat::Mat;
pub use model::{EgnnStack, ModelArch, StackCache, Tape, VectorFieldModel};

use crate::error::{Error, Result};

/// Anything holding trainable `f64` parameters in a fixed declaration order.
pub trait Parameterized {
    fn visit(&self, f: &mut dyn FnMut(&[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64]));

    fn param_count(&self) -> usize {
        let mut count = 0;
        self.visit(&mut |p| count += p.len());
        count
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit(&mut |p| out.extend_from_slice(p));
        out
    }

    fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.param_count();
        if flat.len() != expected {
            return Err(Error::ShapeMismatch(format!("{} parameters for a model with {expected}", flat.len())));
        }
        let mut offset = 0;
        self.visit_mut(&mut |p| {
            p.copy_from_slice(&flat[offset..offset + p.len()]);
            offset += p.len();
        });
        Ok(())
    }

    fn fill(&mut self, value: f64) {
        self.visit_mut(&mut |p| p.fill(value));
    }

    /// A copy with every parameter set to zero, used as a gradient accumulator.
    fn zeros_like(&self) -> Self
    where
        Self: Clone + Sized,
    {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |p| ok &= p.iter().all(|v| v.is_finite()));
        ok
    }

    /// `self += scale * other`, parameter by parameter.
    fn add_scaled(&mut self, other: &Self, scale: f64)
    where
        Self: Sized,
    {
        let flat = other.to_flat();
        let mut offset = 0;
        self.visit_mut(&mut |p| {
            for (a, b) in p.iter_mut().zip(&flat[offset..]) {
                *a += scale * b;
            }
            offset += p.len();
        });
    }
}
