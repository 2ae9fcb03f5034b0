//! Differentiable objectives and their gradient oracles.

mod glm;
mod testfn;

pub use glm::{GlmProblem, LossKind};
pub use testfn::{Quadratic, Rosenbrock, TestFunction};

use crate::data::ScalingSpec;
use crate::error::Result;
use crate::rng::Rng;
use crate::vector::Vector;

/// A stochastic gradient together with the sample indices that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct GradSample {
    pub g: Vector,
    /// Empty for deterministic objectives.
    pub batch_indices: Vec<usize>,
}

/// Objective `f: ℝᵈ → ℝ` with exact and stochastic first-order oracles.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, w: &[f64]) -> Result<f64>;

    fn gradient(&self, w: &[f64]) -> Result<Vector>;

    /// Unbiased estimate of `∇f(w)`. Deterministic objectives return the
    /// exact gradient and leave `rng` untouched.
    fn stochastic_gradient(&self, w: &[f64], _rng: &mut Rng, _batch: usize) -> Result<GradSample> {
        Ok(GradSample {
            g: self.gradient(w)?,
            batch_indices: Vec::new(),
        })
    }

    /// Classification accuracy, where the objective defines one.
    fn accuracy(&self, _w: &[f64]) -> Option<f64> {
        None
    }

    /// Diagonal feature scaling the objective was built with.
    fn scaling(&self) -> Option<&ScalingSpec> {
        None
    }
}

pub(crate) fn check_point(dim: usize, w: &[f64], what: &'static str) -> Result<()> {
    crate::vector::check_dims(dim, w.len())?;
    if !w.iter().all(|v| v.is_finite()) {
        return Err(crate::error::Error::NonFinite(what));
    }
    Ok(())
}
