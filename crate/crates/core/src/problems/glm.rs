use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ScalingSpec};
use crate::error::{Error, Result};
use crate::rng::{sample_batch, Rng};
use crate::vector::Vector;

use super::{check_point, GradSample, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `φ(z) = log(1 + exp(-y z))`
    Logistic,
    /// `φ(z) = (z - y)²`
    Squared,
}

/// `log(1 + exp(u))` without overflow.
fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

/// `1 / (1 + exp(-u))` without overflow.
fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

impl LossKind {
    pub fn value(self, z: f64, y: f64) -> f64 {
        match self {
            LossKind::Logistic => softplus(-y * z),
            LossKind::Squared => (z - y) * (z - y),
        }
    }

    pub fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            LossKind::Logistic => -y * sigmoid(-y * z),
            LossKind::Squared => 2.0 * (z - y),
        }
    }
}

/// `f(w) = (1/n) Σ φ_i(x_iᵀ w)`, or `f^V(w) = (1/n) Σ φ_i(x_iᵀ V w)` when a
/// scaling is attached. `V` is applied on the fly; the scaled feature
/// matrix is never formed.
#[derive(Debug, Clone)]
pub struct GlmProblem {
    dataset: Arc<Dataset>,
    loss: LossKind,
    scaling: Option<ScalingSpec>,
}

impl GlmProblem {
    pub fn new(dataset: Arc<Dataset>, loss: LossKind) -> Self {
        GlmProblem {
            dataset,
            loss,
            scaling: None,
        }
    }

    pub fn with_scaling(mut self, scaling: ScalingSpec) -> Result<Self> {
        crate::vector::check_dims(self.dataset.d(), scaling.dim())?;
        self.scaling = Some(scaling);
        Ok(self)
    }

    pub fn without_scaling(&self) -> Self {
        GlmProblem {
            dataset: Arc::clone(&self.dataset),
            loss: self.loss,
            scaling: None,
        }
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.dataset
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    /// `V ∘ w`, or `w` itself when unscaled.
    fn effective(&self, w: &[f64]) -> Vec<f64> {
        match &self.scaling {
            Some(v) => v.apply(w).into_inner(),
            None => w.to_vec(),
        }
    }

    fn margin(x: &[f64], w_eff: &[f64]) -> f64 {
        x.iter().zip(w_eff).map(|(a, b)| a * b).sum()
    }

    /// Accumulates `coef · V x` into `out`.
    fn add_scaled_row(&self, out: &mut [f64], x: &[f64], coef: f64) {
        match &self.scaling {
            Some(v) => {
                for ((o, &xk), &vk) in out.iter_mut().zip(x).zip(v.diag()) {
                    *o += coef * (vk * xk);
                }
            }
            None => {
                for (o, &xk) in out.iter_mut().zip(x) {
                    *o += coef * xk;
                }
            }
        }
    }

    /// Mean gradient over the given sample indices (repeats allowed).
    pub fn gradient_on(&self, w: &[f64], indices: &[usize]) -> Result<Vector> {
        check_point(self.dim(), w, "gradient")?;
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let w_eff = self.effective(w);
        let mut out = vec![0.0; self.dim()];
        for &i in indices {
            let x = self.dataset.row(i);
            let coef = self.loss.derivative(Self::margin(x, &w_eff), self.dataset.label(i));
            self.add_scaled_row(&mut out, x, coef);
        }
        let inv = 1.0 / indices.len() as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        Ok(out.into())
    }

    /// Fraction of samples with `y_i · x_iᵀ(Vw) ≥ 0`. Logistic loss only.
    pub fn accuracy(&self, w: &[f64]) -> Result<f64> {
        if self.loss != LossKind::Logistic {
            return Err(Error::Unsupported("accuracy is defined for logistic loss only".into()));
        }
        check_point(self.dim(), w, "accuracy")?;
        let w_eff = self.effective(w);
        let correct = self
            .dataset
            .rows()
            .filter(|(x, y)| y * Self::margin(x, &w_eff) >= 0.0)
            .count();
        Ok(correct as f64 / self.dataset.n() as f64)
    }

    /// `max_i ‖V x_i‖`: bounds `‖∇f(w)‖` for logistic loss since `|φ'| ≤ 1`.
    pub fn gradient_norm_bound(&self) -> f64 {
        self.dataset.max_row_norm(self.scaling.as_ref())
    }
}

impl Objective for GlmProblem {
    fn dim(&self) -> usize {
        self.dataset.d()
    }

    fn value(&self, w: &[f64]) -> Result<f64> {
        check_point(self.dim(), w, "objective")?;
        let w_eff = self.effective(w);
        let total: f64 = self
            .dataset
            .rows()
            .map(|(x, y)| self.loss.value(Self::margin(x, &w_eff), y))
            .sum();
        Ok(total / self.dataset.n() as f64)
    }

    fn gradient(&self, w: &[f64]) -> Result<Vector> {
        check_point(self.dim(), w, "gradient")?;
        let w_eff = self.effective(w);
        let mut out = vec![0.0; self.dim()];
        for (x, y) in self.dataset.rows() {
            let coef = self.loss.derivative(Self::margin(x, &w_eff), y);
            self.add_scaled_row(&mut out, x, coef);
        }
        let inv = 1.0 / self.dataset.n() as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        Ok(out.into())
    }

    fn stochastic_gradient(&self, w: &[f64], rng: &mut Rng, batch: usize) -> Result<GradSample> {
        let indices = sample_batch(rng, self.dataset.n(), batch)?;
        let g = self.gradient_on(w, &indices)?;
        Ok(GradSample {
            g,
            batch_indices: indices,
        })
    }

    fn accuracy(&self, w: &[f64]) -> Option<f64> {
        GlmProblem::accuracy(self, w).ok()
    }

    fn scaling(&self) -> Option<&ScalingSpec> {
        self.scaling.as_ref()
    }
}
