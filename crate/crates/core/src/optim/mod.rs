//! Optimizers behind a common [`Optimizer`] trait, looked up by name in a
//! [`Registry`].
//!
//! | name           | per-coordinate step `ν_t[k]`                              |
//! |----------------|-----------------------------------------------------------|
//! | `kate`         | `β √(η[k] b_t²[k] + Σ_τ g_τ²[k]/b_τ²[k]) / b_t²[k]`       |
//! | `adagrad`      | `β / √(Δ + Σ_τ g_τ²[k])`                                  |
//! | `adagradnorm`  | `β / √(Δ + Σ_τ ‖g_τ‖²)`                                   |
//! | `sgd_decay`    | `β / (Δ √(t+1))`                                          |
//! | `sgd_constant` | `β / Δ`                                                   |
//!
//! with `b_t²[k] = Δ + Σ_{τ≤t} g_τ²[k]`. All sums include the current gradient.

mod baselines;
mod kate;
mod run;

pub use baselines::{AdaGrad, AdaGradNorm, SgdConstant, SgdDecay};
pub use kate::Kate;
pub(crate) use run::snapshot;
pub use run::{
    run, run_observed, GradientMode, RunSpec, StepEvent, Trace, TraceRow, BLOWUP_FACTOR, DIVERGENCE_LIMIT,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::Vector;

/// The `η` hyperparameter: a scalar broadcast to every coordinate, or one
/// value per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Eta {
    Scalar(f64),
    PerCoordinate(Vector),
}

impl Eta {
    pub fn resolve(&self, dim: usize) -> Result<Vector> {
        match self {
            Eta::Scalar(v) => Ok(Vector::filled(dim, *v)),
            Eta::PerCoordinate(v) => {
                crate::vector::check_dims(dim, v.dim())?;
                Ok(v.clone())
            }
        }
    }

    /// `η₀ = min_k η[k]`.
    pub fn min(&self) -> f64 {
        match self {
            Eta::Scalar(v) => *v,
            Eta::PerCoordinate(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// `η[k] = 1 / (∇_k f(w₀))²`. Coordinates with a zero initial gradient
    /// get `η[k] = 0`; their indices are returned alongside.
    pub fn from_initial_gradient(g0: &[f64]) -> (Eta, Vec<usize>) {
        let mut zeros = Vec::new();
        let eta = g0
            .iter()
            .enumerate()
            .map(|(k, &g)| {
                if g == 0.0 {
                    zeros.push(k);
                    0.0
                } else {
                    1.0 / (g * g)
                }
            })
            .collect::<Vec<_>>();
        (Eta::PerCoordinate(eta.into()), zeros)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub beta: f64,
    pub eta: Eta,
    pub delta: f64,
}

impl HyperParams {
    pub fn new(beta: f64, eta: Eta, delta: f64) -> Result<Self> {
        let hp = HyperParams { beta, eta, delta };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Config(format!("beta must be finite and > 0, got {}", self.beta)));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::Config(format!("delta must be finite and >= 0, got {}", self.delta)));
        }
        let bad_eta = match &self.eta {
            Eta::Scalar(v) => !(v.is_finite() && *v >= 0.0),
            Eta::PerCoordinate(v) => v.iter().any(|x| !(x.is_finite() && *x >= 0.0)),
        };
        if bad_eta {
            return Err(Error::Config("eta entries must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn eta_min(&self) -> f64 {
        self.eta.min()
    }
}

/// Per-coordinate step sizes `ν_t` applied by one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepVector {
    pub nu: Vector,
}

impl StepVector {
    pub fn min(&self) -> f64 {
        self.nu.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.nu.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One optimizer instance, owning its accumulators. The iterate is owned by
/// the caller and updated in place as `w ← w − ν ∘ g`.
pub trait Optimizer: Send {
    fn name(&self) -> &'static str;

    /// Number of steps taken so far.
    fn iteration(&self) -> u64;

    /// Applies one step. On error neither `w` nor the optimizer state change.
    fn step(&mut self, w: &mut [f64], g: &[f64]) -> Result<StepVector>;
}

pub(crate) fn check_gradient(dim: usize, g: &[f64]) -> Result<()> {
    crate::vector::check_dims(dim, g.len())?;
    if !g.iter().all(|v| v.is_finite()) {
        return Err(Error::Step("gradient has non-finite entries".into()));
    }
    Ok(())
}

pub(crate) fn apply_step(w: &mut [f64], nu: &[f64], g: &[f64]) {
    for ((wk, &nk), &gk) in w.iter_mut().zip(nu).zip(g) {
        *wk -= nk * gk;
    }
}

pub type Factory = fn(&HyperParams, usize) -> Result<Box<dyn Optimizer>>;

/// Name → constructor table.
#[derive(Clone)]
pub struct Registry {
    entries: Vec<(&'static str, Factory)>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry { entries: Vec::new() }
    }

    /// KATE plus the four baselines, in the canonical reporting order.
    pub fn builtin() -> Self {
        let mut r = Registry::empty();
        r.register(Kate::NAME, |hp, d| Ok(Box::new(Kate::new(hp, d)?)));
        r.register(AdaGrad::NAME, |hp, d| Ok(Box::new(AdaGrad::new(hp, d)?)));
        r.register(AdaGradNorm::NAME, |hp, d| Ok(Box::new(AdaGradNorm::new(hp, d)?)));
        r.register(SgdDecay::NAME, |hp, d| Ok(Box::new(SgdDecay::new(hp, d)?)));
        r.register(SgdConstant::NAME, |hp, d| Ok(Box::new(SgdConstant::new(hp, d)?)));
        r
    }

    /// Adds or replaces an entry.
    pub fn register(&mut self, name: &'static str, factory: Factory) {
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(entry) => entry.1 = factory,
            None => self.entries.push((name, factory)),
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|(n, _)| *n == name)
    }

    pub fn create(&self, name: &str, hp: &HyperParams, dim: usize) -> Result<Box<dyn Optimizer>> {
        let (_, factory) = self.entries.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            Error::Config(format!(
                "unknown optimizer {name:?}; expected one of {}",
                self.names().join(", ")
            ))
        })?;
        hp.validate()?;
        factory(hp, dim)
    }
}

impl Default for Registry {
    fn default() -> Self {
        Registry::builtin()
    }
}
