//! AdaGrad-family and SGD baselines.

use crate::error::{Error, Result};
use crate::vector::{norm_sq, Vector};

use super::{apply_step, check_gradient, HyperParams, Optimizer, StepVector};

fn overflow(what: &str) -> Error {
    Error::Step(format!("{what} accumulator overflow"))
}

/// Coordinate-wise AdaGrad: `ν_t[k] = β / √(Δ + Σ_{τ≤t} g_τ²[k])`.
#[derive(Debug, Clone)]
pub struct AdaGrad {
    beta: f64,
    delta: f64,
    acc: Vector,
    t: u64,
}

impl AdaGrad {
    pub const NAME: &'static str = "adagrad";

    pub fn new(hp: &HyperParams, dim: usize) -> Result<Self> {
        Ok(AdaGrad {
            beta: hp.beta,
            delta: hp.delta,
            acc: Vector::zeros(dim),
            t: 0,
        })
    }

    pub fn accumulator(&self) -> &Vector {
        &self.acc
    }
}

impl Optimizer for AdaGrad {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn iteration(&self) -> u64 {
        self.t
    }

    fn step(&mut self, w: &mut [f64], g: &[f64]) -> Result<StepVector> {
        check_gradient(self.acc.dim(), g)?;
        crate::vector::check_dims(self.acc.dim(), w.len())?;
        let acc: Vec<f64> = self.acc.iter().zip(g).map(|(a, x)| a + x * x).collect();
        if acc.iter().any(|a| !a.is_finite()) {
            return Err(overflow("adagrad"));
        }
        let nu: Vec<f64> = acc
            .iter()
            .map(|a| {
                let denom = (self.delta + a).sqrt();
                if denom > 0.0 {
                    self.beta / denom
                } else {
                    0.0
                }
            })
            .collect();
        self.acc = acc.into();
        self.t += 1;
        apply_step(w, &nu, g);
        Ok(StepVector { nu: nu.into() })
    }
}

/// Scalar AdaGrad: `ν_t = β / √(Δ + Σ_{τ≤t} ‖g_τ‖²)` on every coordinate.
#[derive(Debug, Clone)]
pub struct AdaGradNorm {
    beta: f64,
    delta: f64,
    dim: usize,
    acc: f64,
    t: u64,
}

impl AdaGradNorm {
    pub const NAME: &'static str = "adagradnorm";

    pub fn new(hp: &HyperParams, dim: usize) -> Result<Self> {
        Ok(AdaGradNorm {
            beta: hp.beta,
            delta: hp.delta,
            dim,
            acc: 0.0,
            t: 0,
        })
    }

    pub fn accumulator(&self) -> f64 {
        self.acc
    }
}

impl Optimizer for AdaGradNorm {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn iteration(&self) -> u64 {
        self.t
    }

    fn step(&mut self, w: &mut [f64], g: &[f64]) -> Result<StepVector> {
        check_gradient(self.dim, g)?;
        crate::vector::check_dims(self.dim, w.len())?;
        let acc = self.acc + norm_sq(g);
        if !acc.is_finite() {
            return Err(overflow("adagradnorm"));
        }
        let denom = (self.delta + acc).sqrt();
        let nu = if denom > 0.0 { self.beta / denom } else { 0.0 };
        let nu = vec![nu; self.dim];
        self.acc = acc;
        self.t += 1;
        apply_step(w, &nu, g);
        Ok(StepVector { nu: nu.into() })
    }
}

fn require_positive_delta(name: &str, hp: &HyperParams) -> Result<()> {
    if hp.delta > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} needs delta > 0")))
    }
}

/// `ν_t = β / (Δ √(t+1))` with `t` counted from zero, so the first step is `β/Δ`.
#[derive(Debug, Clone)]
pub struct SgdDecay {
    beta: f64,
    delta: f64,
    dim: usize,
    t: u64,
}

impl SgdDecay {
    pub const NAME: &'static str = "sgd_decay";

    pub fn new(hp: &HyperParams, dim: usize) -> Result<Self> {
        require_positive_delta(Self::NAME, hp)?;
        Ok(SgdDecay {
            beta: hp.beta,
            delta: hp.delta,
            dim,
            t: 0,
        })
    }
}

impl Optimizer for SgdDecay {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn iteration(&self) -> u64 {
        self.t
    }

    fn step(&mut self, w: &mut [f64], g: &[f64]) -> Result<StepVector> {
        check_gradient(self.dim, g)?;
        crate::vector::check_dims(self.dim, w.len())?;
        let nu = vec![self.beta / (self.delta * ((self.t + 1) as f64).sqrt()); self.dim];
        self.t += 1;
        apply_step(w, &nu, g);
        Ok(StepVector { nu: nu.into() })
    }
}

/// `ν_t = β / Δ`.
#[derive(Debug, Clone)]
pub struct SgdConstant {
    nu: f64,
    dim: usize,
    t: u64,
}

impl SgdConstant {
    pub const NAME: &'static str = "sgd_constant";

    pub fn new(hp: &HyperParams, dim: usize) -> Result<Self> {
        require_positive_delta(Self::NAME, hp)?;
        Ok(SgdConstant {
            nu: hp.beta / hp.delta,
            dim,
            t: 0,
        })
    }
}

impl Optimizer for SgdConstant {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn iteration(&self) -> u64 {
        self.t
    }

    fn step(&mut self, w: &mut [f64], g: &[f64]) -> Result<StepVector> {
        check_gradient(self.dim, g)?;
        crate::vector::check_dims(self.dim, w.len())?;
        let nu = vec![self.nu; self.dim];
        self.t += 1;
        apply_step(w, &nu, g);
        Ok(StepVector { nu: nu.into() })
    }
}
