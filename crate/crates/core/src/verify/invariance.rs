use std::sync::Arc;

use serde::Serialize;

use crate::data::{Dataset, ScalingSpec};
use crate::error::{Error, Result};
use crate::optim::{snapshot, Eta, HyperParams, Kate, Registry, StepVector, Trace, TraceRow};
use crate::problems::{GlmProblem, LossKind, Objective};
use crate::rng::Rng;
use crate::vector::Vector;

/// How `η` is chosen for each of the two problems.
#[derive(Debug, Clone, PartialEq)]
pub enum EtaMode {
    /// The same scalar on both problems. Only `0` gives exact invariance.
    Constant(f64),
    /// The same vector on both problems; only meaningful when `V = I`.
    PerCoordinate(Vector),
    /// `η[k] = 1/(∇_k f(w₀))²`, computed separately for each problem.
    GradInit,
}

impl EtaMode {
    fn resolve(&self, problem: &GlmProblem, w0: &[f64]) -> Result<Eta> {
        Ok(match self {
            EtaMode::Constant(v) => Eta::Scalar(*v),
            EtaMode::PerCoordinate(v) => Eta::PerCoordinate(v.clone()),
            EtaMode::GradInit => Eta::from_initial_gradient(&problem.gradient(w0)?).0,
        })
    }

    fn label(&self) -> String {
        match self {
            EtaMode::Constant(v) => format!("{v:e}"),
            EtaMode::PerCoordinate(_) => "per_coordinate".into(),
            EtaMode::GradInit => "grad_init".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InvarianceSetup {
    pub optimizer: String,
    pub loss: LossKind,
    pub beta: f64,
    pub eta: EtaMode,
    /// Must be zero.
    pub delta: f64,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
    /// Trace logging interval; deviations are measured at every step.
    pub log_every: usize,
}

impl InvarianceSetup {
    pub fn kate(beta: f64, steps: usize, batch: usize, seed: u64) -> Self {
        InvarianceSetup {
            optimizer: Kate::NAME.into(),
            loss: LossKind::Logistic,
            beta,
            eta: EtaMode::GradInit,
            delta: 0.0,
            steps,
            batch,
            seed,
            log_every: steps.max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub optimizer: String,
    pub eta: String,
    /// `max_t |f(ŵ_t) − f^V(ŵ^V_t)| / (1 + |f(ŵ_t)|)`.
    pub max_rel_f_dev: f64,
    /// `max_t ‖ŵ_t − V∘ŵ^V_t‖_∞ / (1 + ‖ŵ_t‖_∞)`.
    pub max_rel_w_dev: f64,
    /// `max_t |‖g_t‖² − ‖g^V_t‖²_{V⁻²}| / max(‖g_t‖², ‖g^V_t‖²_{V⁻²})`.
    pub max_rel_gnorm_dev: f64,
    #[serde(rename = "T")]
    pub steps: usize,
    pub tolerance: f64,
    /// Pass/fail where invariance is exact in theory (KATE with `η = 0` or
    /// gradient-init `η`); `None` otherwise.
    pub passed: Option<bool>,
}

impl InvarianceReport {
    pub fn max_dev(&self) -> f64 {
        self.max_rel_f_dev.max(self.max_rel_w_dev).max(self.max_rel_gnorm_dev)
    }
}

/// Report plus the two traces, for plotting.
#[derive(Debug, Clone)]
pub struct InvarianceRun {
    pub report: InvarianceReport,
    pub unscaled: Trace,
    pub scaled: Trace,
}

fn tolerance_for(steps: usize) -> f64 {
    if steps <= 100 {
        1e-9
    } else {
        1e-5
    }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

struct Side<'a> {
    problem: &'a GlmProblem,
    opt: Box<dyn crate::optim::Optimizer>,
    rng: Rng,
    w: Vec<f64>,
    rows: Vec<TraceRow>,
}

impl Side<'_> {
    fn log(&mut self, t: usize, nu: Option<&StepVector>) -> Result<()> {
        self.rows.push(snapshot(self.problem, t, &self.w, nu, f64::INFINITY)?);
        Ok(())
    }

    fn finish(self, name: &str) -> Trace {
        Trace {
            optimizer: name.to_string(),
            rows: self.rows,
            diverged: false,
            final_w: self.w.into(),
        }
    }
}

/// Runs the optimizer on `f(w) = (1/n) Σ φ(x_iᵀw)` and on
/// `f^V(w) = (1/n) Σ φ(x_iᵀVw)` in lockstep from `w₀ = 0`, with one RNG per
/// side seeded identically, and measures how far the pair drifts from
/// `ŵ_t = V ŵ^V_t`.
pub fn check_invariance(dataset: Arc<Dataset>, scaling: &ScalingSpec, setup: &InvarianceSetup) -> Result<InvarianceRun> {
    if setup.delta != 0.0 {
        return Err(Error::Precondition(format!(
            "invariance needs delta = 0, got {}",
            setup.delta
        )));
    }
    if setup.steps == 0 || setup.batch == 0 || setup.log_every == 0 {
        return Err(Error::Precondition("steps, batch and log_every must be at least 1".into()));
    }
    crate::vector::check_dims(dataset.d(), scaling.dim())?;
    if matches!(setup.eta, EtaMode::PerCoordinate(_)) && !scaling.is_identity() {
        return Err(Error::Precondition(
            "a fixed eta vector is not comparable across scalings; use grad_init or a scalar".into(),
        ));
    }

    let d = dataset.d();
    let plain = GlmProblem::new(dataset.clone(), setup.loss);
    let scaled = GlmProblem::new(dataset, setup.loss).with_scaling(scaling.clone())?;
    let registry = Registry::builtin();
    let w0 = vec![0.0; d];
    let make = |problem: &GlmProblem| -> Result<Box<dyn crate::optim::Optimizer>> {
        let hp = HyperParams::new(setup.beta, setup.eta.resolve(problem, &w0)?, 0.0)?;
        registry.create(&setup.optimizer, &hp, d)
    };

    let mut a = Side {
        problem: &plain,
        opt: make(&plain)?,
        rng: Rng::new(setup.seed),
        w: w0.clone(),
        rows: Vec::new(),
    };
    let mut b = Side {
        problem: &scaled,
        opt: make(&scaled)?,
        rng: Rng::new(setup.seed),
        w: w0.clone(),
        rows: Vec::new(),
    };
    a.log(0, None)?;
    b.log(0, None)?;

    let (mut f_dev, mut w_dev, mut g_dev) = (0.0f64, 0.0f64, 0.0f64);
    for t in 0..setup.steps {
        let ga = plain.stochastic_gradient(&a.w, &mut a.rng, setup.batch)?;
        let gb = scaled.stochastic_gradient(&b.w, &mut b.rng, setup.batch)?;
        if ga.batch_indices != gb.batch_indices {
            return Err(Error::Precondition(format!("sample sequences diverged at step {t}")));
        }
        g_dev = g_dev.max(rel_gap(ga.g.norm_sq(), scaling.weighted_norm_sq(&gb.g)));

        let nu_a = a.opt.step(&mut a.w, &ga.g)?;
        let nu_b = b.opt.step(&mut b.w, &gb.g)?;

        let fa = plain.value(&a.w)?;
        let fb = scaled.value(&b.w)?;
        f_dev = f_dev.max((fa - fb).abs() / (1.0 + fa.abs()));
        let mapped = scaling.apply(&b.w);
        let gap = a.w.iter().zip(mapped.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let w_inf = a.w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        w_dev = w_dev.max(gap / (1.0 + w_inf));

        let t_next = t + 1;
        if t_next % setup.log_every == 0 || t_next == setup.steps {
            a.log(t_next, Some(&nu_a))?;
            b.log(t_next, Some(&nu_b))?;
        }
    }
    if !(f_dev.is_finite() && w_dev.is_finite() && g_dev.is_finite()) {
        return Err(Error::NonFinite("invariance deviation"));
    }

    let tolerance = tolerance_for(setup.steps);
    let exact = setup.optimizer == Kate::NAME
        && matches!(setup.eta, EtaMode::GradInit | EtaMode::Constant(0.0));
    let report = InvarianceReport {
        optimizer: setup.optimizer.clone(),
        eta: setup.eta.label(),
        max_rel_f_dev: f_dev,
        max_rel_w_dev: w_dev,
        max_rel_gnorm_dev: g_dev,
        steps: setup.steps,
        tolerance,
        passed: exact.then_some(f_dev <= tolerance && w_dev <= tolerance && g_dev <= tolerance),
    };
    Ok(InvarianceRun {
        report,
        unscaled: a.finish(&setup.optimizer),
        scaled: b.finish(&setup.optimizer),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_synthetic;

    fn data(seed: u64) -> (Arc<Dataset>, ScalingSpec) {
        let s = gen_synthetic(&mut Rng::new(seed), 200, 5).unwrap();
        (Arc::new(s.dataset), s.scaling)
    }

    #[test]
    fn identity_scaling_is_exact() {
        let (ds, _) = data(1);
        let mut setup = InvarianceSetup::kate(0.5, 50, 10, 3);
        setup.eta = EtaMode::PerCoordinate(vec![0.1; 5].into());
        let run = check_invariance(ds, &ScalingSpec::identity(5), &setup).unwrap();
        assert_eq!(run.report.max_dev(), 0.0);
        assert_eq!(run.unscaled.rows.len(), 2);
    }

    #[test]
    fn kate_is_invariant_short_horizon() {
        let (ds, v) = data(2);
        let run = check_invariance(ds, &v, &InvarianceSetup::kate(0.01, 100, 10, 4)).unwrap();
        assert_eq!(run.report.tolerance, 1e-9);
        assert_eq!(run.report.passed, Some(true), "{:?}", run.report);
    }

    #[test]
    fn adagrad_gets_no_verdict() {
        let (ds, v) = data(2);
        let mut setup = InvarianceSetup::kate(0.5, 100, 10, 4);
        setup.optimizer = "adagrad".into();
        let run = check_invariance(ds, &v, &setup).unwrap();
        assert_eq!(run.report.passed, None);
        assert!(run.report.max_rel_f_dev > 1e-3);
    }

    #[test]
    fn preconditions() {
        let (ds, v) = data(3);
        let mut setup = InvarianceSetup::kate(0.5, 10, 10, 4);
        setup.delta = 1e-8;
        assert!(matches!(check_invariance(ds.clone(), &v, &setup), Err(Error::Precondition(_))));
        setup.delta = 0.0;
        setup.eta = EtaMode::PerCoordinate(vec![1.0; 5].into());
        assert!(matches!(check_invariance(ds.clone(), &v, &setup), Err(Error::Precondition(_))));
        setup.eta = EtaMode::GradInit;
        let short = ScalingSpec::identity(4);
        assert!(matches!(check_invariance(ds, &short, &setup), Err(Error::Dimension { .. })));
    }
}
