use serde::Serialize;

use crate::error::{Error, Result};
use crate::problems::Objective;
use crate::rng::Rng;
use crate::vector::Vector;

use super::{HyperParams, Registry, StepVector};

/// A run is declared diverged once `|f(w_t)|` exceeds this.
pub const DIVERGENCE_LIMIT: f64 = 1e300;

/// ... or once `f(w_t) > BLOWUP_FACTOR · max(|f(w_0)|, 1)`.
pub const BLOWUP_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    /// Mean gradient over `batch` indices drawn with replacement.
    MiniBatch(usize),
    /// Exact gradient at every step.
    Full,
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub optimizer: String,
    pub hp: HyperParams,
    /// Number of steps `T`.
    pub steps: usize,
    pub gradient: GradientMode,
    pub seed: u64,
    /// Log every this many steps; `t = 0` and `t = T` are always logged.
    pub log_every: usize,
    /// Extra steps to log regardless of `log_every`.
    pub checkpoints: Vec<usize>,
    /// Starting point; zero when absent.
    pub w0: Option<Vector>,
}

impl RunSpec {
    pub fn new(optimizer: &str, hp: HyperParams, steps: usize, gradient: GradientMode, seed: u64) -> Self {
        RunSpec {
            optimizer: optimizer.to_string(),
            hp,
            steps,
            gradient,
            seed,
            log_every: steps.max(1),
            checkpoints: Vec::new(),
            w0: None,
        }
    }

    pub fn log_every(mut self, every: usize) -> Self {
        self.log_every = every;
        self
    }

    pub fn checkpoints(mut self, cps: Vec<usize>) -> Self {
        self.checkpoints = cps;
        self
    }

    pub fn w0(mut self, w0: Vector) -> Self {
        self.w0 = Some(w0);
        self
    }

    fn should_log(&self, t: usize) -> bool {
        t == 0 || t == self.steps || t % self.log_every == 0 || self.checkpoints.contains(&t)
    }
}

/// One logged iterate `w_t`. Step statistics describe `ν_{t-1}`, the step
/// that produced `w_t`, and are absent for `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: usize,
    pub fval: f64,
    pub accuracy: Option<f64>,
    pub grad_norm_sq: f64,
    /// `‖∇f(w_t)‖²_{V⁻²}` when the objective carries a scaling.
    pub gnorm_weighted: Option<f64>,
    pub nu_min: Option<f64>,
    pub nu_max: Option<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub optimizer: String,
    pub rows: Vec<TraceRow>,
    pub diverged: bool,
    pub final_w: Vector,
}

impl Trace {
    pub fn last(&self) -> &TraceRow {
        self.rows.last().expect("a trace always holds the t = 0 row")
    }

    pub fn final_fval(&self) -> f64 {
        if self.diverged {
            f64::INFINITY
        } else {
            self.last().fval
        }
    }

    /// `f(w_t)` at a logged step, `+inf` if the run diverged before reaching it.
    pub fn fval_at(&self, t: usize) -> Option<f64> {
        if let Some(row) = self.rows.iter().find(|r| r.t == t && !r.diverged) {
            return Some(row.fval);
        }
        (self.diverged && self.last().t <= t).then_some(f64::INFINITY)
    }
}

/// What the observer sees after each step.
pub struct StepEvent<'a> {
    /// Index of the step just taken (`w_t → w_{t+1}`).
    pub t: usize,
    pub g: &'a [f64],
    pub nu: &'a StepVector,
    pub w_next: &'a [f64],
}

/// Loss level above which a run counts as diverged.
fn blowup_threshold(f0: f64) -> f64 {
    BLOWUP_FACTOR * f0.abs().max(1.0)
}

fn is_diverged(fval: f64, threshold: f64) -> bool {
    !fval.is_finite() || fval.abs() > DIVERGENCE_LIMIT || fval > threshold
}

pub(crate) fn snapshot(
    problem: &dyn Objective,
    t: usize,
    w: &[f64],
    nu: Option<&StepVector>,
    threshold: f64,
) -> Result<TraceRow> {
    let fval = problem.value(w)?;
    let grad = problem.gradient(w)?;
    let diverged = is_diverged(fval, threshold) || !grad.is_finite();
    Ok(TraceRow {
        t,
        fval,
        accuracy: problem.accuracy(w),
        grad_norm_sq: grad.norm_sq(),
        gnorm_weighted: problem.scaling().map(|v| v.weighted_norm_sq(&grad)),
        nu_min: nu.map(StepVector::min),
        nu_max: nu.map(StepVector::max),
        diverged,
    })
}

fn diverged_row(t: usize, fval: f64, nu: Option<&StepVector>) -> TraceRow {
    TraceRow {
        t,
        fval: if fval.is_nan() { f64::INFINITY } else { fval },
        accuracy: None,
        grad_norm_sq: f64::INFINITY,
        gnorm_weighted: None,
        nu_min: nu.map(StepVector::min),
        nu_max: nu.map(StepVector::max),
        diverged: true,
    }
}

/// Runs `spec.steps` optimizer steps from `w0` (zero by default).
pub fn run(problem: &dyn Objective, spec: &RunSpec) -> Result<Trace> {
    run_observed(problem, spec, |_| {})
}

/// [`run`] with a callback invoked after every step.
///
/// Divergence ends the trace with a final row flagged `diverged` instead of
/// returning an error. It is checked after every step: a non-finite
/// gradient or iterate, `|f| > DIVERGENCE_LIMIT`, or
/// `f(w_t) > BLOWUP_FACTOR · max(|f(w_0)|, 1)`.
pub fn run_observed<F>(problem: &dyn Objective, spec: &RunSpec, mut observe: F) -> Result<Trace>
where
    F: FnMut(&StepEvent<'_>),
{
    if spec.steps == 0 {
        return Err(Error::Precondition("T must be at least 1".into()));
    }
    if spec.log_every == 0 {
        return Err(Error::Precondition("log_every must be at least 1".into()));
    }
    if let GradientMode::MiniBatch(0) = spec.gradient {
        return Err(Error::Precondition("batch size must be at least 1".into()));
    }
    let dim = problem.dim();
    let mut w = match &spec.w0 {
        Some(w0) => {
            crate::vector::check_dims(dim, w0.dim())?;
            w0.clone().into_inner()
        }
        None => vec![0.0; dim],
    };
    let mut opt = Registry::builtin().create(&spec.optimizer, &spec.hp, dim)?;
    let mut rng = Rng::new(spec.seed);

    let f0 = problem.value(&w)?;
    let threshold = blowup_threshold(f0);
    let first = snapshot(problem, 0, &w, None, threshold)?;
    let mut diverged = first.diverged;
    let mut rows = vec![first];

    let mut t = 0;
    while t < spec.steps && !diverged {
        let g = match spec.gradient {
            GradientMode::MiniBatch(b) => problem.stochastic_gradient(&w, &mut rng, b)?.g,
            GradientMode::Full => problem.gradient(&w)?,
        };
        if !g.is_finite() {
            rows.push(diverged_row(t, f64::INFINITY, None));
            diverged = true;
            break;
        }
        let step = match opt.step(&mut w, &g) {
            Ok(s) => s,
            Err(Error::Step(msg)) => {
                log::debug!("{} stopped at t={t}: {msg}", spec.optimizer);
                rows.push(diverged_row(t, f64::INFINITY, None));
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        observe(&StepEvent {
            t,
            g: &g,
            nu: &step,
            w_next: &w,
        });
        t += 1;
        if !w.iter().all(|v| v.is_finite()) {
            rows.push(diverged_row(t, f64::INFINITY, Some(&step)));
            diverged = true;
        } else if spec.should_log(t) {
            let row = snapshot(problem, t, &w, Some(&step), threshold)?;
            diverged = row.diverged;
            rows.push(row);
        } else {
            let fval = problem.value(&w)?;
            if is_diverged(fval, threshold) {
                rows.push(diverged_row(t, fval, Some(&step)));
                diverged = true;
            }
        }
    }

    Ok(Trace {
        optimizer: spec.optimizer.clone(),
        rows,
        diverged,
        final_w: w.into(),
    })
}
