use serde::Serialize;

use crate::error::{Error, Result};
use crate::optim::{HyperParams, Kate, Optimizer};
use crate::problems::{Objective, Quadratic};
use crate::vector::Vector;

use super::BoundReport;

/// Outcome of the deterministic convergence-bound check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TheoremCheck {
    Checked {
        #[serde(flatten)]
        bound: BoundReport,
        /// Starting point actually used, after nudging zero-gradient coordinates.
        w0: Vector,
        nu0_max: f64,
        inv_l: f64,
    },
    /// The first realized step exceeded `1/L`; the bound does not apply.
    PreconditionUnmet { nu0_max: f64, inv_l: f64 },
}

impl TheoremCheck {
    /// `Some(satisfied)` when the bound was evaluated.
    pub fn satisfied(&self) -> Option<bool> {
        match self {
            TheoremCheck::Checked { bound, .. } => Some(bound.satisfied),
            TheoremCheck::PreconditionUnmet { .. } => None,
        }
    }
}

/// Moves coordinates of `w0` whose initial gradient is exactly zero; such
/// coordinates would have `b₀[k] = 0` and stay frozen under `Δ = 0`.
fn nudge_zero_coordinates(q: &Quadratic, mut w0: Vec<f64>) -> Result<Vec<f64>> {
    for _ in 0..8 {
        let g = q.gradient(&w0)?;
        let zeros: Vec<usize> = (0..g.dim()).filter(|&k| g[k] == 0.0).collect();
        if zeros.is_empty() {
            return Ok(w0);
        }
        for k in zeros {
            w0[k] += 1.0 + w0[k].abs();
        }
    }
    Err(Error::Precondition("could not move w0 off zero-gradient coordinates".into()))
}

/// Runs deterministic KATE (`Δ = 0`, full gradients) for `steps` steps and
/// compares `min_{t≤T} ‖∇f(w_t)‖²` with
/// `(2(f(w₀) − f*)/(√η₀ β) + Σ_k b₀[k])² / (T + 1)`, where `b₀ = |∇f(w₀)|`.
pub fn check_theorem1(q: &Quadratic, hp: &HyperParams, steps: usize, w0: Option<&[f64]>) -> Result<TheoremCheck> {
    if hp.delta != 0.0 {
        return Err(Error::Precondition("the bound is stated for delta = 0".into()));
    }
    let eta0 = hp.eta_min();
    if !(eta0 > 0.0) {
        return Err(Error::Precondition("the bound needs min eta > 0".into()));
    }
    if steps == 0 {
        return Err(Error::Precondition("T must be at least 1".into()));
    }
    let d = q.dim();
    let start = match w0 {
        Some(w) => {
            crate::vector::check_dims(d, w.len())?;
            w.to_vec()
        }
        None => vec![0.0; d],
    };
    let f_star = q.min_value()?;
    let inv_l = 1.0 / q.smoothness_bound();

    let g_start = q.gradient(&start)?;
    if g_start.norm_inf() == 0.0 {
        // already stationary: both sides vanish
        return Ok(TheoremCheck::Checked {
            bound: BoundReport::new(0.0, 0.0),
            w0: start.into(),
            nu0_max: 0.0,
            inv_l,
        });
    }
    let mut w = nudge_zero_coordinates(q, start)?;
    let w_start = w.clone();
    let f0 = q.value(&w)?;
    let b0_sum: f64 = q.gradient(&w)?.iter().map(|g| g.abs()).sum();

    let mut opt = Kate::new(hp, d)?;
    let mut min_gsq = f64::INFINITY;
    let mut nu0_max = 0.0;
    for t in 0..=steps {
        let g = q.gradient(&w)?;
        min_gsq = min_gsq.min(g.norm_sq());
        if t == steps {
            break;
        }
        let nu = opt.step(&mut w, &g)?;
        if t == 0 {
            nu0_max = nu.max();
            if nu0_max > inv_l {
                return Ok(TheoremCheck::PreconditionUnmet { nu0_max, inv_l });
            }
        }
    }

    let lead = 2.0 * (f0 - f_star) / (eta0.sqrt() * hp.beta) + b0_sum;
    let rhs = lead * lead / (steps as f64 + 1.0);
    Ok(TheoremCheck::Checked {
        bound: BoundReport::new(min_gsq, rhs),
        w0: w_start.into(),
        nu0_max,
        inv_l,
    })
}
