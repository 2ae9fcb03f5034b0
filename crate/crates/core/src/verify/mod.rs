//! Mechanical checks of KATE's provable properties, plus a finite-difference
//! gradient oracle.

mod invariance;
mod rate;
mod theorem;

pub use invariance::{check_invariance, EtaMode, InvarianceReport, InvarianceRun, InvarianceSetup};
pub use rate::{rate_check, RateReport, RateSetup};
pub use theorem::{check_theorem1, TheoremCheck};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::optim::StepVector;
use crate::problems::Objective;
use crate::vector::Vector;

/// Tolerance for step-size monotonicity.
pub const MONOTONE_TOL: f64 = 1e-12;

/// Slack floor for the log-sum bound.
pub const LOGSUM_TOL: f64 = 1e-9;

/// `lhs ≤ rhs` comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    /// `rhs − lhs`.
    pub slack: f64,
}

impl BoundReport {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        BoundReport {
            lhs,
            rhs,
            satisfied: lhs <= rhs,
            slack: rhs - lhs,
        }
    }
}

/// Central differences with `h_k = 1e-6 (1 + |w_k|)`.
pub fn finite_diff_gradient(problem: &dyn Objective, w: &[f64]) -> Result<Vector> {
    crate::vector::check_dims(problem.dim(), w.len())?;
    let mut probe = w.to_vec();
    let mut out = Vec::with_capacity(w.len());
    for k in 0..w.len() {
        let h = 1e-6 * (1.0 + w[k].abs());
        probe[k] = w[k] + h;
        let up = problem.value(&probe)?;
        probe[k] = w[k] - h;
        let down = problem.value(&probe)?;
        probe[k] = w[k];
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::NonFinite("finite-difference evaluation"));
        }
        // (w+h) − (w−h) is the step actually taken after rounding
        out.push((up - down) / ((w[k] + h) - (w[k] - h)));
    }
    Ok(out.into())
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = crate::vector::norm_sq(a).sqrt().max(crate::vector::norm_sq(b).sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Worst relative increase `(ν_{t+1}[k] − ν_t[k]) / ν_t[k]` over consecutive
/// steps. Coordinates with `ν_t[k] = 0` have not started moving and are
/// skipped. Non-positive means the steps never grew.
pub fn check_monotone_steps(steps: &[StepVector]) -> Result<f64> {
    if steps.is_empty() {
        return Err(Error::Precondition("empty step trace".into()));
    }
    let mut worst = f64::NEG_INFINITY;
    for pair in steps.windows(2) {
        crate::vector::check_dims(pair[0].nu.dim(), pair[1].nu.dim())?;
        for (&prev, &next) in pair[0].nu.iter().zip(pair[1].nu.iter()) {
            if prev > 0.0 {
                worst = worst.max((next - prev) / prev);
            }
        }
    }
    Ok(if worst == f64::NEG_INFINITY { 0.0 } else { worst })
}

/// Streaming check of `Σ_t g_t²/b_t² ≤ log(b_T²/b_0²) + 1` per coordinate
/// for `Δ = 0` accumulators.
#[derive(Debug, Clone)]
pub struct LogSumTracker {
    b0_sq: Vec<f64>,
    b_sq: Vec<f64>,
    q: Vec<f64>,
    started: bool,
}

impl LogSumTracker {
    pub fn new(dim: usize) -> Self {
        LogSumTracker {
            b0_sq: vec![0.0; dim],
            b_sq: vec![0.0; dim],
            q: vec![0.0; dim],
            started: false,
        }
    }

    pub fn observe(&mut self, g: &[f64]) -> Result<()> {
        crate::vector::check_dims(self.b_sq.len(), g.len())?;
        for (k, &gk) in g.iter().enumerate() {
            let g2 = gk * gk;
            self.b_sq[k] += g2;
            if self.b_sq[k] > 0.0 {
                self.q[k] += g2 / self.b_sq[k];
            }
        }
        if !self.started {
            self.b0_sq.copy_from_slice(&self.b_sq);
            self.started = true;
        }
        Ok(())
    }

    /// One entry per coordinate; `None` where `b_0² = 0`.
    pub fn reports(&self) -> Result<Vec<Option<BoundReport>>> {
        if !self.started {
            return Err(Error::Precondition("no gradients observed".into()));
        }
        let reports = (0..self.b_sq.len())
            .map(|k| {
                if self.b0_sq[k] > 0.0 {
                    let rhs = (self.b_sq[k] / self.b0_sq[k]).ln() + 1.0;
                    Some(BoundReport::new(self.q[k], rhs))
                } else {
                    log::warn!("log-sum bound: coordinate {k} has b0^2 = 0, skipped");
                    None
                }
            })
            .collect();
        Ok(reports)
    }
}

/// Log-sum bound over a full gradient history (rows are steps).
pub fn check_logsum_bound(history: &[Vec<f64>]) -> Result<Vec<Option<BoundReport>>> {
    let first = history
        .first()
        .ok_or_else(|| Error::Precondition("empty gradient history".into()))?;
    let mut tracker = LogSumTracker::new(first.len());
    for g in history {
        tracker.observe(g)?;
    }
    tracker.reports()
}

/// True when every checked coordinate has slack at least `-LOGSUM_TOL`.
pub fn logsum_passes(reports: &[Option<BoundReport>]) -> bool {
    reports.iter().flatten().all(|r| r.slack >= -LOGSUM_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Quadratic, Rosenbrock};

    #[test]
    fn fd_on_quadratic() {
        let q = Quadratic::new(vec![vec![2.0, 0.5], vec![0.5, 1.0]], vec![1.0, -1.0]).unwrap();
        let w = [0.3, -1.7];
        let fd = finite_diff_gradient(&q, &w).unwrap();
        let exact = q.gradient(&w).unwrap();
        assert!(relative_error(&fd, &exact) < 1e-7);
    }

    #[test]
    fn fd_rosenbrock_minimum() {
        let r = Rosenbrock::new(4).unwrap();
        let fd = finite_diff_gradient(&r, &[1.0; 4]).unwrap();
        assert!(fd.norm_inf() < 1e-6, "{fd:?}");
    }

    #[test]
    fn monotone_detector() {
        let sv = |v: Vec<f64>| StepVector { nu: v.into() };
        assert!(check_monotone_steps(&[]).is_err());
        assert_eq!(check_monotone_steps(&[sv(vec![1.0])]).unwrap(), 0.0);
        let worst = check_monotone_steps(&[sv(vec![1.0, 0.0]), sv(vec![0.5, 3.0]), sv(vec![0.6, 2.0])]).unwrap();
        assert!((worst - 0.2).abs() < 1e-15);
    }

    #[test]
    fn logsum_single_step_is_tight() {
        let r = check_logsum_bound(&[vec![3.0, 0.0]]).unwrap();
        let first = r[0].unwrap();
        assert_eq!((first.lhs, first.rhs, first.slack), (1.0, 1.0, 0.0));
        assert!(r[1].is_none());
    }

    #[test]
    fn logsum_constant_gradient_is_harmonic() {
        let steps = 50;
        let r = check_logsum_bound(&vec![vec![0.7]; steps]).unwrap()[0].unwrap();
        let harmonic: f64 = (1..=steps).map(|i| 1.0 / i as f64).sum();
        assert!((r.lhs - harmonic).abs() < 1e-12);
        assert!((r.rhs - ((steps as f64).ln() + 1.0)).abs() < 1e-12);
        assert!(r.satisfied);
    }

    #[test]
    fn logsum_late_start_coordinate_skipped() {
        let r = check_logsum_bound(&[vec![1.0, 0.0], vec![1.0, 5.0]]).unwrap();
        assert!(r[1].is_none());
        assert!(logsum_passes(&r));
    }

    #[test]
    fn relative_error_of_zeros() {
        assert_eq!(relative_error(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert_eq!(relative_error(&[1.0, 0.0], &[0.0, 0.0]), 1.0);
    }
}
