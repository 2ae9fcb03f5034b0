use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::optim::{run_observed, GradientMode, HyperParams, RunSpec};
use crate::problems::{GlmProblem, Objective};
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct RateSetup {
    pub optimizer: String,
    pub hp: HyperParams,
    pub batch: usize,
    pub seeds: Vec<u64>,
    pub short: usize,
    pub long: usize,
}

/// Seed-averaged `min_{t≤T} ‖∇f(w_t)‖` at two horizons, plus the largest
/// full-gradient norm seen along any trajectory against `γ = max_i ‖V x_i‖`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub seeds: usize,
    pub short: usize,
    pub long: usize,
    pub mean_short: f64,
    pub se_short: f64,
    pub mean_long: f64,
    pub se_long: f64,
    /// `mean_long − mean_short ≤ 2 √(se_short² + se_long²)`.
    pub rate_ok: bool,
    pub gamma: f64,
    pub max_grad_norm: f64,
    pub gamma_ok: bool,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `(min_t ‖∇f(w_t)‖, max_t ‖∇f(w_t)‖)` over one run, `t = 0..=steps`.
fn grad_norm_range(problem: &GlmProblem, setup: &RateSetup, steps: usize, seed: u64) -> Result<(f64, f64)> {
    let g0 = problem.gradient(&vec![0.0; problem.dim()])?.norm_sq().sqrt();
    let (mut lo, mut hi) = (g0, g0);
    let mut failure = None;
    let spec = RunSpec::new(&setup.optimizer, setup.hp.clone(), steps, GradientMode::MiniBatch(setup.batch), seed);
    let trace = run_observed(problem, &spec, |e| match problem.gradient(e.w_next) {
        Ok(g) => {
            let norm = g.norm_sq().sqrt();
            lo = lo.min(norm);
            hi = hi.max(norm);
        }
        Err(err) => failure = Some(err),
    })?;
    if let Some(err) = failure {
        return Err(err);
    }
    if trace.diverged {
        return Err(Error::Precondition(format!("{} diverged on seed {seed}", setup.optimizer)));
    }
    Ok((lo, hi))
}

/// The two horizons use independent sample streams derived from each seed,
/// so the short run is not a prefix of the long one.
pub fn rate_check(problem: &GlmProblem, setup: &RateSetup) -> Result<RateReport> {
    if setup.seeds.len() < 2 {
        return Err(Error::Precondition("need at least two seeds".into()));
    }
    if setup.short == 0 || setup.long <= setup.short {
        return Err(Error::Precondition("need 0 < short < long".into()));
    }
    let per_seed: Vec<((f64, f64), (f64, f64))> = setup
        .seeds
        .par_iter()
        .map(|&seed| {
            let s = grad_norm_range(problem, setup, setup.short, Rng::derive(seed, 0).next_u64())?;
            let l = grad_norm_range(problem, setup, setup.long, Rng::derive(seed, 1).next_u64())?;
            Ok((s, l))
        })
        .collect::<Result<_>>()?;

    let shorts: Vec<f64> = per_seed.iter().map(|(s, _)| s.0).collect();
    let longs: Vec<f64> = per_seed.iter().map(|(_, l)| l.0).collect();
    let max_grad_norm = per_seed.iter().map(|(s, l)| s.1.max(l.1)).fold(0.0, f64::max);
    let (mean_short, se_short) = mean_se(&shorts);
    let (mean_long, se_long) = mean_se(&longs);
    let gamma = problem.gradient_norm_bound();
    Ok(RateReport {
        seeds: setup.seeds.len(),
        short: setup.short,
        long: setup.long,
        mean_short,
        se_short,
        mean_long,
        se_long,
        rate_ok: mean_long - mean_short <= 2.0 * (se_short.powi(2) + se_long.powi(2)).sqrt(),
        gamma,
        max_grad_norm,
        gamma_ok: max_grad_norm <= gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_standard_error() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }
}
