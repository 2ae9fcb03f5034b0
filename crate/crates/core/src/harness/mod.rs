//! Experiment commands behind the `opt` CLI: single runs, Δ sweeps, β
//! tuning, the invariance check and dataset fetching. Each command reads a
//! [`RunConfig`] and writes CSV/JSON files into an output directory.

mod config;
pub mod csv;

pub use config::{
    build_problem, default_cache_dir, BetaSpec, Built, EtaSpec, ProblemSpec, RunConfig, BETA_GRID,
    CHECKPOINTS, DELTA_GRID, INVARIANCE_BETA, TUNE_BASELINE_DELTA,
};

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{fetch_datasets, DatasetSource, FetchMode};
use crate::error::{Error, Result};
use crate::optim::{run, GradientMode, HyperParams, Kate, RunSpec, Trace};
use crate::verify::{check_invariance, EtaMode, InvarianceReport, InvarianceSetup};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Seed of trial `i`.
pub fn trial_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add(i as u64)
}

fn default_delta(optimizer: &str) -> f64 {
    if optimizer == Kate::NAME {
        0.0
    } else {
        TUNE_BASELINE_DELTA
    }
}

fn default_beta(config: &RunConfig) -> Result<BetaSpec> {
    match (config.beta, &config.problem) {
        (Some(b), _) => Ok(b),
        (None, ProblemSpec::Synthetic { .. }) => Ok(BetaSpec::Planted),
        (None, _) => Err(Error::Config("beta is required for this problem".into())),
    }
}

fn run_trials(built: &Built, hp: &HyperParams, optimizer: &str, config: &RunConfig, checkpoints: &[usize]) -> Result<Vec<Trace>> {
    (0..config.trials)
        .into_par_iter()
        .map(|i| {
            let spec = RunSpec::new(
                optimizer,
                hp.clone(),
                config.steps,
                GradientMode::MiniBatch(config.batch),
                trial_seed(config.seed, i),
            )
            .log_every(config.log_every)
            .checkpoints(checkpoints.to_vec());
            run(built.objective.as_ref(), &spec)
        })
        .collect()
}

fn min_fval(trace: &Trace) -> f64 {
    trace.rows.iter().filter(|r| !r.diverged).map(|r| r.fval).fold(f64::INFINITY, f64::min)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub seed: u64,
    pub final_fval: f64,
    pub min_fval: f64,
    pub final_accuracy: Option<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub optimizer: String,
    pub problem: ProblemSpec,
    pub beta: f64,
    pub delta: f64,
    #[serde(rename = "T")]
    pub steps: usize,
    pub batch: usize,
    /// `+inf` when any trial diverged.
    pub mean_final_fval: f64,
    pub mean_min_fval: f64,
    pub mean_final_accuracy: Option<f64>,
    pub diverged: bool,
    pub trials: Vec<TrialSummary>,
    pub wall_time_s: f64,
}

/// Writes `trace_trial<i>.csv` per trial, `trace_mean.csv` and `summary.json`.
pub fn cmd_run(config: &RunConfig, out: &Path) -> Result<RunSummary> {
    config.validate()?;
    let started = Instant::now();
    let built = build_problem(config)?;
    let delta = config.delta.unwrap_or_else(|| default_delta(&config.optimizer));
    let eta = config.eta.clone().unwrap_or(EtaSpec::GradInit);
    let hp = built.hyper_params(default_beta(config)?, &eta, delta)?;
    let traces = run_trials(&built, &hp, &config.optimizer, config, &[])?;

    fs::create_dir_all(out)?;
    for (i, tr) in traces.iter().enumerate() {
        csv::write_trace(&out.join(format!("trace_trial{i}.csv")), tr)?;
    }
    fs::write(out.join("trace_mean.csv"), csv::trace_csv(&csv::mean_rows(&traces)))?;

    let trials: Vec<TrialSummary> = traces
        .iter()
        .enumerate()
        .map(|(i, tr)| TrialSummary {
            seed: trial_seed(config.seed, i),
            final_fval: tr.final_fval(),
            min_fval: min_fval(tr),
            final_accuracy: if tr.diverged { None } else { tr.last().accuracy },
            diverged: tr.diverged,
        })
        .collect();
    let accuracies: Option<Vec<f64>> = trials.iter().map(|t| t.final_accuracy).collect();
    let summary = RunSummary {
        optimizer: config.optimizer.clone(),
        problem: config.problem.clone(),
        beta: hp.beta,
        delta,
        steps: config.steps,
        batch: config.batch,
        mean_final_fval: mean(trials.iter().map(|t| t.final_fval)),
        mean_min_fval: mean(trials.iter().map(|t| t.min_fval)),
        mean_final_accuracy: accuracies.map(|a| mean(a.into_iter())),
        diverged: trials.iter().any(|t| t.diverged),
        trials,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub optimizers: Vec<String>,
    pub deltas: Vec<f64>,
    #[serde(rename = "T")]
    pub steps: usize,
    /// `final_fval[i][j]`: Δ = `deltas[i]`, optimizer `optimizers[j]`,
    /// averaged over trials; `+inf` when any trial diverged.
    pub final_fval: Vec<Vec<f64>>,
    /// Same layout at each checkpoint `t ≤ T`.
    pub checkpoints: Vec<(usize, Vec<Vec<f64>>)>,
}

fn all_optimizers(config: &RunConfig) -> Vec<String> {
    config
        .optimizers
        .clone()
        .unwrap_or_else(|| crate::optim::Registry::builtin().names().into_iter().map(String::from).collect())
}

/// Writes `sweep_final.csv`, one `sweep_t<cp>.csv` per checkpoint and `sweep.json`.
pub fn cmd_sweep_delta(config: &RunConfig, out: &Path) -> Result<SweepResult> {
    config.validate()?;
    let built = build_problem(config)?;
    let optimizers = all_optimizers(config);
    let deltas = config.deltas.clone().unwrap_or_else(|| DELTA_GRID.to_vec());
    let checkpoints: Vec<usize> = config
        .checkpoints
        .clone()
        .unwrap_or_else(|| CHECKPOINTS.to_vec())
        .into_iter()
        .filter(|&c| c >= 1 && c <= config.steps)
        .collect();
    let beta = default_beta(config)?;
    let eta = config.eta.clone().unwrap_or(EtaSpec::Scalar(1.0));

    let cells: Vec<(f64, &String)> = deltas.iter().flat_map(|&d| optimizers.iter().map(move |o| (d, o))).collect();
    let results: Vec<(f64, Vec<f64>)> = cells
        .par_iter()
        .map(|&(delta, name)| {
            let hp = built.hyper_params(beta, &eta, delta)?;
            let traces = run_trials(&built, &hp, name, config, &checkpoints)?;
            let final_fval = mean(traces.iter().map(Trace::final_fval));
            let at_cp = checkpoints
                .iter()
                .map(|&c| mean(traces.iter().map(|tr| tr.fval_at(c).unwrap_or(f64::NAN))))
                .collect();
            Ok((final_fval, at_cp))
        })
        .collect::<Result<_>>()?;

    let k = optimizers.len();
    let grid = |pick: &dyn Fn(&(f64, Vec<f64>)) -> f64| -> Vec<Vec<f64>> {
        results.chunks(k).map(|row| row.iter().map(pick).collect()).collect()
    };
    let result = SweepResult {
        optimizers: optimizers.clone(),
        deltas: deltas.clone(),
        steps: config.steps,
        final_fval: grid(&|c| c.0),
        checkpoints: checkpoints
            .iter()
            .enumerate()
            .map(|(j, &c)| (c, grid(&|cell| cell.1[j])))
            .collect(),
    };

    fs::create_dir_all(out)?;
    let keyed = |m: &[Vec<f64>]| -> Vec<(String, Vec<f64>)> {
        deltas.iter().zip(m).map(|(d, row)| (format!("{d:e}"), row.clone())).collect()
    };
    fs::write(out.join("sweep_final.csv"), csv::matrix_csv("delta", &optimizers, &keyed(&result.final_fval)))?;
    for (c, m) in &result.checkpoints {
        fs::write(out.join(format!("sweep_t{c}.csv")), csv::matrix_csv("delta", &optimizers, &keyed(m)))?;
    }
    write_json(&out.join("sweep.json"), &result)?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaScore {
    pub beta: f64,
    /// Mean final loss over trials; `+inf` when any trial diverged.
    pub mean_final_fval: f64,
    pub diverged_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneEntry {
    pub optimizer: String,
    pub delta: f64,
    /// `None` when every β diverged.
    pub best_beta: Option<f64>,
    pub best_score: f64,
    pub scores: Vec<BetaScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneReport {
    pub problem: ProblemSpec,
    #[serde(rename = "T")]
    pub steps: usize,
    pub trials: usize,
    pub entries: Vec<TuneEntry>,
}

impl TuneReport {
    pub fn entry(&self, optimizer: &str) -> Option<&TuneEntry> {
        self.entries.iter().find(|e| e.optimizer == optimizer)
    }
}

/// Lowest score wins; ties go to the smaller β.
pub fn pick_best(scores: &[BetaScore]) -> Option<&BetaScore> {
    scores
        .iter()
        .filter(|s| s.mean_final_fval.is_finite())
        .min_by(|a, b| {
            a.mean_final_fval
                .total_cmp(&b.mean_final_fval)
                .then(a.beta.total_cmp(&b.beta))
        })
}

/// Grid search over β per optimizer. KATE runs with `Δ = 0` and the
/// configured `η` (gradient-init by default); the baselines use the
/// configured `delta`, `1e-8` by default. Writes `tune_report.json` and the
/// mean trace at each optimizer's best β as `tune_<optimizer>_best.csv`.
pub fn cmd_tune(config: &RunConfig, out: &Path) -> Result<TuneReport> {
    config.validate()?;
    let built = build_problem(config)?;
    let optimizers = all_optimizers(config);
    let grid = config.beta_grid.clone().unwrap_or_else(|| BETA_GRID.to_vec());
    let eta = config.eta.clone().unwrap_or(EtaSpec::GradInit);
    let delta_for = |name: &str| {
        if name == Kate::NAME {
            0.0
        } else {
            config.delta.unwrap_or(TUNE_BASELINE_DELTA)
        }
    };

    let cells: Vec<(&String, f64)> = optimizers.iter().flat_map(|o| grid.iter().map(move |&b| (o, b))).collect();
    let results: Vec<(BetaScore, Vec<Trace>)> = cells
        .par_iter()
        .map(|&(name, beta)| {
            let hp = built.hyper_params(BetaSpec::Value(beta), &eta, delta_for(name))?;
            let traces = run_trials(&built, &hp, name, config, &[])?;
            let score = BetaScore {
                beta,
                mean_final_fval: mean(traces.iter().map(Trace::final_fval)),
                diverged_trials: traces.iter().filter(|t| t.diverged).count(),
            };
            Ok((score, traces))
        })
        .collect::<Result<_>>()?;

    fs::create_dir_all(out)?;
    let mut entries = Vec::new();
    for (name, chunk) in optimizers.iter().zip(results.chunks(grid.len())) {
        let scores: Vec<BetaScore> = chunk.iter().map(|(s, _)| s.clone()).collect();
        let best = pick_best(&scores).cloned();
        if let Some(b) = &best {
            let (_, traces) = chunk.iter().find(|(s, _)| s.beta == b.beta).expect("best comes from the grid");
            fs::write(out.join(format!("tune_{name}_best.csv")), csv::trace_csv(&csv::mean_rows(traces)))?;
        } else {
            log::warn!("{name}: every beta in the grid diverged");
        }
        entries.push(TuneEntry {
            optimizer: name.clone(),
            delta: delta_for(name),
            best_beta: best.as_ref().map(|b| b.beta),
            best_score: best.map_or(f64::INFINITY, |b| b.mean_final_fval),
            scores,
        });
    }
    let report = TuneReport {
        problem: config.problem.clone(),
        steps: config.steps,
        trials: config.trials,
        entries,
    };
    write_json(&out.join("tune_report.json"), &report)?;
    Ok(report)
}

/// Invariance check for the configured optimizer plus, for comparison,
/// AdaGrad. Writes `invariance_<optimizer>.json` and the paired traces
/// `invariance_<optimizer>_{unscaled,scaled}.csv` for each; returns the
/// configured optimizer's report first.
pub fn cmd_invariance(config: &RunConfig, out: &Path) -> Result<Vec<InvarianceReport>> {
    config.validate()?;
    if !matches!(config.problem, ProblemSpec::Synthetic { .. }) {
        return Err(Error::Config("invariance needs a synthetic problem (it supplies V)".into()));
    }
    let delta = config.delta.unwrap_or(0.0);
    if delta != 0.0 {
        return Err(Error::Config(format!("invariance needs delta = 0, got {delta}")));
    }
    let built = build_problem(config)?;
    let dataset = built.dataset.clone().expect("synthetic problems carry their data");
    let scaling = built.scaling.clone().expect("synthetic problems carry V");
    let beta = built.beta(config.beta.unwrap_or(BetaSpec::Value(INVARIANCE_BETA)), &vec![0.0; built.dim()])?;
    let eta = match config.eta.clone().unwrap_or(EtaSpec::GradInit) {
        EtaSpec::Scalar(v) => EtaMode::Constant(v),
        EtaSpec::Vector(v) => EtaMode::PerCoordinate(v.into()),
        EtaSpec::GradInit => EtaMode::GradInit,
    };

    let mut names = vec![config.optimizer.clone()];
    if config.optimizer != "adagrad" {
        names.push("adagrad".into());
    }
    fs::create_dir_all(out)?;
    let mut reports = Vec::new();
    for name in names {
        let setup = InvarianceSetup {
            optimizer: name.clone(),
            loss: config.loss,
            beta,
            eta: eta.clone(),
            delta,
            steps: config.steps,
            batch: config.batch,
            seed: config.seed,
            log_every: config.log_every,
        };
        let result = check_invariance(dataset.clone(), &scaling, &setup).map_err(|e| match e {
            Error::Precondition(msg) => Error::Config(msg),
            other => other,
        })?;
        csv::write_trace(&out.join(format!("invariance_{name}_unscaled.csv")), &result.unscaled)?;
        csv::write_trace(&out.join(format!("invariance_{name}_scaled.csv")), &result.scaled)?;
        write_json(&out.join(format!("invariance_{name}.json")), &result.report)?;
        reports.push(result.report);
    }
    Ok(reports)
}

/// Makes the named datasets available in the cache.
pub fn cmd_fetch(cache: &Path, names: &[&str], mode: FetchMode) -> Result<Vec<DatasetSource>> {
    for name in names {
        if crate::data::known(name).is_none() {
            return Err(Error::Config(format!("unknown dataset {name:?}")));
        }
    }
    fetch_datasets(cache, names, mode)
}
