use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{gen_synthetic, Dataset, FetchMode, ScalingSpec};
use crate::error::{Error, Result};
use crate::optim::{Eta, HyperParams, Registry};
use crate::problems::{GlmProblem, LossKind, Objective, Quadratic, Rosenbrock};
use crate::rng::Rng;
use crate::vector::Vector;

/// Which objective to optimize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Planted logistic data; `scaled` selects the features `V x_i` over `x_i`.
    Synthetic {
        n: usize,
        d: usize,
        seed: u64,
        #[serde(default = "default_true")]
        scaled: bool,
    },
    /// A LIBSVM dataset from the local cache.
    Libsvm { name: String },
    Quadratic { a: Vec<Vec<f64>>, b: Vec<f64> },
    Rosenbrock { d: usize },
}

fn default_true() -> bool {
    true
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec::Synthetic {
            n: 1000,
            d: 20,
            seed: 0,
            scaled: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NumOrName", into = "NumOrName")]
pub enum BetaSpec {
    Value(f64),
    /// `β = f(w₀) − f(w*)` with `w*` the planted predictor.
    Planted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum NumOrName {
    Num(f64),
    Name(String),
}

impl TryFrom<NumOrName> for BetaSpec {
    type Error = String;

    fn try_from(v: NumOrName) -> std::result::Result<Self, String> {
        match v {
            NumOrName::Num(x) => Ok(BetaSpec::Value(x)),
            NumOrName::Name(s) if s == "paper" => Ok(BetaSpec::Planted),
            NumOrName::Name(s) => Err(format!("beta must be a number or \"paper\", got {s:?}")),
        }
    }
}

impl From<BetaSpec> for NumOrName {
    fn from(b: BetaSpec) -> Self {
        match b {
            BetaSpec::Value(x) => NumOrName::Num(x),
            BetaSpec::Planted => NumOrName::Name("paper".into()),
        }
    }
}

impl std::str::FromStr for BetaSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "paper" {
            return Ok(BetaSpec::Planted);
        }
        s.parse::<f64>()
            .map(BetaSpec::Value)
            .map_err(|_| Error::Config(format!("beta must be a number or \"paper\", got {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EtaRepr", into = "EtaRepr")]
pub enum EtaSpec {
    Scalar(f64),
    Vector(Vec<f64>),
    /// `η[k] = 1/(∇_k f(w₀))²`.
    GradInit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum EtaRepr {
    Num(f64),
    Vec(Vec<f64>),
    Name(String),
}

impl TryFrom<EtaRepr> for EtaSpec {
    type Error = String;

    fn try_from(v: EtaRepr) -> std::result::Result<Self, String> {
        match v {
            EtaRepr::Num(x) => Ok(EtaSpec::Scalar(x)),
            EtaRepr::Vec(v) => Ok(EtaSpec::Vector(v)),
            EtaRepr::Name(s) if s == "grad_init" => Ok(EtaSpec::GradInit),
            EtaRepr::Name(s) => Err(format!("eta must be a number, an array or \"grad_init\", got {s:?}")),
        }
    }
}

impl From<EtaSpec> for EtaRepr {
    fn from(e: EtaSpec) -> Self {
        match e {
            EtaSpec::Scalar(x) => EtaRepr::Num(x),
            EtaSpec::Vector(v) => EtaRepr::Vec(v),
            EtaSpec::GradInit => EtaRepr::Name("grad_init".into()),
        }
    }
}

impl std::str::FromStr for EtaSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "grad_init" {
            return Ok(EtaSpec::GradInit);
        }
        if s.starts_with('[') {
            return serde_json::from_str::<Vec<f64>>(s)
                .map(EtaSpec::Vector)
                .map_err(|e| Error::Config(format!("bad eta vector: {e}")));
        }
        s.parse::<f64>()
            .map(EtaSpec::Scalar)
            .map_err(|_| Error::Config(format!("eta must be a number, an array or \"grad_init\", got {s:?}")))
    }
}

impl EtaSpec {
    pub fn resolve(&self, problem: &dyn Objective, w0: &[f64]) -> Result<Eta> {
        Ok(match self {
            EtaSpec::Scalar(x) => Eta::Scalar(*x),
            EtaSpec::Vector(v) => Eta::PerCoordinate(Vector::from(v.clone())),
            EtaSpec::GradInit => {
                let (eta, zeros) = Eta::from_initial_gradient(&problem.gradient(w0)?);
                if !zeros.is_empty() {
                    log::warn!("grad_init eta: zero initial gradient in coordinates {zeros:?}, using eta = 0 there");
                }
                eta
            }
        })
    }
}

/// One experiment description. Field names are the JSON keys.
///
/// `beta`, `eta` and `delta` are optional because each command has its own
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub problem: ProblemSpec,
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
    #[serde(default)]
    pub beta: Option<BetaSpec>,
    #[serde(default)]
    pub eta: Option<EtaSpec>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(rename = "T", default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    /// Δ grid for `sweep`.
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
    /// Extra logged steps for `sweep`.
    #[serde(default)]
    pub checkpoints: Option<Vec<usize>>,
    /// β grid for `tune`.
    #[serde(default)]
    pub beta_grid: Option<Vec<f64>>,
    /// Optimizers compared by `sweep` and `tune`.
    #[serde(default)]
    pub optimizers: Option<Vec<String>>,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

fn default_optimizer() -> String {
    "kate".into()
}
fn default_steps() -> usize {
    10_000
}
fn default_batch() -> usize {
    10
}
fn default_log_every() -> usize {
    10
}
fn default_trials() -> usize {
    1
}
fn default_loss() -> LossKind {
    LossKind::Logistic
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

pub const DELTA_GRID: [f64; 9] = [1e-8, 1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4, 1e6, 1e8];
pub const BETA_GRID: [f64; 6] = [1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 1.0];
pub const CHECKPOINTS: [usize; 3] = [10_000, 50_000, 100_000];
/// Δ for the baselines while tuning.
pub const TUNE_BASELINE_DELTA: f64 = 1e-8;
/// β for the invariance check when none is given.
pub const INVARIANCE_BETA: f64 = 0.01;

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let registry = Registry::builtin();
        let names = self.optimizers.clone().unwrap_or_else(|| vec![self.optimizer.clone()]);
        for name in names.iter().chain(std::iter::once(&self.optimizer)) {
            if !registry.contains(name) {
                return Err(Error::Config(format!(
                    "unknown optimizer {name:?}; expected one of {}",
                    registry.names().join(", ")
                )));
            }
        }
        if self.steps == 0 {
            return Err(Error::Config("T must be at least 1".into()));
        }
        if self.batch == 0 || self.log_every == 0 || self.trials == 0 {
            return Err(Error::Config("batch, log_every and trials must be at least 1".into()));
        }
        if let Some(BetaSpec::Value(b)) = self.beta {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::Config(format!("beta must be finite and > 0, got {b}")));
            }
        }
        if self.beta == Some(BetaSpec::Planted) && !matches!(self.problem, ProblemSpec::Synthetic { .. }) {
            return Err(Error::Config("beta = \"paper\" needs a synthetic problem".into()));
        }
        if let Some(d) = self.delta {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::Config(format!("delta must be finite and >= 0, got {d}")));
            }
        }
        for (what, grid) in [("deltas", &self.deltas), ("beta_grid", &self.beta_grid)] {
            if let Some(g) = grid {
                if g.is_empty() {
                    return Err(Error::Config(format!("{what} must not be empty")));
                }
                if g.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                    return Err(Error::Config(format!("{what} entries must be finite and > 0")));
                }
            }
        }
        if let Some(opts) = &self.optimizers {
            if opts.is_empty() {
                return Err(Error::Config("optimizers must not be empty".into()));
            }
        }
        Ok(())
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(default_cache_dir)
    }
}

/// `$KATE_DATA_DIR`, else `./data`.
pub fn default_cache_dir() -> PathBuf {
    std::env::var_os("KATE_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

/// A materialized problem.
pub struct Built {
    pub objective: Arc<dyn Objective>,
    /// The GLM form, for problems backed by a dataset.
    pub glm: Option<GlmProblem>,
    /// Synthetic problems only.
    pub dataset: Option<Arc<Dataset>>,
    pub scaling: Option<ScalingSpec>,
    /// `f(w*)` at the planted predictor, synthetic problems only.
    pub planted_value: Option<f64>,
}

impl Built {
    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    /// Resolves β; `w0` is the starting point.
    pub fn beta(&self, spec: BetaSpec, w0: &[f64]) -> Result<f64> {
        match spec {
            BetaSpec::Value(b) => Ok(b),
            BetaSpec::Planted => {
                let f_star = self
                    .planted_value
                    .ok_or_else(|| Error::Config("beta = \"paper\" needs a synthetic problem".into()))?;
                let beta = self.objective.value(w0)? - f_star;
                if !(beta > 0.0) {
                    return Err(Error::Config(format!("beta = f(w0) - f(w*) is not positive ({beta})")));
                }
                Ok(beta)
            }
        }
    }

    pub fn hyper_params(&self, beta: BetaSpec, eta: &EtaSpec, delta: f64) -> Result<HyperParams> {
        let w0 = vec![0.0; self.dim()];
        let hp = HyperParams::new(self.beta(beta, &w0)?, eta.resolve(self.objective.as_ref(), &w0)?, delta)?;
        Ok(hp)
    }
}

pub fn build_problem(config: &RunConfig) -> Result<Built> {
    match &config.problem {
        ProblemSpec::Synthetic { n, d, seed, scaled } => {
            let data = gen_synthetic(&mut Rng::new(*seed), *n, *d)?;
            let dataset = Arc::new(data.dataset);
            let scaled_problem =
                GlmProblem::new(dataset.clone(), config.loss).with_scaling(data.scaling.clone())?;
            let planted_value = scaled_problem.value(&data.w_star)?;
            let glm = if *scaled {
                scaled_problem
            } else {
                scaled_problem.without_scaling()
            };
            Ok(Built {
                objective: Arc::new(glm.clone()),
                glm: Some(glm),
                dataset: Some(dataset),
                scaling: Some(data.scaling),
                planted_value: Some(planted_value),
            })
        }
        ProblemSpec::Libsvm { name } => {
            let source = crate::data::fetch_datasets(&config.cache_dir(), &[name.as_str()], FetchMode::Offline)?
                .pop()
                .expect("one source per requested name");
            let dataset = Arc::new(source.load()?);
            let glm = GlmProblem::new(dataset.clone(), config.loss);
            Ok(Built {
                objective: Arc::new(glm.clone()),
                glm: Some(glm),
                dataset: Some(dataset),
                scaling: None,
                planted_value: None,
            })
        }
        ProblemSpec::Quadratic { a, b } => Ok(plain(Arc::new(Quadratic::new(a.clone(), b.clone())?))),
        ProblemSpec::Rosenbrock { d } => Ok(plain(Arc::new(Rosenbrock::new(*d)?))),
    }
}

fn plain(objective: Arc<dyn Objective>) -> Built {
    Built {
        objective,
        glm: None,
        dataset: None,
        scaling: None,
        planted_value: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_takes_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c.problem, ProblemSpec::default());
        assert_eq!((c.steps, c.batch, c.trials), (10_000, 10, 1));
        assert_eq!(c.beta, None);
    }

    #[test]
    fn field_forms() {
        let c = RunConfig::from_json(
            r#"{"problem": {"libsvm": {"name": "heart"}}, "optimizer": "adagrad",
                "beta": 0.5, "eta": [1, 2], "delta": 1e-8, "T": 5000, "seed": 3}"#,
        )
        .unwrap();
        assert_eq!(c.beta, Some(BetaSpec::Value(0.5)));
        assert_eq!(c.eta, Some(EtaSpec::Vector(vec![1.0, 2.0])));
        assert_eq!(c.steps, 5000);
        let c = RunConfig::from_json(r#"{"beta": "paper", "eta": "grad_init"}"#).unwrap();
        assert_eq!((c.beta, c.eta), (Some(BetaSpec::Planted), Some(EtaSpec::GradInit)));
    }

    #[test]
    fn bad_values_are_config_errors() {
        assert!(matches!(RunConfig::from_json(r#"{"beta": "huge"}"#), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_json(r#"{"eta": "auto"}"#), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_json(r#"{"typo": 1}"#), Err(Error::Config(_))));
        let c = RunConfig::from_json(r#"{"optimizer": "adam"}"#).unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = RunConfig::from_json(r#"{"problem": {"rosenbrock": {"d": 3}}, "beta": "paper"}"#).unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn round_trip() {
        let c = RunConfig::from_json(r#"{"beta": "paper", "eta": 0.25, "deltas": [1e-8]}"#).unwrap();
        let back = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn planted_beta_uses_scaled_predictor() {
        let c = RunConfig::from_json(r#"{"problem": {"synthetic": {"n": 50, "d": 3, "seed": 1}}}"#).unwrap();
        let built = build_problem(&c).unwrap();
        let beta = built.beta(BetaSpec::Planted, &[0.0; 3]).unwrap();
        assert!((beta - (2f64.ln() - built.planted_value.unwrap())).abs() < 1e-15);
        let unscaled = RunConfig::from_json(r#"{"problem": {"synthetic": {"n": 50, "d": 3, "seed": 1, "scaled": false}}}"#)
            .unwrap();
        assert_eq!(build_problem(&unscaled).unwrap().beta(BetaSpec::Planted, &[0.0; 3]).unwrap(), beta);
    }
}
