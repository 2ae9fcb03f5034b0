//! Datasets: the planted synthetic generator, LIBSVM text files and the
//! on-disk dataset cache.

mod fetch;
mod libsvm;
mod synthetic;

pub use fetch::{data_path, fetch_datasets, fetch_datasets_with, known, DatasetSource, FetchMode, KnownDataset, KNOWN_DATASETS};
pub use libsvm::{parse_libsvm, write_libsvm};
pub use synthetic::{gen_synthetic, SyntheticData};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::Vector;

/// Binary-labelled dense dataset. Row `i` of the feature matrix is `x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    n: usize,
    d: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from row-major features. Labels must be exactly ±1.
    pub fn new(name: impl Into<String>, d: usize, features: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if d == 0 {
            return Err(Error::Precondition("dataset must have at least one feature".into()));
        }
        if features.len() != n * d {
            return Err(Error::Dimension {
                expected: n * d,
                got: features.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::Precondition(format!("label {bad} is not ±1")));
        }
        Ok(Dataset {
            name: name.into(),
            n,
            d,
            features,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.features.chunks_exact(self.d).zip(self.labels.iter().copied())
    }

    /// Largest row norm `max_i ‖x_i‖`, optionally after diagonal scaling.
    pub fn max_row_norm(&self, scaling: Option<&ScalingSpec>) -> f64 {
        self.rows()
            .map(|(x, _)| match scaling {
                Some(v) => x.iter().zip(v.diag()).map(|(a, s)| (a * s).powi(2)).sum::<f64>(),
                None => x.iter().map(|a| a * a).sum::<f64>(),
            })
            .fold(0.0, f64::max)
            .sqrt()
    }
}

/// Positive diagonal scaling matrix `V`, stored as its diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    diag: Vector,
    /// How the diagonal was produced, e.g. `"exp(Unif(-10,10)), seed 3"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<String>,
}

impl ScalingSpec {
    pub fn new(diag: Vector) -> Result<Self> {
        if let Some(bad) = diag.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Precondition(format!(
                "scaling entries must be finite and positive, found {bad}"
            )));
        }
        Ok(ScalingSpec { diag, law: None })
    }

    pub fn identity(d: usize) -> Self {
        ScalingSpec {
            diag: Vector::filled(d, 1.0),
            law: Some("identity".into()),
        }
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn dim(&self) -> usize {
        self.diag.dim()
    }

    pub fn is_identity(&self) -> bool {
        self.diag.iter().all(|&v| v == 1.0)
    }

    /// `V ∘ w`.
    pub fn apply(&self, w: &[f64]) -> Vector {
        w.iter().zip(self.diag.iter()).map(|(a, v)| a * v).collect::<Vec<_>>().into()
    }

    /// `‖g‖²_{V⁻²} = Σ_k g[k]² / V_kk²`.
    pub fn weighted_norm_sq(&self, g: &[f64]) -> f64 {
        g.iter().zip(self.diag.iter()).map(|(a, v)| (a / v).powi(2)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_binary_labels() {
        assert!(Dataset::new("x", 1, vec![1.0], vec![0.0]).is_err());
        assert!(Dataset::new("x", 1, vec![], vec![]).is_err());
        assert!(Dataset::new("x", 2, vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn scaling_must_be_positive() {
        assert!(ScalingSpec::new(vec![1.0, 0.0].into()).is_err());
        assert!(ScalingSpec::new(vec![1.0, f64::INFINITY].into()).is_err());
        let v = ScalingSpec::new(vec![2.0, 0.5].into()).unwrap();
        assert_eq!(v.apply(&[1.0, 4.0]).as_slice(), &[2.0, 2.0]);
        assert_eq!(v.weighted_norm_sq(&[2.0, 1.0]), 1.0 + 4.0);
    }
}
