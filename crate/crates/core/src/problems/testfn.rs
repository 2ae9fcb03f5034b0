//! Analytic test functions with known smoothness and minimizers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{dot, Vector};

use super::{check_point, Objective};

/// `f(w) = ½ wᵀAw − bᵀw` with `A` symmetric positive semidefinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Quadratic {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let d = b.len();
        if d == 0 {
            return Err(Error::Precondition("quadratic needs d >= 1".into()));
        }
        for row in &a {
            crate::vector::check_dims(d, row.len())?;
        }
        crate::vector::check_dims(d, a.len())?;
        for i in 0..d {
            for j in 0..i {
                let (x, y) = (a[i][j], a[j][i]);
                if (x - y).abs() > 1e-12 * (1.0 + x.abs().max(y.abs())) {
                    return Err(Error::Precondition(format!("A is not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Quadratic { a, b })
    }

    pub fn diagonal(diag: &[f64], b: Vec<f64>) -> Result<Self> {
        let d = diag.len();
        let a = (0..d)
            .map(|i| (0..d).map(|j| if i == j { diag[i] } else { 0.0 }).collect())
            .collect();
        Quadratic::new(a, b)
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn linear(&self) -> &[f64] {
        &self.b
    }

    fn mat_vec(&self, w: &[f64]) -> Vec<f64> {
        self.a.iter().map(|row| dot(row, w)).collect()
    }

    /// Largest eigenvalue of `A` by power iteration with a Rayleigh-quotient
    /// stopping rule (relative change below 1e-10).
    pub fn smoothness_bound(&self) -> f64 {
        let d = self.b.len();
        // uneven start so diagonal and permutation-symmetric A are not degenerate
        let mut v: Vec<f64> = (0..d).map(|k| 1.0 + 0.1 * k as f64 / d as f64).collect();
        let mut lambda = 0.0;
        for _ in 0..100_000 {
            let norm = dot(&v, &v).sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            let av = self.mat_vec(&v);
            let next = dot(&v, &av);
            let done = (next - lambda).abs() <= 1e-10 * next.abs().max(f64::MIN_POSITIVE);
            lambda = next;
            v = av;
            if done {
                break;
            }
        }
        lambda
    }

    /// `A⁻¹ b` via Cholesky; fails unless `A` is positive definite.
    pub fn minimizer(&self) -> Result<Vector> {
        let d = self.b.len();
        let mut l = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..=i {
                let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
                if i == j {
                    let diag = self.a[i][i] - s;
                    if diag <= 0.0 {
                        return Err(Error::Unsupported(
                            "minimum unavailable: A is not positive definite".into(),
                        ));
                    }
                    l[i][i] = diag.sqrt();
                } else {
                    l[i][j] = (self.a[i][j] - s) / l[j][j];
                }
            }
        }
        let mut y = vec![0.0; d];
        for i in 0..d {
            let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
            y[i] = (self.b[i] - s) / l[i][i];
        }
        let mut x = vec![0.0; d];
        for i in (0..d).rev() {
            let s: f64 = (i + 1..d).map(|k| l[k][i] * x[k]).sum();
            x[i] = (y[i] - s) / l[i][i];
        }
        Ok(x.into())
    }

    /// `f* = −½ bᵀA⁻¹b`.
    pub fn min_value(&self) -> Result<f64> {
        let x = self.minimizer()?;
        Ok(-0.5 * dot(&self.b, &x))
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, w: &[f64]) -> Result<f64> {
        check_point(self.dim(), w, "objective")?;
        Ok(0.5 * dot(w, &self.mat_vec(w)) - dot(&self.b, w))
    }

    fn gradient(&self, w: &[f64]) -> Result<Vector> {
        check_point(self.dim(), w, "gradient")?;
        let aw = self.mat_vec(w);
        Ok(aw.iter().zip(&self.b).map(|(x, y)| x - y).collect::<Vec<_>>().into())
    }
}

/// Chained Rosenbrock: `Σ_{i<d-1} 100 (w[i+1] − w[i]²)² + (1 − w[i])²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rosenbrock {
    pub d: usize,
}

impl Rosenbrock {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Precondition("Rosenbrock needs d >= 2".into()));
        }
        Ok(Rosenbrock { d })
    }
}

impl Objective for Rosenbrock {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, w: &[f64]) -> Result<f64> {
        check_point(self.d, w, "objective")?;
        Ok(w
            .windows(2)
            .map(|p| 100.0 * (p[1] - p[0] * p[0]).powi(2) + (1.0 - p[0]).powi(2))
            .sum())
    }

    fn gradient(&self, w: &[f64]) -> Result<Vector> {
        check_point(self.d, w, "gradient")?;
        let mut g = vec![0.0; self.d];
        for i in 0..self.d - 1 {
            let r = w[i + 1] - w[i] * w[i];
            g[i] += -400.0 * w[i] * r - 2.0 * (1.0 - w[i]);
            g[i + 1] += 200.0 * r;
        }
        Ok(g.into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    Quadratic(Quadratic),
    Rosenbrock(Rosenbrock),
}

impl TestFunction {
    /// Global smoothness constant `L`. Rosenbrock has none.
    pub fn smoothness_bound(&self) -> Result<f64> {
        match self {
            TestFunction::Quadratic(q) => Ok(q.smoothness_bound()),
            TestFunction::Rosenbrock(_) => Err(Error::Unsupported(
                "Rosenbrock is not globally smooth; supply a box-local L".into(),
            )),
        }
    }

    fn inner(&self) -> &dyn Objective {
        match self {
            TestFunction::Quadratic(q) => q,
            TestFunction::Rosenbrock(r) => r,
        }
    }
}

impl Objective for TestFunction {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn value(&self, w: &[f64]) -> Result<f64> {
        self.inner().value(w)
    }

    fn gradient(&self, w: &[f64]) -> Result<Vector> {
        self.inner().gradient(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothness_of_simple_spectra() {
        let id = Quadratic::diagonal(&[1.0, 1.0, 1.0], vec![0.0; 3]).unwrap();
        assert!((id.smoothness_bound() - 1.0).abs() < 1e-12);
        let q = Quadratic::diagonal(&[1.0, 4.0], vec![1.0, 1.0]).unwrap();
        assert!((TestFunction::Quadratic(q).smoothness_bound().unwrap() - 4.0).abs() < 1e-8);
        assert!(TestFunction::Rosenbrock(Rosenbrock::new(3).unwrap())
            .smoothness_bound()
            .is_err());
    }

    #[test]
    fn quadratic_minimum() {
        let q = Quadratic::diagonal(&[1.0, 4.0], vec![1.0, 2.0]).unwrap();
        let x = q.minimizer().unwrap();
        assert_eq!(x.as_slice(), &[1.0, 0.5]);
        assert!((q.min_value().unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(q.gradient(&x).unwrap().as_slice(), &[0.0, 0.0]);
        let psd = Quadratic::diagonal(&[1.0, 0.0], vec![1.0, 0.0]).unwrap();
        assert!(psd.min_value().is_err());
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        assert!(Quadratic::new(vec![vec![1.0, 2.0], vec![0.0, 1.0]], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn rosenbrock_minimizer() {
        let r = Rosenbrock::new(4).unwrap();
        assert_eq!(r.value(&[1.0; 4]).unwrap(), 0.0);
        assert_eq!(r.gradient(&[1.0; 4]).unwrap().as_slice(), &[0.0; 4]);
        assert!(Rosenbrock::new(1).is_err());
    }
}
