//! Dense coordinate vectors and the elementwise arithmetic used by the optimizers.

use std::ops::{Deref, Index};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed-length vector of `f64` coordinates.
///
/// The length is fixed at construction; mutation happens through
/// [`Vector::as_mut_slice`] only, so the dimension can never change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Vector(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.0)
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl From<&[f64]> for Vector {
    fn from(v: &[f64]) -> Self {
        Vector(v.to_vec())
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementwiseOp {
    Add,
    Sub,
    Mul,
    /// Division; zero divisors follow IEEE semantics and are the caller's concern.
    Div,
    Sqrt,
    Square,
}

impl ElementwiseOp {
    fn is_unary(self) -> bool {
        matches!(self, ElementwiseOp::Sqrt | ElementwiseOp::Square)
    }
}

/// Coordinate-wise `op(a, b)`. Unary ops ignore `b`; binary ops require it.
pub fn elementwise(op: ElementwiseOp, a: &Vector, b: Option<&Vector>) -> Result<Vector> {
    if op.is_unary() {
        let out = a
            .iter()
            .map(|&x| match op {
                ElementwiseOp::Sqrt => x.sqrt(),
                _ => x * x,
            })
            .collect::<Vec<_>>();
        return Ok(Vector(out));
    }
    let b = b.ok_or_else(|| Error::Precondition(format!("{op:?} needs a second operand")))?;
    check_dims(a.dim(), b.dim())?;
    let out = a
        .iter()
        .zip(b.iter())
        .map(|(&x, &y)| match op {
            ElementwiseOp::Add => x + y,
            ElementwiseOp::Sub => x - y,
            ElementwiseOp::Mul => x * y,
            ElementwiseOp::Div => x / y,
            ElementwiseOp::Sqrt | ElementwiseOp::Square => unreachable!(),
        })
        .collect();
    Ok(Vector(out))
}

pub(crate) fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}
