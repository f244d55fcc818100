//! Dense real vectors, the ADMM iterate triple `(x, v, u)` and the
//! normalized distance between triples used as the progress residual.

use std::ops::Deref;

use crate::error::{Error, Result};

/// Non-empty vector of finite `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct RealVector(Vec<f64>);

impl RealVector {
    /// Rejects empty input and any NaN or infinite entry.
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self(data))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "RealVector dimension must be positive");
        Self(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; dim])
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[index] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        euclidean_norm(&self.0)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        distance(&self.0, &other.0)
    }

    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|v| v * t).collect())
    }
}

impl Deref for RealVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for RealVector {
    type Error = Error;

    fn try_from(data: Vec<f64>) -> Result<Self> {
        Self::new(data)
    }
}

/// The ADMM state `θ = (x, v, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateTriple {
    pub x: RealVector,
    pub v: RealVector,
    pub u: RealVector,
}

impl IterateTriple {
    pub fn new(x: RealVector, v: RealVector, u: RealVector) -> Result<Self> {
        let d = x.dim();
        check_dim("v", d, v.dim())?;
        check_dim("u", d, u.dim())?;
        Ok(Self { x, v, u })
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }
}

/// `D(a, b) = (‖x_a − x_b‖ + ‖v_a − v_b‖ + ‖u_a − u_b‖) / √d`.
pub fn metric_distance(a: &IterateTriple, b: &IterateTriple) -> Result<f64> {
    let d = a.dim();
    check_dim("x", d, b.x.dim())?;
    check_dim("v", d, b.v.dim())?;
    check_dim("u", d, b.u.dim())?;
    let sum = a.x.distance(&b.x) + a.v.distance(&b.v) + a.u.distance(&b.u);
    Ok(sum / (d as f64).sqrt())
}

pub fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn check_dim(component: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            component,
            expected,
            actual,
        })
    }
}
