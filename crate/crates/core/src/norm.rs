//! State vectors and the norms they are measured in.
//!
//! Every state carries its [`Norm`], so metrics never mix a sup-norm
//! trajectory with an L² one by accident.

use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{MildError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    Sup,
    WeightedL2,
    WeightedL1,
}

/// A norm on R^dim. The weighted variants carry integration weights
/// (cell volumes) shared by every vector measured in them.
#[derive(Clone, Debug)]
pub enum Norm {
    Sup,
    WeightedL2(Arc<[f64]>),
    WeightedL1(Arc<[f64]>),
}

impl PartialEq for Norm {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Norm::Sup, Norm::Sup) => true,
            (Norm::WeightedL2(a), Norm::WeightedL2(b)) | (Norm::WeightedL1(a), Norm::WeightedL1(b)) => Arc::ptr_eq(a, b) || a[..] == b[..],
            _ => false,
        }
    }
}

impl Norm {
    pub fn weighted_l2(weights: Vec<f64>) -> Self {
        Norm::WeightedL2(weights.into())
    }

    pub fn weighted_l1(weights: Vec<f64>) -> Self {
        Norm::WeightedL1(weights.into())
    }

    pub fn kind(&self) -> NormKind {
        match self {
            Norm::Sup => NormKind::Sup,
            Norm::WeightedL2(_) => NormKind::WeightedL2,
            Norm::WeightedL1(_) => NormKind::WeightedL1,
        }
    }

    pub fn weights(&self) -> Option<&[f64]> {
        match self {
            Norm::Sup => None,
            Norm::WeightedL2(w) | Norm::WeightedL1(w) => Some(w),
        }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        match self {
            Norm::Sup => v.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
            Norm::WeightedL2(w) => {
                debug_assert_eq!(w.len(), v.len());
                w.iter().zip(v).map(|(w, x)| w * x * x).sum::<f64>().sqrt()
            }
            Norm::WeightedL1(w) => {
                debug_assert_eq!(w.len(), v.len());
                w.iter().zip(v).map(|(w, x)| w * x.abs()).sum()
            }
        }
    }

    pub fn of(&self, v: &DVector<f64>) -> f64 {
        self.eval(v.as_slice())
    }

    /// Norm of `a - b` without allocating.
    pub fn distance(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let (a, b) = (a.as_slice(), b.as_slice());
        match self {
            Norm::Sup => a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())),
            Norm::WeightedL2(w) => w.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * (x - y) * (x - y)).sum::<f64>().sqrt(),
            Norm::WeightedL1(w) => w.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * (x - y).abs()).sum(),
        }
    }

    /// Weighted inner product matching this norm (uniform weights for sup).
    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match self.weights() {
            Some(w) => w.iter().zip(a.iter().zip(b.iter())).map(|(w, (x, y))| w * x * y).sum(),
            None => a.dot(b),
        }
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        match self.weights() {
            Some(w) if w.len() != dim => Err(MildError::DimensionMismatch { expected: dim, got: w.len() }),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub values: DVector<f64>,
    pub norm: Norm,
}

impl StateVector {
    pub fn new(values: DVector<f64>, norm: Norm) -> Result<Self> {
        norm.check_dim(values.len())?;
        Ok(Self { values, norm })
    }

    pub fn from_slice(values: &[f64], norm: Norm) -> Result<Self> {
        Self::new(DVector::from_column_slice(values), norm)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.norm.of(&self.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    pub fn with_values(&self, values: DVector<f64>) -> Self {
        Self { values, norm: self.norm.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_of_simple_vector() {
        let v = [3.0, -4.0];
        assert_eq!(Norm::Sup.eval(&v), 4.0);
        assert!((Norm::weighted_l2(vec![1.0, 1.0]).eval(&v) - 5.0).abs() < 1e-15);
        assert_eq!(Norm::weighted_l1(vec![0.5, 0.5]).eval(&v), 3.5);
    }

    #[test]
    fn mismatched_weights_are_rejected() {
        let err = StateVector::from_slice(&[1.0, 2.0, 3.0], Norm::weighted_l2(vec![1.0; 2])).unwrap_err();
        assert_eq!(err, MildError::DimensionMismatch { expected: 3, got: 2 });
    }

    #[test]
    fn norms_compare_by_weights() {
        assert_eq!(Norm::weighted_l2(vec![0.5; 2]), Norm::weighted_l2(vec![0.5; 2]));
        assert_ne!(Norm::weighted_l2(vec![0.5; 2]), Norm::weighted_l1(vec![0.5; 2]));
        assert_ne!(Norm::Sup, Norm::weighted_l2(vec![1.0]));
    }
}
