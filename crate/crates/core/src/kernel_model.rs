//! Single-kernel linear predictors in random-feature space.

use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::rff::FeatureMap;

/// The least-squares loss `(a - b)^2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SquaredLoss;

impl SquaredLoss {
    #[inline]
    pub fn loss(self, yhat: f64, y: f64) -> f64 {
        let r = yhat - y;
        r * r
    }

    /// Derivative of the loss in its first argument.
    #[inline]
    pub fn derivative(self, yhat: f64, y: f64) -> f64 {
        2.0 * (yhat - y)
    }
}

/// `(yhat - y)^2`.
#[inline]
pub fn loss(yhat: f64, y: f64) -> f64 {
    SquaredLoss.loss(yhat, y)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `f(x) = theta . z(x)` for one kernel's feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    theta: Vec<f64>,
    map: Arc<FeatureMap>,
}

impl KernelModel {
    /// A model with all-zero parameters.
    pub fn zeros(map: Arc<FeatureMap>) -> Self {
        Self {
            theta: vec![0.0; map.output_dim()],
            map,
        }
    }

    pub fn with_theta(map: Arc<FeatureMap>, theta: Vec<f64>) -> Result<Self> {
        check_dim(map.output_dim(), theta.len(), "theta")?;
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("theta has non-finite entries".into()));
        }
        Ok(Self { theta, map })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn map(&self) -> &Arc<FeatureMap> {
        &self.map
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let z = self.map.feature_vector(x)?;
        Ok(dot(&self.theta, &z))
    }

    /// Prediction from a precomputed feature vector `z(x)`.
    pub fn predict_features(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.theta.len());
        dot(&self.theta, z)
    }

    /// Gradient of `loss(theta . z(x), y)` with respect to theta.
    pub fn gradient(&self, x: &[f64], y: f64) -> Result<Vec<f64>> {
        let z = self.map.feature_vector(x)?;
        let g = SquaredLoss.derivative(dot(&self.theta, &z), y);
        Ok(z.into_iter().map(|zi| g * zi).collect())
    }

    /// One SGD step on `(x, y)`: `theta -= eta_l * 2 (theta.z - y) z`.
    pub fn sgd_step(&mut self, x: &[f64], y: f64, eta_l: f64) -> Result<()> {
        if x.iter().any(|v| !v.is_finite()) || !y.is_finite() {
            return Err(Error::Data("SGD sample has non-finite entries".into()));
        }
        let z = self.map.feature_vector(x)?;
        self.sgd_step_features(&z, y, eta_l)
    }

    /// SGD step from a precomputed feature vector.
    pub fn sgd_step_features(&mut self, z: &[f64], y: f64, eta_l: f64) -> Result<()> {
        if !(eta_l.is_finite() && eta_l >= 0.0) {
            return Err(Error::Parameter(format!("eta_l must be nonnegative, got {eta_l}")));
        }
        if !y.is_finite() {
            return Err(Error::Data("SGD label is not finite".into()));
        }
        check_dim(self.theta.len(), z.len(), "feature vector")?;
        let step = eta_l * SquaredLoss.derivative(dot(&self.theta, z), y);
        for (t, zi) in self.theta.iter_mut().zip(z) {
            *t -= step * zi;
        }
        if self.theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("SGD step produced non-finite parameters".into()));
        }
        Ok(())
    }
}
