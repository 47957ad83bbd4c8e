//! The kernel ensemble: P single-kernel models, their reliability PMF, and
//! the exponential-weights update.

use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::kernel_model::{loss, KernelModel};
use crate::rff::{FeatureCache, FeatureMap};

/// `softmax(-eta * cumulative)`, evaluated with the minimum loss shifted to
/// zero so the exponent never overflows.
pub fn exp_weights(cumulative: &[f64], eta: f64) -> Vec<f64> {
    let min = cumulative.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = cumulative
        .iter()
        .map(|&c| (-eta * (c - min)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    models: Vec<KernelModel>,
    weights: Vec<f64>,
    cum_losses: Vec<f64>,
    eta_g: f64,
}

impl Ensemble {
    /// Zero-initialized models over `maps` with uniform weights.
    pub fn new(maps: &[Arc<FeatureMap>], eta_g: f64) -> Result<Self> {
        Self::from_models(maps.iter().cloned().map(KernelModel::zeros).collect(), eta_g)
    }

    /// Wraps existing models; weights start uniform and cumulative losses at 0.
    pub fn from_models(models: Vec<KernelModel>, eta_g: f64) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Parameter("ensemble needs at least one kernel".into()));
        }
        if !(eta_g.is_finite() && eta_g >= 0.0) {
            return Err(Error::Parameter(format!("eta_g must be nonnegative, got {eta_g}")));
        }
        let p = models.len();
        Ok(Self {
            models,
            weights: vec![1.0 / p as f64; p],
            cum_losses: vec![0.0; p],
            eta_g,
        })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[KernelModel] {
        &self.models
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cum_losses(&self) -> &[f64] {
        &self.cum_losses
    }

    pub fn eta_g(&self) -> f64 {
        self.eta_g
    }

    /// `f_i(x)` for every kernel.
    pub fn kernel_predictions(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.models.iter().map(|m| m.predict(x)).collect()
    }

    /// `f_i(x)` for every kernel, from cached features of sample `index`.
    pub fn kernel_predictions_cached(&self, cache: &FeatureCache, index: usize) -> Vec<f64> {
        self.models
            .iter()
            .enumerate()
            .map(|(k, m)| m.predict_features(cache.features(k, index)))
            .collect()
    }

    /// `sum_i p_i f_i(x)`.
    pub fn combined_predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.combine(&self.kernel_predictions(x)?))
    }

    /// Weighted combination of already-computed kernel predictions.
    pub fn combine(&self, predictions: &[f64]) -> f64 {
        self.weights.iter().zip(predictions).map(|(p, f)| p * f).sum()
    }

    /// Per-kernel losses on `(x, y)` under the current parameters.
    pub fn prequential_losses(&self, x: &[f64], y: f64) -> Result<Vec<f64>> {
        Ok(self
            .kernel_predictions(x)?
            .into_iter()
            .map(|f| loss(f, y))
            .collect())
    }

    /// Adds `per_kernel_losses` to the running totals and recomputes the
    /// weights as `softmax(-eta_g * cum_losses)`.
    pub fn update_weights(&mut self, per_kernel_losses: &[f64]) -> Result<()> {
        check_dim(self.len(), per_kernel_losses.len(), "per-kernel losses")?;
        if let Some(bad) = per_kernel_losses.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::Data(format!("kernel loss must be finite and nonnegative, got {bad}")));
        }
        for (c, l) in self.cum_losses.iter_mut().zip(per_kernel_losses) {
            *c += l;
        }
        self.weights = exp_weights(&self.cum_losses, self.eta_g);
        Ok(())
    }

    /// SGD step of every kernel on `(x, y)`.
    pub fn local_step(&mut self, x: &[f64], y: f64, eta_l: f64) -> Result<()> {
        self.models.iter_mut().try_for_each(|m| m.sgd_step(x, y, eta_l))
    }

    pub(crate) fn local_step_cached(
        &mut self,
        cache: &FeatureCache,
        index: usize,
        y: f64,
        eta_l: f64,
    ) -> Result<()> {
        self.models
            .iter_mut()
            .enumerate()
            .try_for_each(|(k, m)| m.sgd_step_features(cache.features(k, index), y, eta_l))
    }
}
