//! Supervised refit on the labeled set, and the online alternative.
//!
//! For each kernel the parameters solve `min |Z^T theta - y|^2 + ridge |theta|^2`
//! where the columns of `Z` are the labeled samples' feature vectors. The solve
//! goes through an SVD of the `T x 2D` design, costing `O(T (2D)^2)`; with
//! `ridge = 0` it returns the minimum-norm least-squares solution. Kernel
//! weights are then `softmax(-eta_g * training loss)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{exp_weights, Ensemble};
use crate::error::{check_dim, Error, Result};
use crate::kernel_model::{loss, KernelModel};
use crate::rff::FeatureMap;

/// How the final predictor is formed after the active loop.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InferenceMode {
    /// Use the loop's final ensemble as is.
    #[default]
    Online,
    /// Refit every kernel by least squares on the labeled set.
    Supervised,
}

impl std::str::FromStr for InferenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "online" => Ok(InferenceMode::Online),
            "supervised" => Ok(InferenceMode::Supervised),
            other => Err(Error::Parameter(format!("unknown inference mode `{other}`"))),
        }
    }
}

/// Design matrix with row `t` equal to `z(x_t)`.
pub fn design_matrix(map: &FeatureMap, xs: &[&[f64]]) -> Result<DMatrix<f64>> {
    let width = map.output_dim();
    let mut data = vec![0.0; xs.len() * width];
    for (x, row) in xs.iter().zip(data.chunks_exact_mut(width)) {
        map.feature_vector_into(x, row)?;
    }
    Ok(DMatrix::from_row_slice(xs.len(), width, &data))
}

/// Ridge-regularized (or, for `ridge = 0`, minimum-norm) least-squares
/// parameters of one kernel on the labeled samples.
pub fn fit_theta(map: &FeatureMap, xs: &[&[f64]], ys: &[f64], ridge: f64) -> Result<Vec<f64>> {
    check_dim(xs.len(), ys.len(), "labels")?;
    if xs.is_empty() {
        return Err(Error::Parameter("cannot fit on an empty labeled set".into()));
    }
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(Error::Parameter(format!("ridge must be nonnegative, got {ridge}")));
    }
    if ys.iter().any(|y| !y.is_finite()) || xs.iter().any(|x| x.iter().any(|v| !v.is_finite())) {
        return Err(Error::Data("labeled set contains non-finite values".into()));
    }
    let a = design_matrix(map, xs)?;
    let y = DVector::from_column_slice(ys);
    let svd = a.svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let s = &svd.singular_values;
    let s_max = s.max();
    let cutoff = f64::EPSILON * xs.len().max(map.output_dim()) as f64 * s_max;
    let uty = u.tr_mul(&y);
    let coeffs = DVector::from_iterator(
        s.len(),
        s.iter().zip(uty.iter()).map(|(&si, &c)| {
            if ridge > 0.0 {
                c * si / (si * si + ridge)
            } else if si > cutoff {
                c / si
            } else {
                0.0
            }
        }),
    );
    let theta = v_t.tr_mul(&coeffs);
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("least-squares solve produced non-finite parameters".into()));
    }
    Ok(theta.iter().copied().collect())
}

/// Training loss `sum_t (theta . z(x_t) - y_t)^2` of one kernel.
pub fn total_loss(model: &KernelModel, xs: &[&[f64]], ys: &[f64]) -> Result<f64> {
    xs.iter()
        .zip(ys)
        .map(|(x, &y)| Ok(loss(model.predict(x)?, y)))
        .sum()
}

/// Reliability weights `softmax(-eta_g * training loss)` of fitted kernels.
pub fn fit_weights(models: &[KernelModel], xs: &[&[f64]], ys: &[f64], eta_g: f64) -> Result<Vec<f64>> {
    if models.is_empty() {
        return Err(Error::Parameter("no kernel models to weight".into()));
    }
    if !(eta_g.is_finite() && eta_g >= 0.0) {
        return Err(Error::Parameter(format!("eta_g must be nonnegative, got {eta_g}")));
    }
    let losses = models
        .iter()
        .map(|m| total_loss(m, xs, ys))
        .collect::<Result<Vec<_>>>()?;
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::Data("kernel training loss is not finite".into()));
    }
    Ok(exp_weights(&losses, eta_g))
}

/// Kernels refit on the labeled set, with their reliability weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchFit {
    models: Vec<KernelModel>,
    weights: Vec<f64>,
}

impl BatchFit {
    /// Fits every kernel independently (in parallel), then the weights.
    pub fn fit(maps: &[Arc<FeatureMap>], xs: &[&[f64]], ys: &[f64], ridge: f64, eta_g: f64) -> Result<Self> {
        let models = maps
            .par_iter()
            .map(|map| KernelModel::with_theta(map.clone(), fit_theta(map, xs, ys, ridge)?))
            .collect::<Result<Vec<_>>>()?;
        let weights = fit_weights(&models, xs, ys, eta_g)?;
        Ok(Self { models, weights })
    }

    /// Assembles a fit from given parameters and weights.
    pub fn from_parts(models: Vec<KernelModel>, weights: Vec<f64>) -> Result<Self> {
        check_dim(models.len(), weights.len(), "weights")?;
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter("weights must form a probability vector".into()));
        }
        Ok(Self { models, weights })
    }

    pub fn models(&self) -> &[KernelModel] {
        &self.models
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `sum_i p_i theta_i . z_i(x)`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.models
            .iter()
            .zip(&self.weights)
            .map(|(m, p)| Ok(p * m.predict(x)?))
            .sum()
    }
}

/// Prediction of the loop's final ensemble.
pub fn online_predict(ens: &Ensemble, x: &[f64]) -> Result<f64> {
    ens.combined_predict(x)
}
