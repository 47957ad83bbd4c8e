//! Selection criteria: score every unlabeled candidate from the kernels'
//! predictions and query the argmax.
//!
//! With kernel predictions `f_i` and reliabilities `p_i`:
//!
//! | criterion | score |
//! |-----------|-------|
//! | EKD | `sum_j p_j sum_i p_i (f_i - f_j)^2` |
//! | EKL | `sum_i p_i (f - f_i)^2` with `f = sum_i p_i f_i` |
//! | QBC | `(1/P) sum_j (f_j - mean(f))^2` |
//! | EMC | `(1/P) sum_i (f_i - f)^2` with `f` the ensemble prediction |
//!
//! EKD and EKL read the PMF as the law of the unknown label (respectively of
//! the optimal kernel). Under uniform weights EKD is exactly twice QBC and EKL
//! equals EMC.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::active_loop::PoolState;
use crate::ensemble::Ensemble;
use crate::error::{check_dim, Error, Result};
use crate::kernel_model::loss;
use crate::rff::FeatureCache;

const PMF_TOLERANCE: f64 = 1e-9;
const PARALLEL_MIN_POOL: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionKind {
    Random,
    Qbc,
    Emc,
    Ekl,
    Ekd,
}

impl CriterionKind {
    /// All criteria, in report row order.
    pub const ALL: [CriterionKind; 5] = [
        CriterionKind::Random,
        CriterionKind::Qbc,
        CriterionKind::Emc,
        CriterionKind::Ekl,
        CriterionKind::Ekd,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CriterionKind::Random => "Random",
            CriterionKind::Qbc => "QBC",
            CriterionKind::Emc => "EMC",
            CriterionKind::Ekl => "EKL",
            CriterionKind::Ekd => "EKD",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CriterionKind::Random => "random",
            CriterionKind::Qbc => "qbc",
            CriterionKind::Emc => "emc",
            CriterionKind::Ekl => "ekl",
            CriterionKind::Ekd => "ekd",
        }
    }
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CriterionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CriterionKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parameter(format!("unknown criterion `{s}`")))
    }
}

fn check_pmf(predictions: &[f64], weights: &[f64]) -> Result<()> {
    check_dim(predictions.len(), weights.len(), "weights")?;
    if predictions.is_empty() {
        return Err(Error::Parameter("no kernel predictions".into()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Parameter("weights must be finite and nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > PMF_TOLERANCE {
        return Err(Error::Parameter(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

/// Expected kernel discrepancy.
pub fn score_ekd(predictions: &[f64], weights: &[f64]) -> Result<f64> {
    check_pmf(predictions, weights)?;
    let mut total = 0.0;
    for j in 0..predictions.len() {
        for i in 0..j {
            total += weights[i] * weights[j] * loss(predictions[i], predictions[j]);
        }
    }
    Ok(2.0 * total)
}

/// Expected kernel loss.
pub fn score_ekl(predictions: &[f64], weights: &[f64]) -> Result<f64> {
    check_pmf(predictions, weights)?;
    let combined: f64 = weights.iter().zip(predictions).map(|(p, f)| p * f).sum();
    Ok(weights
        .iter()
        .zip(predictions)
        .map(|(p, f)| p * loss(combined, *f))
        .sum())
}

/// Committee variance with unweighted members.
pub fn score_qbc(predictions: &[f64]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Parameter("no kernel predictions".into()));
    }
    let p = predictions.len() as f64;
    let mean = predictions.iter().sum::<f64>() / p;
    Ok(predictions.iter().map(|f| loss(*f, mean)).sum::<f64>() / p)
}

/// Mean squared change from the ensemble prediction `combined`.
pub fn score_emc(predictions: &[f64], combined: f64) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Parameter("no kernel predictions".into()));
    }
    let p = predictions.len() as f64;
    Ok(predictions.iter().map(|f| loss(*f, combined)).sum::<f64>() / p)
}

/// Score of one candidate under `kind`, given its kernel predictions.
/// Random has no score and yields 0.
pub fn score(kind: CriterionKind, predictions: &[f64], weights: &[f64]) -> Result<f64> {
    match kind {
        CriterionKind::Random => Ok(0.0),
        CriterionKind::Ekd => score_ekd(predictions, weights),
        CriterionKind::Ekl => score_ekl(predictions, weights),
        CriterionKind::Qbc => score_qbc(predictions),
        CriterionKind::Emc => {
            check_dim(predictions.len(), weights.len(), "weights")?;
            let combined = weights.iter().zip(predictions).map(|(p, f)| p * f).sum();
            score_emc(predictions, combined)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredCandidate {
    /// Sample index (into the full data set) of the candidate.
    pub index: usize,
    pub score: f64,
}

impl ScoredCandidate {
    /// Larger score wins; equal scores go to the smaller index.
    fn better(self, other: Self) -> Self {
        if self.score > other.score || (self.score == other.score && self.index < other.index) {
            self
        } else {
            other
        }
    }
}

/// Where candidate inputs come from: raw rows, optionally with a feature cache.
#[derive(Debug, Clone, Copy)]
pub struct Candidates<'a> {
    rows: &'a [f64],
    dim: usize,
    cache: Option<&'a FeatureCache>,
}

impl<'a> Candidates<'a> {
    /// `rows` is row-major with `dim` columns.
    pub fn new(rows: &'a [f64], dim: usize) -> Self {
        Self { rows, dim, cache: None }
    }

    pub fn with_cache(mut self, cache: &'a FeatureCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn row(&self, index: usize) -> &'a [f64] {
        &self.rows[index * self.dim..(index + 1) * self.dim]
    }

    pub fn cache(&self) -> Option<&'a FeatureCache> {
        self.cache
    }

    pub fn kernel_predictions(&self, ens: &Ensemble, index: usize) -> Result<Vec<f64>> {
        match self.cache {
            Some(cache) => Ok(ens.kernel_predictions_cached(cache, index)),
            None => ens.kernel_predictions(self.row(index)),
        }
    }
}

fn score_candidate(
    ens: &Ensemble,
    candidates: &Candidates<'_>,
    kind: CriterionKind,
    index: usize,
) -> Result<ScoredCandidate> {
    let predictions = candidates.kernel_predictions(ens, index)?;
    let score = score(kind, &predictions, ens.weights())?;
    if score.is_nan() {
        return Err(Error::Data(format!("criterion score for sample {index} is NaN")));
    }
    Ok(ScoredCandidate { index, score })
}

/// Picks the next sample to query from the unlabeled pool.
///
/// Random draws uniformly from the pool using `rng`; the other criteria score
/// every candidate and return the maximum, breaking ties by smallest index.
pub fn select<R: Rng + ?Sized>(
    ens: &Ensemble,
    pool: &PoolState,
    candidates: &Candidates<'_>,
    kind: CriterionKind,
    rng: &mut R,
) -> Result<ScoredCandidate> {
    let unlabeled = pool.unlabeled();
    if unlabeled.is_empty() {
        return Err(Error::State("cannot select from an empty pool".into()));
    }
    if kind == CriterionKind::Random {
        let index = unlabeled[rng.gen_range(0..unlabeled.len())];
        return Ok(ScoredCandidate { index, score: 0.0 });
    }
    let worst = ScoredCandidate {
        index: usize::MAX,
        score: f64::NEG_INFINITY,
    };
    if unlabeled.len() >= PARALLEL_MIN_POOL {
        unlabeled
            .par_iter()
            .map(|&i| score_candidate(ens, candidates, kind, i))
            .try_reduce(|| worst, |a, b| Ok(a.better(b)))
    } else {
        unlabeled.iter().try_fold(worst, |best, &i| {
            Ok(best.better(score_candidate(ens, candidates, kind, i)?))
        })
    }
}
