//! The sequential active-learning loop.
//!
//! Each iteration selects one sample from the unlabeled pool, queries its
//! label, records every kernel's loss on it (before any update), takes one
//! SGD step per kernel, and refreshes the reliability weights.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::criteria::{self, Candidates, CriterionKind};
use crate::data::Dataset;
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::kernel_model::loss;
use crate::rff::{FeatureCache, FeatureMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub index: usize,
    /// 1-based iteration at which the label was acquired.
    pub time: usize,
}

/// Partition of sample indices into the unlabeled pool and the labeled set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolState {
    /// Sorted ascending.
    unlabeled: Vec<usize>,
    labeled: Vec<LabeledSample>,
    num_samples: usize,
}

impl PoolState {
    /// All of `0..num_samples` unlabeled.
    pub fn new(num_samples: usize) -> Self {
        Self {
            unlabeled: (0..num_samples).collect(),
            labeled: Vec::new(),
            num_samples,
        }
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    pub fn labeled(&self) -> &[LabeledSample] {
        &self.labeled
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn is_unlabeled(&self, index: usize) -> bool {
        self.unlabeled.binary_search(&index).is_ok()
    }

    /// Moves `index` from the pool to the labeled set.
    pub fn label(&mut self, index: usize, time: usize) -> Result<()> {
        let pos = self.unlabeled.binary_search(&index).map_err(|_| {
            Error::State(format!("sample {index} is not in the unlabeled pool"))
        })?;
        self.unlabeled.remove(pos);
        self.labeled.push(LabeledSample { index, time });
        Ok(())
    }

    /// Checks disjointness, coverage of `0..num_samples`, and that labeling
    /// times run 1, 2, ...
    pub fn check_partition(&self) -> Result<()> {
        let mut seen = vec![false; self.num_samples];
        for &i in &self.unlabeled {
            if i >= self.num_samples || std::mem::replace(&mut seen[i], true) {
                return Err(Error::State(format!("pool index {i} duplicated or out of range")));
            }
        }
        for (k, s) in self.labeled.iter().enumerate() {
            if s.index >= self.num_samples || std::mem::replace(&mut seen[s.index], true) {
                return Err(Error::State(format!("sample {} labeled twice or in the pool", s.index)));
            }
            if s.time != k + 1 {
                return Err(Error::State(format!("labeled entry {k} has time {}", s.time)));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::State("pool and labeled set do not cover every sample".into()));
        }
        Ok(())
    }
}

/// Source of true labels, consulted only after a sample is selected.
pub trait LabelOracle {
    fn label(&self, index: usize) -> Result<f64>;
}

impl LabelOracle for Dataset {
    fn label(&self, index: usize) -> Result<f64> {
        self.labels()
            .get(index)
            .copied()
            .ok_or_else(|| Error::State(format!("no label for sample {index}")))
    }
}

impl LabelOracle for [f64] {
    fn label(&self, index: usize) -> Result<f64> {
        self.get(index)
            .copied()
            .ok_or_else(|| Error::State(format!("no label for sample {index}")))
    }
}

/// What happened in one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub time: usize,
    pub index: usize,
    /// Criterion score of the chosen sample (0 for random selection).
    pub score: f64,
    /// Loss of each kernel on the chosen sample, before its update.
    pub losses: Vec<f64>,
    /// Reliability weights after the update.
    pub weights: Vec<f64>,
}

/// Learning rates and budget of one loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSettings {
    pub criterion: CriterionKind,
    pub budget: usize,
    pub eta_l: f64,
    pub eta_g: f64,
    pub cache_features: bool,
}

/// Loop state between iterations.
#[derive(Debug, Clone)]
pub struct ActiveLearner {
    ensemble: Ensemble,
    pool: PoolState,
    trace: Vec<TraceEntry>,
    eta_l: f64,
}

impl ActiveLearner {
    pub fn new(ensemble: Ensemble, pool: PoolState, eta_l: f64) -> Self {
        Self {
            ensemble,
            pool,
            trace: Vec::new(),
            eta_l,
        }
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn pool(&self) -> &PoolState {
        &self.pool
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn into_parts(self) -> (Ensemble, PoolState, Vec<TraceEntry>) {
        (self.ensemble, self.pool, self.trace)
    }

    /// One iteration: select with `kind`, then learn from the queried label.
    pub fn step<R, O>(
        &mut self,
        candidates: &Candidates<'_>,
        oracle: &O,
        kind: CriterionKind,
        rng: &mut R,
    ) -> Result<&TraceEntry>
    where
        R: Rng + ?Sized,
        O: LabelOracle + ?Sized,
    {
        let chosen = criteria::select(&self.ensemble, &self.pool, candidates, kind, rng)?;
        self.learn(candidates, oracle, chosen.index, chosen.score)
    }

    /// One iteration with the query point fixed in advance.
    pub fn step_forced<O>(&mut self, candidates: &Candidates<'_>, oracle: &O, index: usize) -> Result<&TraceEntry>
    where
        O: LabelOracle + ?Sized,
    {
        if !self.pool.is_unlabeled(index) {
            return Err(Error::State(format!("sample {index} is not in the unlabeled pool")));
        }
        self.learn(candidates, oracle, index, 0.0)
    }

    fn learn<O>(&mut self, candidates: &Candidates<'_>, oracle: &O, index: usize, score: f64) -> Result<&TraceEntry>
    where
        O: LabelOracle + ?Sized,
    {
        let y = oracle.label(index)?;
        if !y.is_finite() {
            return Err(Error::Data(format!("label of sample {index} is not finite")));
        }
        let losses: Vec<f64> = candidates
            .kernel_predictions(&self.ensemble, index)?
            .into_iter()
            .map(|f| loss(f, y))
            .collect();
        match candidates.cache() {
            Some(cache) => self.ensemble.local_step_cached(cache, index, y, self.eta_l)?,
            None => self.ensemble.local_step(candidates.row(index), y, self.eta_l)?,
        }
        self.ensemble.update_weights(&losses)?;
        let time = self.trace.len() + 1;
        self.pool.label(index, time)?;
        self.trace.push(TraceEntry {
            time,
            index,
            score,
            losses,
            weights: self.ensemble.weights().to_vec(),
        });
        Ok(self.trace.last().expect("just pushed"))
    }
}

/// Result of a complete loop.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub ensemble: Ensemble,
    pub pool: PoolState,
    pub trace: Vec<TraceEntry>,
}

fn prepare<'a>(
    dataset: &'a Dataset,
    maps: &[Arc<FeatureMap>],
    settings: &LoopSettings,
    cache: &'a mut Option<FeatureCache>,
) -> Result<(ActiveLearner, Candidates<'a>)> {
    if settings.budget >= dataset.len() {
        return Err(Error::Config(format!(
            "label budget {} must be smaller than the pool size {}",
            settings.budget,
            dataset.len()
        )));
    }
    if let Some(map) = maps.iter().find(|m| m.input_dim() != dataset.dim()) {
        return Err(Error::Parameter(format!(
            "feature map expects {} inputs but the data set has {}",
            map.input_dim(),
            dataset.dim()
        )));
    }
    let ensemble = Ensemble::new(maps, settings.eta_g)?;
    let learner = ActiveLearner::new(ensemble, PoolState::new(dataset.len()), settings.eta_l);
    let mut candidates = Candidates::new(dataset.features(), dataset.dim());
    if settings.cache_features {
        *cache = Some(FeatureCache::build(maps, dataset.rows())?);
        candidates = candidates.with_cache(cache.as_ref().expect("cache built"));
    }
    Ok((learner, candidates))
}

/// Runs `settings.budget` iterations from zero-initialized models.
pub fn run<R: Rng + ?Sized>(
    dataset: &Dataset,
    maps: &[Arc<FeatureMap>],
    settings: &LoopSettings,
    rng: &mut R,
) -> Result<RunOutcome> {
    let mut cache = None;
    let (mut learner, candidates) = prepare(dataset, maps, settings, &mut cache)?;
    for _ in 0..settings.budget {
        learner.step(&candidates, dataset, settings.criterion, rng)?;
        learner.pool.check_partition()?;
    }
    let (ensemble, pool, trace) = learner.into_parts();
    Ok(RunOutcome { ensemble, pool, trace })
}

/// Re-runs a loop with the query sequence fixed to `selections`.
pub fn replay(
    dataset: &Dataset,
    maps: &[Arc<FeatureMap>],
    settings: &LoopSettings,
    selections: &[usize],
) -> Result<RunOutcome> {
    let settings = LoopSettings {
        budget: selections.len(),
        ..*settings
    };
    let mut cache = None;
    let (mut learner, candidates) = prepare(dataset, maps, &settings, &mut cache)?;
    for &index in selections {
        learner.step_forced(&candidates, dataset, index)?;
        learner.pool.check_partition()?;
    }
    let (ensemble, pool, trace) = learner.into_parts();
    Ok(RunOutcome { ensemble, pool, trace })
}
