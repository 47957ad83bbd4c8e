//! Data sets: CSV ingestion, preprocessing, synthetic generators, and the
//! experiment configuration.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::active_loop::PoolState;
use crate::batch_solver::InferenceMode;
use crate::criteria::CriterionKind;
use crate::error::{Error, Result};
use crate::kernel_model::KernelModel;
use crate::rff::build_dictionary;
use crate::seeding::{derive_seed, rng_from_seed};

/// `M` samples in `d` dimensions with real labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    /// Row-major `M x d`.
    features: Vec<f64>,
    dim: usize,
    labels: Vec<f64>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: Vec<f64>, dim: usize, labels: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Data("data set needs at least one feature column".into()));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::Data(format!(
                "{} feature values do not form {} rows of width {dim}",
                features.len(),
                labels.len()
            )));
        }
        if labels.len() < 2 {
            return Err(Error::Data(format!("data set needs at least 2 samples, got {}", labels.len())));
        }
        if features.iter().chain(&labels).any(|v| !v.is_finite()) {
            return Err(Error::Data("data set contains non-finite values".into()));
        }
        Ok(Self {
            name: name.into(),
            features,
            dim,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of samples `M`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    /// Writes the data set as CSV with header `x1,..,xd,label`.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |e: std::io::Error| Error::Io {
            path: path.to_path_buf(),
            source: e,
        };
        let mut out = String::new();
        let header: Vec<String> = (1..=self.dim).map(|j| format!("x{j}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",label\n");
        for (row, y) in self.rows().zip(&self.labels) {
            for v in row {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{y}\n"));
        }
        fs::write(path, out).map_err(io)
    }
}

/// Which CSV column holds the label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl LabelColumn {
    /// Integers select by 0-based position, anything else by header name.
    pub fn parse(s: &str) -> Self {
        s.parse().map(LabelColumn::Index).unwrap_or_else(|_| LabelColumn::Name(s.to_string()))
    }
}

impl Default for LabelColumn {
    fn default() -> Self {
        LabelColumn::Name("label".into())
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub dataset: Dataset,
    /// Rows skipped because a field was missing or not a finite number.
    pub dropped: usize,
    /// `(line, reason)` for each dropped row.
    pub diagnostics: Vec<(usize, String)>,
}

fn parse_field(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Loads a comma-separated file. A header row is detected when any field of
/// the first record is non-numeric. Rows with missing or unparseable values
/// are dropped and reported.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn) -> Result<LoadedCsv> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format {
            message: format!("malformed CSV: {e}"),
            rows: vec![(i + 1, e.to_string())],
        })?;
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        records.push((i + 1, rec));
    }
    let Some((_, first)) = records.first() else {
        return Err(Error::Format {
            message: format!("{} is empty", path.display()),
            rows: vec![],
        });
    };
    let has_header = first.iter().any(|f| parse_field(f).is_none());
    let width = first.len();
    let label_idx = match label {
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => {
            return Err(Error::Format {
                message: format!("label column {i} out of range for {width} columns"),
                rows: vec![],
            })
        }
        LabelColumn::Name(name) => {
            if !has_header {
                return Err(Error::Format {
                    message: format!("label column `{name}` requested but the file has no header"),
                    rows: vec![],
                });
            }
            first.iter().position(|h| h.trim() == name).ok_or_else(|| Error::Format {
                message: format!("no column named `{name}`"),
                rows: vec![],
            })?
        }
    };
    if width < 2 {
        return Err(Error::Format {
            message: "need at least one feature column besides the label".into(),
            rows: vec![],
        });
    }

    let body = if has_header { &records[1..] } else { &records[..] };
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut diagnostics = Vec::new();
    'rows: for (line, rec) in body {
        if rec.len() != width {
            diagnostics.push((*line, format!("expected {width} fields, found {}", rec.len())));
            continue;
        }
        let mut row = Vec::with_capacity(width - 1);
        let mut y = 0.0;
        for (j, field) in rec.iter().enumerate() {
            let Some(v) = parse_field(field) else {
                let what = if j == label_idx { "label" } else { "feature" };
                diagnostics.push((*line, format!("non-numeric {what} `{field}` in column {j}")));
                continue 'rows;
            };
            if j == label_idx {
                y = v;
            } else {
                row.push(v);
            }
        }
        features.extend(row);
        labels.push(y);
    }
    if labels.len() < 2 {
        return Err(Error::Format {
            message: format!(
                "{} has {} usable rows ({} dropped); at least 2 are required",
                path.display(),
                labels.len(),
                diagnostics.len()
            ),
            rows: diagnostics,
        });
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(LoadedCsv {
        dataset: Dataset::new(name, features, width - 1, labels)?,
        dropped: diagnostics.len(),
        diagnostics,
    })
}

/// Feature z-scoring and label min-max scaling applied by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub feature_means: Vec<f64>,
    /// Population standard deviations; 0 for constant columns.
    pub feature_sds: Vec<f64>,
    pub label_min: f64,
    pub label_max: f64,
}

impl Standardization {
    pub fn apply_features(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.feature_means.iter().zip(&self.feature_sds))
            .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }

    pub fn apply_label(&self, y: f64) -> f64 {
        let span = self.label_max - self.label_min;
        if span > 0.0 {
            (y - self.label_min) / span
        } else {
            0.0
        }
    }

    /// Maps a prediction on the scaled label range back to original units.
    pub fn invert_label(&self, y: f64) -> f64 {
        self.label_min + y * (self.label_max - self.label_min)
    }
}

/// Z-scores every feature column (constant columns become 0) and scales
/// labels to `[0, 1]`.
pub fn standardize(ds: &Dataset) -> (Dataset, Standardization) {
    let m = ds.len() as f64;
    let d = ds.dim();
    let mut means = vec![0.0; d];
    for row in ds.rows() {
        for (acc, v) in means.iter_mut().zip(row) {
            *acc += v;
        }
    }
    means.iter_mut().for_each(|v| *v /= m);
    let mut sds = vec![0.0; d];
    for row in ds.rows() {
        for ((acc, v), mu) in sds.iter_mut().zip(row).zip(&means) {
            *acc += (v - mu) * (v - mu);
        }
    }
    for (s, mu) in sds.iter_mut().zip(&means) {
        *s = (*s / m).sqrt();
        // Rounding in the mean can leave a tiny spread on constant columns.
        if *s <= 1e-14 * mu.abs().max(1.0) {
            *s = 0.0;
        }
    }
    let (label_min, label_max) = ds
        .labels()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    let record = Standardization {
        feature_means: means,
        feature_sds: sds,
        label_min,
        label_max,
    };
    let features = ds.rows().flat_map(|r| record.apply_features(r)).collect();
    let labels = ds.labels().iter().map(|&y| record.apply_label(y)).collect();
    let out = Dataset {
        name: ds.name.clone(),
        features,
        dim: d,
        labels,
    };
    (out, record)
}

/// Keeps `m` rows chosen uniformly without replacement, in original order.
pub fn subsample(ds: &Dataset, m: usize, seed: u64) -> Result<Dataset> {
    if m < 2 || m > ds.len() {
        return Err(Error::Parameter(format!(
            "subsample size {m} must lie in [2, {}]",
            ds.len()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut picked = index::sample(&mut rng, ds.len(), m).into_vec();
    picked.sort_unstable();
    let features = picked.iter().flat_map(|&i| ds.row(i).iter().copied()).collect();
    let labels = picked.iter().map(|&i| ds.label(i)).collect();
    Dataset::new(format!("{}[{m}]", ds.name), features, ds.dim, labels)
}

/// Ground truths for synthetic regression problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SyntheticKind {
    /// A planted linear model on one map of a feature dictionary, i.e. the
    /// dictionary `build_dictionary(num_kernels, d, rf_dim, feature_seed)`.
    /// Its parameters are standard normal.
    SingleKernel {
        num_kernels: usize,
        /// 0-based index of the generating kernel.
        kernel_index: usize,
        rf_dim: usize,
        feature_seed: u64,
    },
    /// `sin(pi r) / (pi r)` with `r = |x|`.
    Sinc,
    /// 1 where the first coordinate is nonnegative, else 0.
    Step,
}

impl SyntheticKind {
    /// Parses `single-kernel`, `sinc`, or `step`. A single-kernel problem is
    /// planted on the third kernel (or the last, for smaller dictionaries) of
    /// `build_dictionary(num_kernels, d, rf_dim, feature_seed)`.
    pub fn parse(s: &str, num_kernels: usize, rf_dim: usize, feature_seed: u64) -> Result<Self> {
        match s {
            "sinc" => Ok(SyntheticKind::Sinc),
            "step" => Ok(SyntheticKind::Step),
            "single-kernel" => Ok(SyntheticKind::SingleKernel {
                num_kernels,
                kernel_index: 2.min(num_kernels.saturating_sub(1)),
                rf_dim,
                feature_seed,
            }),
            other => Err(Error::Parameter(format!("unknown synthetic problem `{other}`"))),
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            SyntheticKind::SingleKernel { .. } => "single-kernel",
            SyntheticKind::Sinc => "sinc",
            SyntheticKind::Step => "step",
        }
    }
}

pub fn sinc(r: f64) -> f64 {
    if r == 0.0 {
        1.0
    } else {
        let a = std::f64::consts::PI * r;
        a.sin() / a
    }
}

/// Random streams used by [`synthetic`], exposed so tests can regenerate
/// each ingredient independently.
pub mod streams {
    use super::derive_seed;

    /// Inputs: `M * d` uniform draws on `[-1, 1]`, row-major.
    pub fn inputs(seed: u64) -> u64 {
        derive_seed(seed, &[0])
    }

    /// Noise: one `N(0, noise_sd)` draw per sample, in sample order.
    pub fn noise(seed: u64) -> u64 {
        derive_seed(seed, &[1])
    }

    /// Planted parameters: `2 * rf_dim` standard normal draws.
    pub fn planted(seed: u64) -> u64 {
        derive_seed(seed, &[2])
    }
}

/// Planted model of a single-kernel problem.
pub fn planted_model(kind: &SyntheticKind, dim: usize, seed: u64) -> Result<Option<KernelModel>> {
    let SyntheticKind::SingleKernel {
        num_kernels,
        kernel_index,
        rf_dim,
        feature_seed,
    } = *kind
    else {
        return Ok(None);
    };
    if kernel_index >= num_kernels {
        return Err(Error::Parameter(format!(
            "planted kernel {kernel_index} outside a dictionary of {num_kernels}"
        )));
    }
    let map = build_dictionary(num_kernels, dim, rf_dim, feature_seed)?.swap_remove(kernel_index);
    let mut rng = rng_from_seed(streams::planted(seed));
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let theta = (0..map.output_dim()).map(|_| std_normal.sample(&mut rng)).collect();
    KernelModel::with_theta(Arc::new(map), theta).map(Some)
}

/// Draws `m` inputs uniformly from `[-1, 1]^d` and labels them with the
/// chosen ground truth plus `N(0, noise_sd)` noise.
pub fn synthetic(kind: &SyntheticKind, m: usize, d: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    if m == 0 || d == 0 {
        return Err(Error::Parameter("synthetic data needs positive M and d".into()));
    }
    if !(noise_sd.is_finite() && noise_sd >= 0.0) {
        return Err(Error::Parameter(format!("noise_sd must be nonnegative, got {noise_sd}")));
    }
    let mut rng = rng_from_seed(streams::inputs(seed));
    let features: Vec<f64> = (0..m * d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let planted = planted_model(kind, d, seed)?;
    let mut labels = Vec::with_capacity(m);
    for row in features.chunks_exact(d) {
        let y = match kind {
            SyntheticKind::SingleKernel { .. } => planted.as_ref().expect("planted model").predict(row)?,
            SyntheticKind::Sinc => sinc(row.iter().map(|v| v * v).sum::<f64>().sqrt()),
            SyntheticKind::Step => {
                if row[0] >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        };
        labels.push(y);
    }
    if noise_sd > 0.0 {
        let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::Parameter(e.to_string()))?;
        let mut rng = rng_from_seed(streams::noise(seed));
        for y in &mut labels {
            *y += noise.sample(&mut rng);
        }
    }
    Dataset::new(format!("synthetic-{}", kind.tag()), features, d, labels)
}

/// Budget bookkeeping: the whole data set is the initial pool and the test
/// error is measured on the samples that were never labeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Holdout {
    pub num_samples: usize,
    pub budget: usize,
}

impl Holdout {
    pub fn new(num_samples: usize, budget: usize) -> Result<Self> {
        if budget >= num_samples {
            return Err(Error::Config(format!(
                "label budget {budget} must be smaller than the pool size {num_samples}"
            )));
        }
        Ok(Self { num_samples, budget })
    }

    pub fn initial_pool(&self) -> PoolState {
        PoolState::new(self.num_samples)
    }

    /// The never-labeled indices after a completed run.
    pub fn evaluation_indices(&self, pool: &PoolState) -> Result<Vec<usize>> {
        if pool.labeled().len() != self.budget || pool.num_samples() != self.num_samples {
            return Err(Error::State(format!(
                "run labeled {} of {} samples, expected {} of {}",
                pool.labeled().len(),
                pool.num_samples(),
                self.budget,
                self.num_samples
            )));
        }
        Ok(pool.unlabeled().to_vec())
    }
}

fn default_budgets() -> Vec<f64> {
    vec![0.2, 0.25]
}
fn default_criteria() -> Vec<CriterionKind> {
    CriterionKind::ALL.to_vec()
}
fn default_num_kernels() -> usize {
    10
}
fn default_rf_dim() -> usize {
    50
}
fn default_eta_l() -> f64 {
    0.05
}
fn default_eta_g() -> f64 {
    1.0
}
fn default_ridge() -> f64 {
    1e-8
}
fn default_trials() -> usize {
    10
}
fn default_true() -> bool {
    true
}

/// Inputs of a benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Label budgets as fractions `T / M`.
    #[serde(default = "default_budgets")]
    pub budget_fractions: Vec<f64>,
    #[serde(default = "default_criteria")]
    pub criteria: Vec<CriterionKind>,
    #[serde(default = "default_num_kernels")]
    pub num_kernels: usize,
    /// Random features per kernel, `D`.
    #[serde(default = "default_rf_dim")]
    pub rf_dim: usize,
    #[serde(default = "default_eta_l")]
    pub eta_l: f64,
    #[serde(default = "default_eta_g")]
    pub eta_g: f64,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub inference: InferenceMode,
    #[serde(default = "default_true")]
    pub standardize: bool,
    /// Precompute pool features once per trial instead of per scan.
    #[serde(default = "default_true")]
    pub cache_features: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            budget_fractions: default_budgets(),
            criteria: default_criteria(),
            num_kernels: default_num_kernels(),
            rf_dim: default_rf_dim(),
            eta_l: default_eta_l(),
            eta_g: default_eta_g(),
            ridge: default_ridge(),
            trials: default_trials(),
            seed: 0,
            inference: InferenceMode::default(),
            standardize: true,
            cache_features: true,
        }
    }
}

impl ExperimentConfig {
    /// `T = round(fraction * M)`.
    pub fn budget(fraction: f64, num_samples: usize) -> usize {
        (fraction * num_samples as f64).round() as usize
    }

    pub fn validate(&self, num_samples: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.budget_fractions.is_empty() {
            return bad("at least one budget fraction is required".into());
        }
        if self.criteria.is_empty() {
            return bad("at least one criterion is required".into());
        }
        for &f in &self.budget_fractions {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!("budget fraction {f} must lie in (0, 1)"));
            }
            let t = Self::budget(f, num_samples);
            if t < 1 || t >= num_samples {
                return bad(format!("budget fraction {f} gives T = {t} for M = {num_samples}"));
            }
        }
        if self.num_kernels == 0 || self.rf_dim == 0 {
            return bad("num_kernels and rf_dim must be positive".into());
        }
        for (name, v) in [("eta_l", self.eta_l), ("eta_g", self.eta_g)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return bad(format!("ridge must be nonnegative, got {}", self.ridge));
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        Ok(())
    }
}
