//! Multi-trial experiments comparing selection criteria, and report rendering.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::active_loop::{self, LoopSettings, TraceEntry};
use crate::batch_solver::{BatchFit, InferenceMode};
use crate::criteria::CriterionKind;
use crate::data::{standardize, Dataset, ExperimentConfig, Holdout, Standardization};
use crate::error::{Error, Result};
use crate::rff::{build_dictionary, FeatureMap};
use crate::seeding::{derive_seed, rng_from_seed, str_hash};

const FEATURE_STREAM: u64 = 0x6665_6174;
const SELECTION_STREAM: u64 = 0x7365_6c65;

/// Seeds of one trial. Feature maps depend only on the trial, so every
/// criterion in a trial sees the same dictionary draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub features: u64,
    pub selection: u64,
}

impl TrialSeeds {
    pub fn derive(master: u64, trial: usize, criterion: CriterionKind) -> Self {
        Self {
            features: derive_seed(master, &[FEATURE_STREAM, trial as u64]),
            selection: derive_seed(
                master,
                &[SELECTION_STREAM, trial as u64, str_hash(criterion.as_str())],
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub criterion: CriterionKind,
    pub budget_fraction: f64,
    /// `T`, the number of labels acquired.
    pub budget: usize,
    pub trial: usize,
    /// Mean squared error over the never-labeled samples.
    pub test_mse: f64,
    pub wall_time_ms: f64,
    /// FNV-1a digest of the query sequence, as hex.
    pub selection_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub criterion: CriterionKind,
    pub budget_fraction: f64,
    pub trials: usize,
    pub mean_mse: f64,
    /// Sample standard deviation over trials; 0 for a single trial.
    pub sd_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub num_samples: usize,
    pub config: ExperimentConfig,
    /// Preprocessing applied before the runs, if any.
    pub transform: Option<Standardization>,
    pub trials: Vec<TrialRecord>,
    pub cells: Vec<CellSummary>,
}

/// Everything one trial produced, including the evaluation predictions.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub evaluation_indices: Vec<usize>,
    pub predictions: Vec<f64>,
    pub targets: Vec<f64>,
    /// Kernel weights of the predictor that was evaluated.
    pub kernel_weights: Vec<f64>,
    pub trace: Vec<TraceEntry>,
}

pub fn mean_squared_error(predictions: &[f64], targets: &[f64]) -> f64 {
    let n = predictions.len() as f64;
    predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| (p - y) * (p - y))
        .sum::<f64>()
        / n
}

fn selection_digest(trace: &[TraceEntry]) -> String {
    let mut bytes = String::new();
    for entry in trace {
        let _ = write!(bytes, "{},", entry.index);
    }
    format!("{:016x}", str_hash(&bytes))
}

/// Seed of the feature dictionary of trial `trial`.
pub fn trial_feature_seed(master: u64, trial: usize) -> u64 {
    TrialSeeds::derive(master, trial, CriterionKind::Random).features
}

/// Dictionary of trial `trial`.
pub fn trial_dictionary(config: &ExperimentConfig, dim: usize, trial: usize) -> Result<Vec<Arc<FeatureMap>>> {
    let seed = trial_feature_seed(config.seed, trial);
    Ok(build_dictionary(config.num_kernels, dim, config.rf_dim, seed)?
        .into_iter()
        .map(Arc::new)
        .collect())
}

/// One active-learning run followed by evaluation on the unlabeled remainder.
/// `dataset` is used as given; preprocessing is the caller's job.
pub fn run_trial(
    dataset: &Dataset,
    config: &ExperimentConfig,
    criterion: CriterionKind,
    budget_fraction: f64,
    trial: usize,
) -> Result<TrialOutcome> {
    let start = Instant::now();
    let budget = ExperimentConfig::budget(budget_fraction, dataset.len());
    let holdout = Holdout::new(dataset.len(), budget)?;
    let maps = trial_dictionary(config, dataset.dim(), trial)?;
    let seeds = TrialSeeds::derive(config.seed, trial, criterion);
    let mut rng = rng_from_seed(seeds.selection);
    let settings = LoopSettings {
        criterion,
        budget,
        eta_l: config.eta_l,
        eta_g: config.eta_g,
        cache_features: config.cache_features,
    };
    let outcome = active_loop::run(dataset, &maps, &settings, &mut rng)?;
    let evaluation_indices = holdout.evaluation_indices(&outcome.pool)?;

    let (predictions, kernel_weights) = match config.inference {
        InferenceMode::Online => (
            evaluation_indices
                .iter()
                .map(|&i| outcome.ensemble.combined_predict(dataset.row(i)))
                .collect::<Result<Vec<_>>>()?,
            outcome.ensemble.weights().to_vec(),
        ),
        InferenceMode::Supervised => {
            let labeled: Vec<usize> = outcome.pool.labeled().iter().map(|s| s.index).collect();
            let xs: Vec<&[f64]> = labeled.iter().map(|&i| dataset.row(i)).collect();
            let ys: Vec<f64> = labeled.iter().map(|&i| dataset.label(i)).collect();
            let fit = BatchFit::fit(&maps, &xs, &ys, config.ridge, config.eta_g)?;
            (
                evaluation_indices
                    .iter()
                    .map(|&i| fit.predict(dataset.row(i)))
                    .collect::<Result<Vec<_>>>()?,
                fit.weights().to_vec(),
            )
        }
    };
    let targets: Vec<f64> = evaluation_indices.iter().map(|&i| dataset.label(i)).collect();
    let test_mse = mean_squared_error(&predictions, &targets);
    let record = TrialRecord {
        criterion,
        budget_fraction,
        budget,
        trial,
        test_mse,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        selection_digest: selection_digest(&outcome.trace),
    };
    Ok(TrialOutcome {
        record,
        evaluation_indices,
        predictions,
        targets,
        kernel_weights,
        trace: outcome.trace,
    })
}

fn summarize(config: &ExperimentConfig, trials: &[TrialRecord]) -> Vec<CellSummary> {
    let mut cells = Vec::new();
    for &criterion in &config.criteria {
        for &fraction in &config.budget_fractions {
            let values: Vec<f64> = trials
                .iter()
                .filter(|r| r.criterion == criterion && r.budget_fraction == fraction)
                .map(|r| r.test_mse)
                .collect();
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            cells.push(CellSummary {
                criterion,
                budget_fraction: fraction,
                trials: n,
                mean_mse: mean,
                sd_mse: sd,
            });
        }
    }
    cells
}

/// Runs every (criterion, budget, trial) cell of `config` on `dataset`,
/// standardizing first when the config asks for it. `threads` caps the
/// worker pool; `None` uses rayon's default.
pub fn run_experiment(config: &ExperimentConfig, dataset: &Dataset, threads: Option<usize>) -> Result<RunReport> {
    config.validate(dataset.len())?;
    let (data, transform) = if config.standardize {
        let (d, t) = standardize(dataset);
        (d, Some(t))
    } else {
        (dataset.clone(), None)
    };
    let jobs: Vec<(CriterionKind, f64, usize)> = config
        .criteria
        .iter()
        .flat_map(|&c| {
            config
                .budget_fractions
                .iter()
                .flat_map(move |&f| (0..config.trials).map(move |k| (c, f, k)))
        })
        .collect();
    let run_all = || {
        jobs.par_iter()
            .map(|&(criterion, fraction, trial)| {
                run_trial(&data, config, criterion, fraction, trial)
                    .map(|o| o.record)
                    .map_err(|e| Error::Trial {
                        criterion: criterion.as_str().into(),
                        trial,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<Vec<_>>>()
    };
    let trials = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run_all)?,
        None => run_all()?,
    };
    let cells = summarize(config, &trials);
    Ok(RunReport {
        dataset: dataset.name().to_string(),
        num_samples: dataset.len(),
        config: config.clone(),
        transform,
        trials,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::Parameter(format!("unknown report format `{other}`"))),
        }
    }
}

/// Renders a report. CSV holds one line per trial and omits wall time so
/// that equal seeds give byte-identical files.
pub fn emit_report(report: &RunReport, format: ReportFormat) -> Result<String> {
    if report.trials.is_empty() {
        return Err(Error::State("report has no trials".into()));
    }
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| Error::Format {
                message: e.to_string(),
                rows: vec![],
            }),
        ReportFormat::Csv => {
            let mut out = String::from("criterion,budget_fraction,budget,trial,test_mse,selection_digest\n");
            for r in &report.trials {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.criterion.as_str(),
                    r.budget_fraction,
                    r.budget,
                    r.trial,
                    r.test_mse,
                    r.selection_digest
                );
            }
            Ok(out)
        }
        ReportFormat::Markdown => Ok(render_markdown(report)),
    }
}

fn render_markdown(report: &RunReport) -> String {
    let fractions = &report.config.budget_fractions;
    let mut out = format!(
        "Test MSE on {} (M = {}), mean ± sd over {} trials\n\n| Criterion |",
        report.dataset, report.num_samples, report.config.trials
    );
    for f in fractions {
        let _ = write!(out, " {}% |", f * 100.0);
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(fractions.len()));
    out.push('\n');
    for kind in CriterionKind::ALL {
        if !report.config.criteria.contains(&kind) {
            continue;
        }
        let _ = write!(out, "| {} |", kind.label());
        for &f in fractions {
            match report
                .cells
                .iter()
                .find(|c| c.criterion == kind && c.budget_fraction == f)
            {
                Some(c) => {
                    let _ = write!(out, " {:.4e} ± {:.1e} |", c.mean_mse, c.sd_mse);
                }
                None => out.push_str(" - |"),
            }
        }
        out.push('\n');
    }
    out
}

/// Parses a JSON report written by [`emit_report`].
pub fn parse_json_report(text: &str) -> Result<RunReport> {
    serde_json::from_str(text).map_err(|e| Error::Format {
        message: format!("invalid report: {e}"),
        rows: vec![],
    })
}
