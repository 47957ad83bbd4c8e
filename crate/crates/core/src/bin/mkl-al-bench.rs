//! Benchmark harness: runs every configured criterion for several label
//! budgets and trials, then prints a CSV, JSON, or markdown report.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mkl_active::batch_solver::InferenceMode;
use mkl_active::bench::{emit_report, run_experiment, trial_feature_seed, ReportFormat};
use mkl_active::criteria::CriterionKind;
use mkl_active::data::{load_csv, subsample, synthetic, Dataset, ExperimentConfig, LabelColumn, SyntheticKind};
use mkl_active::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "mkl-al-bench", version, about)]
struct Args {
    /// CSV path, or `synthetic:<sinc|step|single-kernel>[,m=500][,d=1][,noise=0.05]`.
    #[arg(long)]
    dataset: String,

    /// Label column of a CSV file, by header name or 0-based index.
    #[arg(long, default_value = "label")]
    label_column: String,

    /// Criteria to compare (repeatable); defaults to all five.
    #[arg(long, value_parser = parse_criterion)]
    criterion: Vec<CriterionKind>,

    /// Label budget as a fraction of the pool (repeatable).
    #[arg(long)]
    budget_fraction: Vec<f64>,

    #[arg(long)]
    trials: Option<usize>,

    #[arg(long)]
    num_kernels: Option<usize>,

    /// Random features per kernel.
    #[arg(long)]
    rf_dim: Option<usize>,

    /// SGD step size of the kernel models.
    #[arg(long)]
    eta_l: Option<f64>,

    /// Exponential-weights rate.
    #[arg(long)]
    eta_g: Option<f64>,

    #[arg(long)]
    ridge: Option<f64>,

    #[arg(long, value_parser = parse_inference)]
    inference: Option<InferenceMode>,

    #[arg(long)]
    seed: Option<u64>,

    #[arg(long, default_value = "markdown", value_parser = parse_format)]
    format: ReportFormat,

    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Keep a seeded uniform subsample of this many rows.
    #[arg(long)]
    subsample: Option<usize>,

    #[arg(long)]
    no_standardize: bool,

    /// Worker threads for independent trials.
    #[arg(long)]
    parallel: Option<usize>,

    /// JSON experiment config; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_criterion(s: &str) -> std::result::Result<CriterionKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_inference(s: &str) -> std::result::Result<InferenceMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> std::result::Result<ReportFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn build_config(args: &Args) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            serde_json::from_str(&text).map_err(|e| Error::Format {
                message: format!("{}: {e}", path.display()),
                rows: vec![],
            })?
        }
        None => ExperimentConfig::default(),
    };
    if !args.criterion.is_empty() {
        cfg.criteria = args.criterion.clone();
    }
    if !args.budget_fraction.is_empty() {
        cfg.budget_fractions = args.budget_fraction.clone();
    }
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = args.$field {
                cfg.$field = v;
            }
        )*};
    }
    set!(trials, num_kernels, rf_dim, eta_l, eta_g, ridge, inference, seed);
    if args.no_standardize {
        cfg.standardize = false;
    }
    Ok(cfg)
}

fn load_dataset(spec: &str, label: &str, config: &ExperimentConfig) -> Result<Dataset> {
    let seed = config.seed;
    let Some(rest) = spec.strip_prefix("synthetic:") else {
        let loaded = load_csv(spec, &LabelColumn::parse(label))?;
        if loaded.dropped > 0 {
            eprintln!("dropped {} malformed rows from {spec}", loaded.dropped);
        }
        return Ok(loaded.dataset);
    };
    let mut parts = rest.split(',');
    // Planted problems live on the first trial's dictionary.
    let kind = SyntheticKind::parse(
        parts.next().unwrap_or_default(),
        config.num_kernels,
        config.rf_dim,
        trial_feature_seed(seed, 0),
    )?;
    let (mut m, mut d, mut noise) = (500usize, 1usize, 0.05f64);
    for part in parts {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::Parameter(format!("expected key=value, got `{part}`")))?;
        let bad = |_| Error::Parameter(format!("invalid value for `{key}`: `{value}`"));
        match key {
            "m" => m = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "d" => d = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "noise" => noise = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
            _ => return Err(Error::Parameter(format!("unknown synthetic option `{key}`"))),
        }
    }
    synthetic(&kind, m, d, noise, seed)
}

fn run(args: &Args) -> Result<()> {
    let config = build_config(args)?;
    let mut dataset = load_dataset(&args.dataset, &args.label_column, &config)?;
    if let Some(m) = args.subsample {
        dataset = subsample(&dataset, m, config.seed)?;
    }
    let report = run_experiment(&config, &dataset, args.parallel)?;
    let rendered = emit_report(&report, args.format)?;
    match &args.out {
        Some(path) => std::fs::write(path, rendered).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        }),
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({
                "error": { "kind": e.kind(), "message": e.to_string() }
            });
            eprintln!("{body}");
            ExitCode::from(2)
        }
    }
}
