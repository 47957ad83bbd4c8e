//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::HashSet;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use mkl_active::active_loop::TraceEntry;
use mkl_active::batch_solver::InferenceMode;
use mkl_active::bench::{run_trial, trial_feature_seed, TrialOutcome};
use mkl_active::criteria::{score_ekd, score_ekl, score_emc, score_qbc, CriterionKind};
use mkl_active::data::{standardize, synthetic, ExperimentConfig, SyntheticKind};
use mkl_active::ensemble::{exp_weights, Ensemble};
use mkl_active::kernel_model::{loss, KernelModel};
use mkl_active::rff::{build_dictionary, exact_kernel, FeatureMap, KernelSpec};
use mkl_active::seeding::rng_from_seed;
use rand::Rng;

type Outcome = std::result::Result<String, String>;

fn check(cond: bool, ok: String, fail: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn random_pmf<R: Rng>(rng: &mut R, p: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..p).map(|_| rng.gen_range(0.0..1.0) + 1e-9).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// 1. Uniform-weight identities EKD = 2 QBC and EKL = EMC(mean).
fn criterion_identities() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(1);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let p = rng.gen_range(2..=6);
        let f: Vec<f64> = (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let uniform = vec![1.0 / p as f64; p];
        let mean = f.iter().sum::<f64>() / p as f64;
        let a = (score_ekd(&f, &uniform).unwrap() - 2.0 * score_qbc(&f).unwrap()).abs();
        let b = (score_ekl(&f, &uniform).unwrap() - score_emc(&f, mean).unwrap()).abs();
        worst = worst.max(a).max(b);
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-12 && within(elapsed, 5.0),
        format!("max deviation {worst:.2e} over 10000 instances in {elapsed:.2?}"),
        format!("max deviation {worst:.2e}, runtime {elapsed:.2?}"),
    )
}

/// 2. EKD/EKL against term-by-term evaluations of their defining expectations.
fn brute_force_oracle() -> Outcome {
    let mut rng = rng_from_seed(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = rng.gen_range(1..=4);
        let f: Vec<f64> = (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let w = random_pmf(&mut rng, p);
        // E_Y[sum_i p_i L(f_i, Y)] with Y = f_j w.p. p_j.
        let mut ekd = 0.0;
        for j in 0..p {
            for i in 0..p {
                ekd += w[j] * w[i] * (f[i] - f[j]) * (f[i] - f[j]);
            }
        }
        // E_F*[L(f_combined, F*)] with F* = f_i w.p. p_i.
        let combined: f64 = (0..p).map(|i| w[i] * f[i]).sum();
        let ekl: f64 = (0..p).map(|i| w[i] * (combined - f[i]) * (combined - f[i])).sum();
        worst = worst
            .max((score_ekd(&f, &w).unwrap() - ekd).abs())
            .max((score_ekl(&f, &w).unwrap() - ekl).abs());
    }
    check(
        worst <= 1e-12,
        format!("max deviation {worst:.2e} over 1000 instances"),
        format!("max deviation {worst:.2e}"),
    )
}

/// 3. Random-feature inner products approximate every dictionary kernel.
fn rf_approximation() -> Outcome {
    let start = Instant::now();
    let d = 4;
    let maps = build_dictionary(10, d, 2000, 3).unwrap();
    let mut rng = rng_from_seed(3);
    let mut counts = Vec::new();
    for map in &maps {
        let mut good = 0;
        for _ in 0..100 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let xp: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let z = map.feature_vector(&x).unwrap();
            let zp = map.feature_vector(&xp).unwrap();
            let approx: f64 = z.iter().zip(&zp).map(|(a, b)| a * b).sum();
            let exact = exact_kernel(&map.kernel(), &x, &xp).unwrap();
            if (approx - exact).abs() <= 0.05 {
                good += 1;
            }
        }
        counts.push(good);
    }
    let elapsed = start.elapsed();
    let min = *counts.iter().min().unwrap();
    check(
        min >= 95 && within(elapsed, 10.0),
        format!("pairs within 0.05 per kernel {counts:?} in {elapsed:.2?}"),
        format!("pairs within 0.05 per kernel {counts:?}, runtime {elapsed:.2?}"),
    )
}

/// 4. Analytic SGD gradient against central finite differences.
fn gradient_check() -> Outcome {
    let mut rng = rng_from_seed(4);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let d = rng.gen_range(1..=5);
        let features = rng.gen_range(1..=20);
        let spec = KernelSpec::new(10f64.powf(rng.gen_range(-1.0..1.0))).unwrap();
        let map = Arc::new(FeatureMap::sample(spec, d, features, k).unwrap());
        let theta: Vec<f64> = (0..2 * features).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = rng.gen_range(-2.0..2.0);
        let model = KernelModel::with_theta(map.clone(), theta.clone()).unwrap();
        let analytic = model.gradient(&x, y).unwrap();
        let h = 1e-6;
        let numeric: Vec<f64> = (0..theta.len())
            .map(|i| {
                let eval = |delta: f64| {
                    let mut t = theta.clone();
                    t[i] += delta;
                    loss(KernelModel::with_theta(map.clone(), t).unwrap().predict(&x).unwrap(), y)
                };
                (eval(h) - eval(-h)) / (2.0 * h)
            })
            .collect();
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = numeric.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        worst = worst.max(diff / norm);
    }
    check(
        worst <= 1e-5,
        format!("max relative error {worst:.2e} over 100 configurations"),
        format!("max relative error {worst:.2e}"),
    )
}

fn pmf_ok(w: &[f64]) -> bool {
    w.iter().all(|v| v.is_finite() && *v >= 0.0) && (w.iter().sum::<f64>() - 1.0).abs() <= 1e-12
}

/// 5. Exponential-weights contract.
fn exp_weights_contract(traces: &[Vec<TraceEntry>]) -> Outcome {
    let steps: usize = traces.iter().map(Vec::len).sum();
    let pmf_in_runs = traces.iter().flatten().all(|e| pmf_ok(&e.weights));

    let mut rng = rng_from_seed(5);
    let maps: Vec<_> = build_dictionary(6, 1, 2, 0).unwrap().into_iter().map(Arc::new).collect();
    let mut monotone = 0;
    let mut ens = Ensemble::new(&maps, 1.0).unwrap();
    for k in 0..1000 {
        if k % 50 == 0 {
            ens = Ensemble::new(&maps, rng.gen_range(0.01..5.0)).unwrap();
        }
        let losses: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..3.0)).collect();
        ens.update_weights(&losses).unwrap();
        let (c, w) = (ens.cum_losses(), ens.weights());
        let ordered = (0..6).all(|i| {
            (0..6).all(|j| !(c[i] < c[j]) || w[i] > w[j] || ens.eta_g() * (c[j] - c[i]) < 1e-9)
        });
        if ordered && pmf_ok(w) {
            monotone += 1;
        }
    }

    let mut robust = true;
    for scale in [1.0, 1e3, 1e6] {
        for eta in [0.1, 1.0, 10.0] {
            let cum: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..scale)).collect();
            robust &= pmf_ok(&exp_weights(&cum, eta));
        }
    }
    let mut big = Ensemble::new(&maps, 1.0).unwrap();
    big.update_weights(&[1e6, 0.0, 1e6, 5e5, 1e6, 1e6]).unwrap();
    robust &= pmf_ok(big.weights());

    check(
        pmf_in_runs && monotone == 1000 && robust && steps > 0,
        format!("PMF held over {steps} loop steps; monotone in {monotone}/1000 updates; finite up to 1e6"),
        format!("pmf_in_runs={pmf_in_runs}, monotone {monotone}/1000, robust={robust}"),
    )
}

fn bookkeeping_ok(outcome: &TrialOutcome, m: usize) -> bool {
    let mut seen = HashSet::new();
    let unique = outcome.trace.iter().all(|e| seen.insert(e.index));
    let times = outcome.trace.iter().enumerate().all(|(k, e)| e.time == k + 1);
    let disjoint = outcome.evaluation_indices.iter().all(|i| !seen.contains(i));
    unique && times && disjoint && seen.len() + outcome.evaluation_indices.len() == m
}

/// 6. Noiseless planted single-kernel problem, supervised refit.
fn planted_recovery() -> (Outcome, Vec<TrialOutcome>) {
    let start = Instant::now();
    let config = ExperimentConfig {
        criteria: vec![CriterionKind::Random],
        budget_fractions: vec![0.5],
        trials: 1,
        rf_dim: 25,
        inference: InferenceMode::Supervised,
        standardize: false,
        seed: 6,
        ..ExperimentConfig::default()
    };
    let planted_kernel = 2;
    let kind = SyntheticKind::SingleKernel {
        num_kernels: config.num_kernels,
        kernel_index: planted_kernel,
        rf_dim: config.rf_dim,
        feature_seed: trial_feature_seed(config.seed, 0),
    };
    let data = synthetic(&kind, 1000, 4, 0.0, 60).unwrap();
    let outcome = run_trial(&data, &config, CriterionKind::Random, 0.5, 0).unwrap();
    let elapsed = start.elapsed();
    let mse = outcome.record.test_mse;
    let weight = outcome.kernel_weights[planted_kernel];
    let result = check(
        outcome.record.budget >= 10 * 2 * config.rf_dim && mse <= 1e-6 && weight >= 0.9 && within(elapsed, 30.0),
        format!("test MSE {mse:.2e}, generating-kernel weight {weight:.6} in {elapsed:.2?}"),
        format!("test MSE {mse:.2e}, weight {weight:.6}, runtime {elapsed:.2?}"),
    );
    (result, vec![outcome])
}

/// 7. EKD and EKL beat random sampling on a noisy sinc problem.
fn directional_claim() -> (Outcome, Vec<TrialOutcome>) {
    let start = Instant::now();
    let config = ExperimentConfig {
        budget_fractions: vec![0.2],
        trials: 10,
        rf_dim: 50,
        ..ExperimentConfig::default()
    };
    // Same seeding as `mkl-al-bench --dataset synthetic:sinc`: data and trials share the master seed.
    let raw = synthetic(&SyntheticKind::Sinc, 500, 1, 0.05, config.seed).unwrap();
    let (data, _) = standardize(&raw);
    let run = |kind| -> Vec<TrialOutcome> {
        (0..config.trials)
            .map(|k| run_trial(&data, &config, kind, 0.2, k).unwrap())
            .collect()
    };
    let random = run(CriterionKind::Random);
    let ekd = run(CriterionKind::Ekd);
    let ekl = run(CriterionKind::Ekl);
    let elapsed = start.elapsed();
    let mean = |v: &[TrialOutcome]| v.iter().map(|o| o.record.test_mse).sum::<f64>() / v.len() as f64;
    let wins = |v: &[TrialOutcome]| {
        v.iter()
            .zip(&random)
            .filter(|(a, r)| a.record.test_mse < r.record.test_mse)
            .count()
    };
    let (m_r, m_d, m_l) = (mean(&random), mean(&ekd), mean(&ekl));
    let summary = format!(
        "mean MSE random {m_r:.3e}, EKD {m_d:.3e} (wins {}/10), EKL {m_l:.3e} (wins {}/10) in {elapsed:.2?}",
        wins(&ekd),
        wins(&ekl)
    );
    let result = check(m_d <= m_r && m_l <= m_r && within(elapsed, 120.0), summary.clone(), summary);
    let mut all = random;
    all.extend(ekd);
    all.extend(ekl);
    (result, all)
}

/// 9. Two identical CLI invocations write byte-identical CSV.
fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_mkl-al-bench");
    let mut outputs = Vec::new();
    for k in 0..2 {
        let path = dir.path().join(format!("run{k}.csv"));
        let status = Command::new(bin)
            .args(["--dataset", "synthetic:sinc,m=200", "--trials", "3", "--seed", "99", "--format", "csv"])
            .args(["--parallel", "4"])
            .arg("--out")
            .arg(&path)
            .status()
            .unwrap();
        if !status.success() {
            return Err(format!("CLI exited with {status}"));
        }
        outputs.push(std::fs::read(&path).unwrap());
    }
    check(
        outputs[0] == outputs[1] && !outputs[0].is_empty(),
        format!("two runs wrote identical {}-byte CSV reports", outputs[0].len()),
        "CSV reports differ".into(),
    )
}

fn report(results: &mut Vec<(usize, &'static str, Outcome)>, id: usize, name: &'static str, outcome: Outcome) {
    match &outcome {
        Ok(msg) => println!("[PASS] {id}. {name}: {msg}"),
        Err(msg) => println!("[FAIL] {id}. {name}: {msg}"),
    }
    results.push((id, name, outcome));
}

fn main() {
    let mut results = Vec::new();
    report(&mut results, 1, "criterion identities", criterion_identities());
    report(&mut results, 2, "brute-force oracle", brute_force_oracle());
    report(&mut results, 3, "random-feature approximation", rf_approximation());
    report(&mut results, 4, "gradient check", gradient_check());

    let (planted, planted_runs) = planted_recovery();
    let (directional, directional_runs) = directional_claim();
    let traces: Vec<Vec<TraceEntry>> = planted_runs
        .iter()
        .chain(&directional_runs)
        .map(|o| o.trace.clone())
        .collect();
    report(&mut results, 5, "exp-weights contract", exp_weights_contract(&traces));
    report(&mut results, 6, "planted-model recovery", planted);
    report(&mut results, 7, "EKD/EKL vs random", directional);

    // The loop also checks the partition after every step and would have
    // errored out above on any violation.
    let planted_m = 1000;
    let sinc_m = 500;
    let booked = planted_runs.iter().all(|o| bookkeeping_ok(o, planted_m))
        && directional_runs.iter().all(|o| bookkeeping_ok(o, sinc_m));
    let runs = planted_runs.len() + directional_runs.len();
    report(
        &mut results,
        8,
        "loop bookkeeping",
        check(
            booked,
            format!("partition and no-repeat invariants held in all {runs} runs"),
            "partition violated".into(),
        ),
    );
    report(&mut results, 9, "CLI determinism", cli_determinism());

    let failed = results.iter().filter(|(_, _, o)| o.is_err()).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

