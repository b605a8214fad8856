//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs without the test harness: `cargo test --test acceptance` runs all
//! criteria, `cargo test --test acceptance -- 3 6` a subset. A failing
//! criterion is reported, not turned into a process failure.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use recov::control::RunControl;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use recov::dataset::{
    load_dataset, one_hot, save_dataset, Dataset, EncodeOptions, Labels, MaskSource, NoiseMask, RawTable, Schema, Task,
};
use recov::fastrecov::{fastrecov_loop, FastRecovConfig};
use recov::learners::LearnerSpec;
use recov::noise::{flip_events, inject_noise, NoiseModel};
use recov::recov::{clean_retrain, heldout_metric, recov_run_loop, separate, RecovConfig};
use recov::synth::{gaussian_blobs, linear_hazard_survival, mushroom_like};
use recov::theory::{
    build_occurrence_model, default_bin_width, plan_runs, simulate_occurrences, total_variation, OccurrenceHistograms,
    OverlapTarget,
};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

const MUSHROOM_DEFAULT: &str = "/root/data/agaricus-lepiota.data";
const PLAN_TRIALS: usize = 100_000;

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [Criterion; 8] = [
        (1, "Mushroom end-to-end", c1_mushroom),
        (2, "ReCoV counts match Monte Carlo", c2_monte_carlo),
        (3, "overlap calibration", c3_overlap),
        (4, "fastReCoV synthetic detection", c4_fast_blobs),
        (5, "survival pipeline", c5_survival),
        (6, "metric oracles", c6_oracles),
        (7, "determinism and parallel equivalence", c7_determinism),
        (8, "external feature CSV", c8_external),
    ];
    for (id, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let (verdict, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("criterion {id} [{name}]: {verdict}: {detail} ({:.0} s)", start.elapsed().as_secs_f64());
    }
}

fn verdict(pass: bool, detail: String) -> Outcome {
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e(err: impl std::fmt::Display) -> String {
    err.to_string()
}

fn detected_mask(data: &Dataset<f64>, detected: &[usize]) -> NoiseMask {
    let mut flags = vec![false; data.len()];
    detected.iter().for_each(|&i| flags[i] = true);
    NoiseMask::new(data.ids().to_vec(), flags, MaskSource::Detected).unwrap()
}

/// Copy of `data` restricted to `rows`, ids prefixed with `prefix`.
fn subset(data: &Dataset<f64>, rows: &[usize], prefix: &str) -> Dataset<f64> {
    let features = rows.iter().flat_map(|&r| data.row(r).to_vec()).collect();
    let labels = match data.labels() {
        Labels::Classification { values, classes } => Labels::Classification {
            values: rows.iter().map(|&r| values[r]).collect(),
            classes: classes.clone(),
        },
        Labels::Survival { times, events } => Labels::Survival {
            times: rows.iter().map(|&r| times[r]).collect(),
            events: rows.iter().map(|&r| events[r]).collect(),
        },
        Labels::Ordinal { grades, range } => Labels::Ordinal {
            grades: rows.iter().map(|&r| grades[r]).collect(),
            range: *range,
        },
    };
    let ids = rows.iter().map(|&r| format!("{prefix}{}", data.ids()[r])).collect();
    Dataset::new("subset", ids, data.feature_names().to_vec(), features, labels).unwrap()
}

fn relabel(data: &Dataset<f64>, prefix: &str) -> Dataset<f64> {
    let rows: Vec<usize> = (0..data.len()).collect();
    subset(data, &rows, prefix)
}

// 1. The UCI file (`agaricus-lepiota.data`: no header, class first) is read
// from RECOV_MUSHROOM_PATH or a default location. Each trial holds out a
// seeded 20% for retraining and runs ReCoV on the rest at the 3σ plan.
fn c1_mushroom() -> Outcome {
    let path = std::env::var_os("RECOV_MUSHROOM_PATH")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(MUSHROOM_DEFAULT));
    if !path.exists() {
        return Err(format!(
            "dataset not available at {} (set RECOV_MUSHROOM_PATH); not run",
            path.display()
        ));
    }
    let mut table = RawTable::read(&path, false).map_err(e)?;
    table.headers.insert(0, "id".into());
    for (i, r) in table.rows.iter_mut().enumerate() {
        r.insert(0, i.to_string());
    }
    let (encoded, _) = one_hot(
        &table,
        &EncodeOptions {
            passthrough: vec!["id".into(), "c0".into()],
        },
    )
    .map_err(e)?;
    let dir = tempfile::tempdir().map_err(e)?;
    let enc_path = dir.path().join("mushroom.csv");
    encoded.write(&enc_path).map_err(e)?;
    let full: Dataset<f64> = load_dataset(&enc_path, &Schema::classification("c0").with_id("id")).map_err(e)?;

    let mut lines = Vec::new();
    let mut pass = true;
    for eps in [0.1, 0.2] {
        let (mut mask_acc, mut held_acc) = (Vec::new(), Vec::new());
        for trial in 0..3u64 {
            let seed = 1000 * (eps * 10.0) as u64 + trial;
            let mut order: Vec<usize> = (0..full.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let cut = full.len() * 4 / 5;
            let train = subset(&full, &order[..cut], "");
            let heldout = subset(&full, &order[cut..], "h");
            let (noisy, truth) = inject_noise(&train, &NoiseModel::Uniform { eps }, true, seed).map_err(e)?;
            let model = build_occurrence_model(noisy.len(), eps, 5, PLAN_TRIALS, seed).map_err(e)?;
            let plan = plan_runs(&model, OverlapTarget::THREE_SIGMA).map_err(e)?;
            let config = RecovConfig {
                k: 5,
                n_runs: plan.n_runs,
                seed,
                learner: LearnerSpec::default_for(Task::Classification),
            };
            let out = recov_run_loop(&noisy, &config, &RunControl::default()).map_err(e)?;
            let mask = separate(&out.pool, noisy.ids(), plan.threshold).map_err(e)?;
            mask_acc.push(mask.scores(&truth).map_err(e)?.accuracy());
            let learner = config.learner.build::<f64>().map_err(e)?;
            held_acc.push(clean_retrain(&noisy, &mask, learner.as_ref(), &heldout, seed).map_err(e)?);
        }
        let min_mask = mask_acc.iter().cloned().fold(1.0, f64::min);
        let min_held = held_acc.iter().cloned().fold(1.0, f64::min);
        pass &= min_mask >= 0.995 && min_held >= 0.995;
        lines.push(format!("eps {eps}: mask accuracy min {min_mask:.4}, held-out accuracy min {min_held:.4}"));
    }
    verdict(pass, lines.join("; "))
}

// 2. Surrogate Mushroom data (same size and attribute structure, linearly
// separable) with exact 10% flips, 2σ plan.
fn c2_monte_carlo() -> Outcome {
    let (n, eps, k) = (8124, 0.1, 5);
    let data = mushroom_like::<f64>(n, 1).map_err(e)?;
    let (noisy, truth) = inject_noise(&data, &NoiseModel::Uniform { eps }, true, 2).map_err(e)?;
    let model = build_occurrence_model(n, eps, k, PLAN_TRIALS, 0).map_err(e)?;
    let plan = plan_runs(&model, OverlapTarget::TWO_SIGMA).map_err(e)?;
    let config = RecovConfig {
        k,
        n_runs: plan.n_runs,
        seed: 3,
        learner: LearnerSpec::default_for(Task::Classification),
    };
    let out = recov_run_loop(&noisy, &config, &RunControl::default()).map_err(e)?;
    let sim = simulate_occurrences(n, eps, k, plan.n_runs, 4).map_err(e)?;
    let width = default_bin_width(plan.n_runs, plan.q_clean);
    let max = *out.pool.counts.iter().chain(&sim.counts).max().unwrap();
    let real = OccurrenceHistograms::new(&out.pool.counts, &truth.flags, width, max).map_err(e)?;
    let simulated = OccurrenceHistograms::new(&sim.counts, &sim.noisy, width, max).map_err(e)?;
    let tv_clean = total_variation(&real.clean, &simulated.clean);
    let tv_noisy = total_variation(&real.noisy, &simulated.noisy);
    verdict(
        tv_clean <= 0.10 && tv_noisy <= 0.10,
        format!(
            "{} runs, bin width {width}: TV clean {tv_clean:.4}, TV noisy {tv_noisy:.4} (bar 0.10)",
            plan.n_runs
        ),
    )
}

// 3. Mushroom scale, single simulation per target.
fn c3_overlap() -> Outcome {
    let (n, eps, k) = (8124, 0.1, 5);
    let model = build_occurrence_model(n, eps, k, PLAN_TRIALS, 0).map_err(e)?;
    let overlap = |target, seed| -> Result<(usize, f64), String> {
        let plan = plan_runs(&model, target).map_err(e)?;
        let sim = simulate_occurrences(n, eps, k, plan.n_runs, seed).map_err(e)?;
        let h = OccurrenceHistograms::new(&sim.counts, &sim.noisy, default_bin_width(plan.n_runs, plan.q_clean), 0)
            .map_err(e)?;
        Ok((plan.n_runs, h.overlap()))
    };
    let (r2, o2) = overlap(OverlapTarget::TWO_SIGMA, 5)?;
    let (r3, o3) = overlap(OverlapTarget::THREE_SIGMA, 6)?;
    verdict(
        (o2 - 0.045).abs() <= 0.02 && o3 <= 0.01,
        format!(
            "2σ ({r2} runs) {:.2}% (bar 4.5 ± 2), 3σ ({r3} runs) {:.2}% (bar ≤ 1)",
            100.0 * o2,
            100.0 * o3
        ),
    )
}

fn blobs_pair(seed: u64) -> Result<(Dataset<f64>, Dataset<f64>), String> {
    let train = gaussian_blobs::<f64>(2000, 10, 1.0, seed).map_err(e)?;
    let heldout = relabel(&gaussian_blobs::<f64>(2000, 10, 1.0, seed + 10_000).map_err(e)?, "h");
    Ok((train, heldout))
}

// 4. Classification defaults; each seed must clear both bars.
fn c4_fast_blobs() -> Outcome {
    let learner = LearnerSpec::default_for(Task::Classification).build::<f64>().map_err(e)?;
    let mut pass = true;
    let mut rows = Vec::new();
    for seed in 0..5u64 {
        let (train, heldout) = blobs_pair(seed)?;
        let (noisy, truth) = inject_noise(&train, &NoiseModel::Uniform { eps: 0.1 }, true, seed + 100).map_err(e)?;
        let config = FastRecovConfig {
            seed: seed + 200,
            ..FastRecovConfig::defaults(Task::Classification)
        };
        let out = fastrecov_loop(&noisy, &config, &RunControl::default()).map_err(e)?;
        let mask = detected_mask(&noisy, &out.detected);
        let f1 = mask.scores(&truth).map_err(e)?.f1();
        let all: Vec<usize> = (0..noisy.len()).collect();
        let base = heldout_metric(learner.as_ref(), &noisy, &all, &heldout, seed).map_err(e)?;
        let cleaned = clean_retrain(&noisy, &mask, learner.as_ref(), &heldout, seed).map_err(e)?;
        pass &= f1 >= 0.8 && cleaned >= base;
        rows.push(format!("F1 {f1:.3}, held-out {base:.4} -> {cleaned:.4}"));
    }
    verdict(pass, rows.join("; "))
}

// 5. Bars apply to the means over the five seeds.
fn c5_survival() -> Outcome {
    const COEF: [f64; 5] = [1.0, -0.8, 0.6, -0.4, 0.2];
    let learner = LearnerSpec::default_for(Task::Survival).build::<f64>().map_err(e)?;
    let (mut precision, mut gain, mut ceiling) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 0..5u64 {
        let train = linear_hazard_survival::<f64>(500, &COEF, 0.3, seed).map_err(e)?;
        let heldout = relabel(&linear_hazard_survival::<f64>(500, &COEF, 0.3, seed + 10_000).map_err(e)?, "h");
        let (noisy, truth) = flip_events(&train, 0.15, seed + 100).map_err(e)?;
        let config = FastRecovConfig {
            seed: seed + 200,
            ..FastRecovConfig::defaults(Task::Survival)
        };
        let out = fastrecov_loop(&noisy, &config, &RunControl::default()).map_err(e)?;
        let mask = detected_mask(&noisy, &out.detected);
        precision.push(mask.scores(&truth).map_err(e)?.precision());
        let all: Vec<usize> = (0..noisy.len()).collect();
        let base = heldout_metric(learner.as_ref(), &noisy, &all, &heldout, seed).map_err(e)?;
        let cleaned = clean_retrain(&noisy, &mask, learner.as_ref(), &heldout, seed).map_err(e)?;
        gain.push(cleaned - base);
        // Reference only: training on the uncorrupted events bounds any gain.
        let uncorrupted = heldout_metric(learner.as_ref(), &train, &all, &heldout, seed).map_err(e)?;
        ceiling.push(uncorrupted - base);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (p, g) = (mean(&precision), mean(&gain));
    verdict(
        p >= 0.30 && g >= 0.02,
        format!(
            "flag precision {p:.3} (chance 0.15, bar 0.30), c-index gain {g:+.4} (bar +0.02); per seed gains {}; \
             gain from uncorrupted training {:+.4}",
            gain.iter().map(|v| format!("{v:+.4}")).collect::<Vec<_>>().join(" "),
            mean(&ceiling)
        ),
    )
}

fn c6_oracles() -> Outcome {
    let checks = common::all_oracles(2024);
    let pass = checks.iter().all(|c| c.passed());
    let detail = checks
        .iter()
        .map(|c| format!("{} {:.1e}/{:.0e} over {}", c.name, c.max_error, c.tolerance, c.instances))
        .collect::<Vec<_>>()
        .join("; ");
    verdict(pass, detail)
}

fn cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_recov"))
        .env_remove("RECOV_JOBS")
        .args(args)
        .output()
        .map_err(e)?;
    if !out.status.success() {
        return Err(format!("recov {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn c7_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(e)?;
    let d = dir.path();
    let clean = d.join("clean.csv");
    save_dataset(&gaussian_blobs::<f64>(500, 5, 0.8, 1).map_err(e)?, &clean).map_err(e)?;
    let data = d.join("data.csv");
    let mask = d.join("mask.csv");
    cli(&["inject-noise", "--in", p(&clean), "--id-col", "id", "--eps", "0.1", "--seed", "2", "--out", p(&data), "--mask", p(&mask)])?;
    let recov = |jobs: &str, name: &str| -> Result<Vec<u8>, String> {
        let out = d.join(name);
        cli(&[
            "--quiet", "--jobs", jobs, "recov", "--in", p(&data), "--id-col", "id", "--eps", "0.1", "--runs", "300",
            "--seed", "7", "--no-timings", "--out", p(&out),
        ])?;
        fs::read(out).map_err(e)
    };
    let fast = |jobs: &str, name: &str| -> Result<Vec<u8>, String> {
        let out = d.join(name);
        cli(&["--quiet", "--jobs", jobs, "fastrecov", "--in", p(&data), "--id-col", "id", "--seed", "7", "--no-timings", "--out", p(&out)])?;
        fs::read(out).map_err(e)
    };
    let sim = |jobs: &str, name: &str| -> Result<Vec<u8>, String> {
        let out = d.join(name);
        cli(&["--jobs", jobs, "simulate", "--n", "8124", "--eps", "0.1", "--runs", "2000", "--seed", "7", "--out", p(&out)])?;
        fs::read(out).map_err(e)
    };
    let r = [recov("8", "r1.json")?, recov("8", "r2.json")?, recov("1", "r3.json")?];
    let f = [fast("8", "f1.json")?, fast("8", "f2.json")?, fast("1", "f3.json")?];
    let s = [sim("1", "s1.csv")?, sim("8", "s8.csv")?];
    let same = |v: &[Vec<u8>]| v.windows(2).all(|w| w[0] == w[1]);
    verdict(
        same(&r) && same(&f) && same(&s),
        format!(
            "recov reports identical: {}, fastrecov reports identical: {}, simulate jobs 1 vs 8 identical: {}",
            same(&r),
            same(&f),
            same(&s)
        ),
    )
}

fn write_external(data: &Dataset<f64>, path: &Path) -> Result<(), String> {
    let mut w = csv::Writer::from_path(path).map_err(e)?;
    let mut header = vec!["sample".to_string(), "y".to_string()];
    header.extend((0..data.n_features()).map(|j| format!("emb_{j}")));
    w.write_record(&header).map_err(e)?;
    let labels = data.class_labels().map_err(e)?;
    for (i, label) in labels.iter().enumerate() {
        let mut rec = vec![data.ids()[i].clone(), label.to_string()];
        rec.extend(data.row(i).iter().map(|v| format!("{v:e}")));
        w.write_record(&rec).map_err(e)?;
    }
    w.flush().map_err(e)
}

fn number_after(text: &str, key: &str) -> Result<f64, String> {
    let at = text.find(key).ok_or_else(|| format!("`{key}` missing from output: {text}"))? + key.len();
    let rest = text[at..].trim_start();
    let end = rest.find(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-')).unwrap_or(rest.len());
    rest[..end].parse().map_err(e)
}

// 8. The criterion 4 protocol through the command line on an embedding-style
// CSV: `sample` ids, label `y`, features `emb_*`.
fn c8_external() -> Outcome {
    let dir = tempfile::tempdir().map_err(e)?;
    let d = dir.path();
    let mut pass = true;
    let mut rows = Vec::new();
    for seed in 0..5u64 {
        let (train, heldout) = blobs_pair(seed)?;
        let (train_csv, held_csv) = (d.join(format!("train{seed}.csv")), d.join(format!("held{seed}.csv")));
        write_external(&train, &train_csv)?;
        write_external(&heldout, &held_csv)?;
        let noisy = d.join(format!("noisy{seed}.csv"));
        let mask = d.join(format!("mask{seed}.csv"));
        let report = d.join(format!("report{seed}.json"));
        let data_args = ["--id-col", "sample", "--label-col", "y"];
        let s = (seed + 100).to_string();
        cli(&[&["inject-noise", "--in", p(&train_csv)], &data_args[..], &["--eps", "0.1", "--seed", &s, "--out", p(&noisy), "--mask", p(&mask)]].concat())?;
        let s = (seed + 200).to_string();
        let out = cli(&[&["--quiet", "fastrecov", "--in", p(&noisy)], &data_args[..], &["--seed", &s, "--out", p(&report), "--truth", p(&mask)]].concat())?;
        let f1 = number_after(&out, "F1")?;
        let s = seed.to_string();
        let out = cli(&["clean-retrain", "--report", p(&report), "--heldout", p(&held_csv), "--seed", &s])?;
        let base = number_after(&out, "samples):")?;
        let cleaned = number_after(&out, "removed):")?;
        pass &= f1 >= 0.8 && cleaned >= base;
        rows.push(format!("F1 {f1:.3}, held-out {base:.4} -> {cleaned:.4}"));
    }
    verdict(pass, rows.join("; "))
}
