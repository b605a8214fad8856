//! Versioned run reports and their plot-ready CSV exports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::dataset_fingerprint;
use crate::dataset::{Dataset, Schema, Task};
use crate::error::{Error, Result};
use crate::fastrecov::{FastRecovConfig, FastRecovOutcome, FastRunRecord};
use crate::recov::{RecovConfig, RecovOutcome, RunRecord, SeparationRule};
use crate::scalar::Real;

pub const REPORT_VERSION: u32 = 1;

/// Effective configuration of the run that produced a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportConfig {
    Recov { recov: RecovConfig, separation: SeparationRule },
    Fastrecov { fastrecov: FastRecovConfig },
}

/// Where the data came from and how it was read, enough to rerun.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<Schema>,
    /// Continuous feature columns were z-scored after loading.
    #[serde(default)]
    pub standardize: bool,
    pub name: String,
    pub task: Task,
    pub n_samples: usize,
    pub n_features: usize,
    pub fingerprint: String,
}

impl InputInfo {
    pub fn describe<T: Real>(data: &Dataset<T>) -> Self {
        Self {
            path: None,
            schema: None,
            standardize: false,
            name: data.name.clone(),
            task: data.task(),
            n_samples: data.len(),
            n_features: data.n_features(),
            fingerprint: dataset_fingerprint(data),
        }
    }
}

/// Occurrence count (ReCoV) or final memory (fastReCoV) of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutput {
    pub id: String,
    pub value: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "runs", rename_all = "snake_case")]
pub enum RunTrace {
    Recov(Vec<RunRecord>),
    Fastrecov(Vec<FastRunRecord>),
}

impl RunTrace {
    pub fn len(&self) -> usize {
        match self {
            RunTrace::Recov(r) => r.len(),
            RunTrace::Fastrecov(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Worst-fold metric of every run.
    pub fn worst_metrics(&self) -> Vec<f64> {
        match self {
            RunTrace::Recov(r) => r.iter().map(|x| x.worst_metric).collect(),
            RunTrace::Fastrecov(r) => r.iter().map(|x| x.worst_metric).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub seconds_per_run: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: u32,
    pub config: ReportConfig,
    pub input: InputInfo,
    /// Threshold applied to `per_sample` values. ReCoV flags counts above
    /// it, fastReCoV memory below it. Absent for percentile fastReCoV runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// How weighted splits place samples; present for fastReCoV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_orientation: Option<String>,
    pub per_sample: Vec<SampleOutput>,
    pub detected_ids: Vec<String>,
    pub run_trace: RunTrace,
    /// Omitted when reports must compare bit for bit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

pub const WEIGHTED_ORIENTATION: &str = "high-probability samples fill the first folds, low-probability samples the last";

impl RunReport {
    pub fn from_recov<T: Real>(
        data: &Dataset<T>,
        input: InputInfo,
        config: RecovConfig,
        separation: SeparationRule,
        outcome: RecovOutcome,
        threshold: f64,
        timings: Option<Timings>,
    ) -> Result<Self> {
        check_len(data, outcome.pool.counts.len())?;
        let per_sample: Vec<SampleOutput> = data
            .ids()
            .iter()
            .zip(&outcome.pool.counts)
            .map(|(id, &c)| SampleOutput {
                id: id.clone(),
                value: c as f64,
                flagged: c as f64 > threshold,
            })
            .collect();
        Ok(Self {
            version: REPORT_VERSION,
            config: ReportConfig::Recov { recov: config, separation },
            input,
            threshold: Some(threshold),
            split_orientation: None,
            detected_ids: flagged_ids(&per_sample),
            per_sample,
            run_trace: RunTrace::Recov(outcome.trace),
            timings,
        })
    }

    pub fn from_fastrecov<T: Real>(
        data: &Dataset<T>,
        input: InputInfo,
        config: FastRecovConfig,
        outcome: FastRecovOutcome<T>,
        threshold: Option<f64>,
        timings: Option<Timings>,
    ) -> Result<Self> {
        check_len(data, outcome.memory.values.len())?;
        let mut flagged = vec![false; data.len()];
        for &i in &outcome.detected {
            flagged[i] = true;
        }
        let per_sample: Vec<SampleOutput> = data
            .ids()
            .iter()
            .zip(&outcome.memory.values)
            .zip(flagged)
            .map(|((id, m), flagged)| SampleOutput {
                id: id.clone(),
                value: m.as_f64(),
                flagged,
            })
            .collect();
        Ok(Self {
            version: REPORT_VERSION,
            config: ReportConfig::Fastrecov { fastrecov: config },
            input,
            threshold,
            split_orientation: Some(WEIGHTED_ORIENTATION.into()),
            detected_ids: flagged_ids(&per_sample),
            per_sample,
            run_trace: RunTrace::Fastrecov(outcome.trace),
            timings,
        })
    }

    pub fn ids(&self) -> Vec<String> {
        self.per_sample.iter().map(|s| s.id.clone()).collect()
    }

    pub fn flags(&self) -> Vec<bool> {
        self.per_sample.iter().map(|s| s.flagged).collect()
    }

    /// Plain-text overview for the terminal.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let n = self.per_sample.len();
        let d = self.detected_ids.len();
        match &self.config {
            ReportConfig::Recov { recov, separation } => {
                let rule = match separation {
                    SeparationRule::Theory { .. } => "theory",
                    SeparationRule::Explicit { .. } => "explicit",
                    SeparationRule::Gmm => "gmm",
                };
                let _ = writeln!(s, "ReCoV: {} runs, k = {}, seed {}", recov.n_runs, recov.k, recov.seed);
                let _ = writeln!(s, "separation: {rule}, threshold {:.3}", self.threshold.unwrap_or(f64::NAN));
            }
            ReportConfig::Fastrecov { fastrecov: c } => {
                let _ = writeln!(
                    s,
                    "fastReCoV: {} runs, k = {}, tau {}, alpha {}, beta {}, threshold {}, seed {}",
                    c.n_runs, c.k, c.tau, c.alpha, c.beta, c.threshold, c.seed
                );
                if let Some(t) = self.threshold {
                    let _ = writeln!(s, "memory cut-off: {t:.4}");
                }
            }
        }
        let _ = writeln!(
            s,
            "data: {} ({}, {} samples, {} features, fingerprint {})",
            self.input.name, self.input.task, self.input.n_samples, self.input.n_features, self.input.fingerprint
        );
        let _ = writeln!(s, "flagged: {d} of {n} ({:.2}%)", 100.0 * d as f64 / n.max(1) as f64);
        let values: Vec<f64> = self.per_sample.iter().map(|p| p.value).collect();
        if let Some((lo, hi, mean)) = range_mean(&values) {
            let _ = writeln!(s, "per-sample values: min {lo:.4}, mean {mean:.4}, max {hi:.4}");
        }
        if let Some((lo, hi, mean)) = range_mean(&self.run_trace.worst_metrics()) {
            let _ = writeln!(s, "worst-fold metric: min {lo:.4}, mean {mean:.4}, max {hi:.4}");
        }
        if let Some(t) = self.timings {
            let _ = writeln!(s, "time: {:.1} s ({:.3} s per run)", t.total_seconds, t.seconds_per_run);
        }
        s
    }
}

fn check_len<T: Real>(data: &Dataset<T>, n: usize) -> Result<()> {
    if data.len() != n {
        return Err(Error::LengthMismatch {
            expected: data.len(),
            found: n,
        });
    }
    Ok(())
}

fn flagged_ids(rows: &[SampleOutput]) -> Vec<String> {
    rows.iter().filter(|r| r.flagged).map(|r| r.id.clone()).collect()
}

fn range_mean(v: &[f64]) -> Option<(f64, f64, f64)> {
    if v.is_empty() {
        return None;
    }
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some((lo, hi, v.iter().sum::<f64>() / v.len() as f64))
}

pub fn save_report(report: &RunReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(report)? + "\n";
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Loads a report, rejecting any version other than [`REPORT_VERSION`].
pub fn load_report(path: impl AsRef<Path>) -> Result<RunReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    match value.get("version") {
        Some(v) if v.as_u64() == Some(REPORT_VERSION as u64) => Ok(serde_json::from_value(value)?),
        other => Err(Error::ReportVersion {
            found: other.map_or_else(|| "missing".to_string(), |v| v.to_string()),
            expected: REPORT_VERSION,
        }),
    }
}

/// Writes `count,clean_freq,noisy_freq` with one row per count from 0 to the
/// largest observed. Each population's frequencies sum to 1 (or are all 0
/// when the population is empty).
pub fn write_occurrence_histogram(counts: &[u32], noisy: &[bool], path: impl AsRef<Path>) -> Result<()> {
    if counts.len() != noisy.len() {
        return Err(Error::LengthMismatch {
            expected: counts.len(),
            found: noisy.len(),
        });
    }
    let top = counts.iter().copied().max().unwrap_or(0) as usize;
    let mut tally = [vec![0usize; top + 1], vec![0usize; top + 1]];
    for (&c, &f) in counts.iter().zip(noisy) {
        tally[f as usize][c as usize] += 1;
    }
    let totals = [tally[0].iter().sum::<usize>(), tally[1].iter().sum::<usize>()];
    let freq = |pop: usize, c: usize| {
        if totals[pop] == 0 {
            0.0
        } else {
            tally[pop][c] as f64 / totals[pop] as f64
        }
    };
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["count", "clean_freq", "noisy_freq"])?;
    for c in 0..=top {
        w.write_record([c.to_string(), freq(0, c).to_string(), freq(1, c).to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `id,value,flagged`, one row per sample.
pub fn write_per_sample(report: &RunReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let column = match report.config {
        ReportConfig::Recov { .. } => "count",
        ReportConfig::Fastrecov { .. } => "memory",
    };
    w.write_record(["id", column, "flagged"])?;
    for s in &report.per_sample {
        w.write_record([s.id.as_str(), &s.value.to_string(), if s.flagged { "1" } else { "0" }])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the histogram matching the report kind: occurrence counts split by
/// flagged status for ReCoV, per-sample memory values for fastReCoV.
pub fn write_report_histogram(report: &RunReport, path: impl AsRef<Path>) -> Result<()> {
    match report.config {
        ReportConfig::Recov { .. } => {
            let counts: Vec<u32> = report.per_sample.iter().map(|s| s.value as u32).collect();
            write_occurrence_histogram(&counts, &report.flags(), path)
        }
        ReportConfig::Fastrecov { .. } => write_per_sample(report, path),
    }
}
