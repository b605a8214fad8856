//! Repeated cross-validation: worst-fold occurrence counting and separation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{run_fingerprint, HasFingerprint, RunControl};
use crate::cv::{run_cv, uniform_split};
use crate::dataset::{Dataset, MaskSource, NoiseMask};
use crate::error::{Error, Result};
use crate::learners::{Learner, LearnerSpec, Prediction};
use crate::metrics::{accuracy, concordance_index, fit_gmm_1d, quadratic_weighted_kappa};
use crate::rng::{derive_seed, sub_seed, Stream};
use crate::scalar::{round_half_even, Real};
use crate::theory::{separation_threshold, OccurrencePlan};

/// Index of the smallest metric; the lowest index wins ties.
pub fn worst_fold<T: Real>(metrics: &[T]) -> Result<usize> {
    if metrics.is_empty() {
        return Err(Error::invalid("no fold metrics"));
    }
    let mut best = 0;
    for (i, &m) in metrics.iter().enumerate() {
        if m < metrics[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Per-sample worst-fold occurrence counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub counts: Vec<u32>,
    pub runs: usize,
}

impl CandidatePool {
    pub fn new(n: usize) -> Self {
        Self {
            counts: vec![0; n],
            runs: 0,
        }
    }

    pub fn record(&mut self, rows: &[usize]) {
        for &r in rows {
            self.counts[r] += 1;
        }
        self.runs += 1;
    }

    /// Adds another pool's counts; the result does not depend on merge order.
    pub fn merge(&mut self, other: &CandidatePool) -> Result<()> {
        if other.counts.len() != self.counts.len() {
            return Err(Error::LengthMismatch {
                expected: self.counts.len(),
                found: other.counts.len(),
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.runs += other.runs;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecovConfig {
    pub k: usize,
    pub n_runs: usize,
    pub seed: u64,
    pub learner: LearnerSpec,
}

impl RecovConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs < 1 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        if self.k < 2 {
            return Err(Error::invalid("k must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub split_seed: u64,
    pub worst_fold: usize,
    pub worst_metric: f64,
    pub fold_metrics: Vec<f64>,
    /// Folds whose fit hit the iteration limit or the coefficient cap.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fit_warnings: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecovOutcome {
    pub pool: CandidatePool,
    pub trace: Vec<RunRecord>,
}

#[derive(Serialize, Deserialize)]
struct RecovCheckpoint {
    fingerprint: String,
    pool: CandidatePool,
    trace: Vec<RunRecord>,
}

impl HasFingerprint for RecovCheckpoint {
    fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}

/// Runs processed between stop checks and progress lines.
const BATCH: usize = 50;
/// Batches between checkpoints.
const CHECKPOINT_BATCHES: usize = 2;

fn one_run<T: Real>(data: &Dataset<T>, learner: &dyn Learner<T>, k: usize, master: u64, run: usize) -> Result<(Vec<usize>, RunRecord)> {
    let run_seed = derive_seed(master, run as u64);
    let split_seed = sub_seed(run_seed, Stream::Split);
    let split = uniform_split(data.len(), k, split_seed)?;
    let outcome = run_cv(data, &split, learner, &vec![false; data.len()], sub_seed(run_seed, Stream::Learner))?;
    let worst = worst_fold(&outcome.fold_metrics)?;
    let record = RunRecord {
        run,
        split_seed,
        worst_fold: worst,
        worst_metric: outcome.fold_metrics[worst].as_f64(),
        fold_metrics: outcome.fold_metrics.iter().map(|v| v.as_f64()).collect(),
        fit_warnings: outcome.warnings.iter().map(|w| w.0).collect(),
    };
    Ok((split.folds[worst].clone(), record))
}

/// Runs `n_runs` seeded cross-validations and counts how often each sample
/// falls in the worst fold. Run `i` depends only on `(seed, i)`, so the pool
/// is the same for any worker count.
pub fn recov_run_loop<T: Real>(data: &Dataset<T>, config: &RecovConfig, control: &RunControl) -> Result<RecovOutcome> {
    config.validate()?;
    let learner = config.learner.build::<T>()?;
    // The run count is left out so a finished job can be extended.
    let fingerprint = run_fingerprint(data, &(config.k, config.seed, &config.learner))?;
    let (mut pool, mut trace) = match control.load::<RecovCheckpoint>(&fingerprint)? {
        Some(c) if c.pool.runs > config.n_runs => {
            return Err(Error::Checkpoint(format!(
                "checkpoint already holds {} runs, more than the {} requested",
                c.pool.runs, config.n_runs
            )))
        }
        Some(c) => (c.pool, c.trace),
        None => (CandidatePool::new(data.len()), Vec::new()),
    };
    let mut batches_since_save = 0;
    while pool.runs < config.n_runs {
        if control.stop_requested() {
            control.save(&RecovCheckpoint {
                fingerprint: fingerprint.clone(),
                pool: pool.clone(),
                trace: trace.clone(),
            })?;
            return Err(control.interrupted(pool.runs));
        }
        let start = pool.runs;
        let end = (start + BATCH).min(config.n_runs);
        let results: Vec<Result<(Vec<usize>, RunRecord)>> = (start..end)
            .into_par_iter()
            .map(|run| {
                one_run(data, learner.as_ref(), config.k, config.seed, run).map_err(|e| Error::Run {
                    run,
                    source: Box::new(e),
                })
            })
            .collect();
        for r in results {
            match r {
                Ok((rows, record)) => {
                    pool.record(&rows);
                    trace.push(record);
                }
                Err(e) => {
                    control.save(&RecovCheckpoint {
                        fingerprint: fingerprint.clone(),
                        pool: pool.clone(),
                        trace: trace.clone(),
                    })?;
                    return Err(e);
                }
            }
        }
        if control.progress {
            let worst: Vec<f64> = trace.iter().map(|r| r.worst_metric).collect();
            let mean = worst.iter().sum::<f64>() / worst.len() as f64;
            let min = worst.iter().copied().fold(f64::INFINITY, f64::min);
            eprintln!(
                "recov: {}/{} runs, worst-fold metric mean {mean:.4}, min {min:.4}",
                pool.runs, config.n_runs
            );
        }
        batches_since_save += 1;
        if batches_since_save == CHECKPOINT_BATCHES || pool.runs == config.n_runs {
            batches_since_save = 0;
            control.save(&RecovCheckpoint {
                fingerprint: fingerprint.clone(),
                pool: pool.clone(),
                trace: trace.clone(),
            })?;
        }
    }
    Ok(RecovOutcome { pool, trace })
}

/// How occurrence counts are split into clean and noisy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum SeparationRule {
    /// Binomial crossover from an occurrence plan made for this run count.
    Theory { plan: OccurrencePlan },
    Explicit { threshold: f64 },
    /// Crossover of a two-component mixture fitted to the counts.
    Gmm,
}

/// Threshold applied by a rule to a pool. Counts strictly above it are noisy.
pub fn separation_threshold_for(pool: &CandidatePool, rule: &SeparationRule) -> Result<f64> {
    if pool.runs == 0 {
        return Err(Error::invalid("empty candidate pool"));
    }
    match rule {
        SeparationRule::Theory { plan } => {
            if plan.n_runs != pool.runs {
                return Err(Error::invalid(format!(
                    "plan is for {} runs but the pool has {}",
                    plan.n_runs, pool.runs
                )));
            }
            Ok(separation_threshold(pool.runs, plan.q_noisy, plan.q_clean).0)
        }
        SeparationRule::Explicit { threshold } => Ok(*threshold),
        SeparationRule::Gmm => {
            let v: Vec<f64> = pool.counts.iter().map(|&c| c as f64).collect();
            Ok(fit_gmm_1d(&v)?.threshold)
        }
    }
}

/// Flags samples whose count exceeds `threshold`.
pub fn separate(pool: &CandidatePool, ids: &[String], threshold: f64) -> Result<NoiseMask> {
    if ids.len() != pool.counts.len() {
        return Err(Error::LengthMismatch {
            expected: pool.counts.len(),
            found: ids.len(),
        });
    }
    let flags = pool.counts.iter().map(|&c| c as f64 > threshold).collect();
    NoiseMask::new(ids.to_vec(), flags, MaskSource::Detected)
}

/// Task metric of a fitted learner on every row of `heldout`.
pub fn heldout_metric<T: Real>(learner: &dyn Learner<T>, train: &Dataset<T>, rows: &[usize], heldout: &Dataset<T>, seed: u64) -> Result<T> {
    if rows.is_empty() {
        return Err(Error::invalid("no training samples left after cleaning"));
    }
    if heldout.task() != train.task() {
        return Err(Error::WrongTask(format!("held-out data is {}, training data {}", heldout.task(), train.task())));
    }
    let model = learner.fit(train, rows, seed)?;
    let all: Vec<usize> = (0..heldout.len()).collect();
    let pred = model.predict(heldout, &all)?;
    match (heldout.labels(), &pred) {
        (crate::dataset::Labels::Classification { values, .. }, p @ Prediction::Probabilities { .. }) => {
            let predicted: Vec<u32> = (0..all.len()).map(|i| p.predicted_class(i).expect("probabilities")).collect();
            accuracy(&predicted, values)
        }
        (crate::dataset::Labels::Survival { times, events }, Prediction::Risk(r)) => concordance_index(r, times, events),
        (crate::dataset::Labels::Ordinal { grades, range }, Prediction::Grade(g)) => {
            let predicted: Vec<i64> = g
                .iter()
                .map(|&v| (round_half_even(v.as_f64()) as i64).clamp(range.min, range.max))
                .collect();
            quadratic_weighted_kappa(&predicted, grades, *range)
        }
        _ => Err(Error::WrongTask("learner output does not match the held-out labels".into())),
    }
}

/// Trains on the samples not flagged in `detected` and scores `heldout`.
pub fn clean_retrain<T: Real>(
    data: &Dataset<T>,
    detected: &NoiseMask,
    learner: &dyn Learner<T>,
    heldout: &Dataset<T>,
    seed: u64,
) -> Result<T> {
    if detected.ids.len() != data.len() || detected.ids.iter().zip(data.ids()).any(|(a, b)| a != b) {
        return Err(Error::invalid("mask ids do not match the dataset"));
    }
    let index = data.id_index();
    if let Some(id) = heldout.ids().iter().find(|id| index.contains_key(id.as_str())) {
        return Err(Error::invalid(format!("held-out sample `{id}` is also in the training data")));
    }
    let rows: Vec<usize> = (0..data.len()).filter(|&i| !detected.flags[i]).collect();
    heldout_metric(learner, data, &rows, heldout, seed)
}

/// Ablation: drops `count` uniformly chosen samples instead of the detected ones.
pub fn random_removal_retrain<T: Real>(
    data: &Dataset<T>,
    count: usize,
    learner: &dyn Learner<T>,
    heldout: &Dataset<T>,
    seed: u64,
) -> Result<T> {
    if count > data.len() {
        return Err(Error::invalid("cannot remove more samples than exist"));
    }
    let mut rng = crate::rng::rng_from(sub_seed(seed, Stream::Drops));
    let mut removed = vec![false; data.len()];
    for i in rand::seq::index::sample(&mut rng, data.len(), count) {
        removed[i] = true;
    }
    let rows: Vec<usize> = (0..data.len()).filter(|&i| !removed[i]).collect();
    heldout_metric(learner, data, &rows, heldout, seed)
}
