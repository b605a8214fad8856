//! Fold construction and one cross-validation run.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Labels};
use crate::error::{Error, Result};
use crate::learners::{FitWarning, Learner, Prediction};
use crate::metrics::{
    accuracy, concordance_index, quadratic_weighted_kappa, regression_closeness, sample_concordances,
    true_class_probability, FoldMetricKind,
};
use crate::rng::{derive_seed, rng_from};
use crate::scalar::{round_half_even, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Uniform,
    /// Sequential weighted draws without replacement, chunked in draw order:
    /// high-probability samples fill the first folds, low-probability ones the
    /// last.
    Weighted,
}

/// Partition of row indices into `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
    pub mode: SplitMode,
}

impl FoldSplit {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Fold index of every row.
    pub fn assignment(&self, n: usize) -> Vec<u32> {
        let mut a = vec![u32::MAX; n];
        for (f, rows) in self.folds.iter().enumerate() {
            for &r in rows {
                a[r] = f as u32;
            }
        }
        a
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::invalid(format!("k = {k}; need at least 2 folds")));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds the {n} samples")));
    }
    Ok(())
}

/// Contiguous chunks; the first `n mod k` folds get one extra sample.
fn chunk(order: Vec<usize>, k: usize) -> Vec<Vec<usize>> {
    let n = order.len();
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut it = order.into_iter();
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(it.by_ref().take(size).collect());
    }
    folds
}

pub fn uniform_split(n: usize, k: usize, seed: u64) -> Result<FoldSplit> {
    check_k(n, k)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(seed));
    Ok(FoldSplit {
        folds: chunk(order, k),
        seed,
        mode: SplitMode::Uniform,
    })
}

/// Draws all samples without replacement with probability proportional to
/// the remaining weights, then chunks the draw order into folds.
///
/// Uses exponential keys `ln(u)/w` (largest first), which yields the same
/// distribution over orders as sequential weighted draws.
pub fn weighted_split<T: Real>(probabilities: &[T], k: usize, seed: u64) -> Result<FoldSplit> {
    let n = probabilities.len();
    check_k(n, k)?;
    if let Some((i, p)) = probabilities.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p > T::zero())) {
        return Err(Error::invalid(format!("sampling probability {p} at position {i} is not positive")));
    }
    let total: f64 = probabilities.iter().map(|p| p.as_f64()).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("sampling probabilities sum to {total}, not 1")));
    }
    let mut rng = rng_from(seed);
    let mut keyed: Vec<(f64, usize)> = probabilities
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let u = 1.0 - rng.random::<f64>();
            (u.ln() / p.as_f64(), i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(FoldSplit {
        folds: chunk(keyed.into_iter().map(|(_, i)| i).collect(), k),
        seed,
        mode: SplitMode::Weighted,
    })
}

/// Result of one cross-validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome<T> {
    pub fold_metrics: Vec<T>,
    pub fold_metric: FoldMetricKind,
    /// Per-row sample metric from its validation fold; `None` where undefined
    /// (survival samples without a comparable pair).
    pub sample_metrics: Vec<Option<T>>,
    /// Fold index of every row.
    pub assignment: Vec<u32>,
    pub split_seed: u64,
    pub learner_seed: u64,
    pub warnings: Vec<(usize, FitWarning)>,
}

struct FoldResult<T> {
    metric: T,
    prediction: Prediction<T>,
    warning: Option<FitWarning>,
}

fn grade_of<T: Real>(v: T, lo: i64, hi: i64) -> i64 {
    (round_half_even(v.as_f64()) as i64).clamp(lo, hi)
}

fn fold_metric<T: Real>(data: &Dataset<T>, rows: &[usize], pred: &Prediction<T>) -> Result<T> {
    match (data.labels(), pred) {
        (Labels::Classification { values, .. }, p @ Prediction::Probabilities { .. }) => {
            let predicted: Vec<u32> = (0..rows.len()).map(|i| p.predicted_class(i).expect("probabilities")).collect();
            let truth: Vec<u32> = rows.iter().map(|&r| values[r]).collect();
            accuracy(&predicted, &truth)
        }
        (Labels::Survival { times, events }, Prediction::Risk(risk)) => {
            let t: Vec<T> = rows.iter().map(|&r| times[r]).collect();
            let e: Vec<bool> = rows.iter().map(|&r| events[r]).collect();
            concordance_index(risk, &t, &e)
        }
        (Labels::Ordinal { grades, range }, Prediction::Grade(g)) => {
            let predicted: Vec<i64> = g.iter().map(|&v| grade_of(v, range.min, range.max)).collect();
            let truth: Vec<i64> = rows.iter().map(|&r| grades[r]).collect();
            quadratic_weighted_kappa(&predicted, &truth, *range)
        }
        _ => Err(Error::WrongTask(format!("learner output does not match {} labels", data.task()))),
    }
}

/// Trains on every fold's complement (minus `dropped` rows) and scores the
/// held-out fold. Dropped rows are still validated and scored.
pub fn run_cv<T: Real>(
    data: &Dataset<T>,
    split: &FoldSplit,
    learner: &dyn Learner<T>,
    dropped: &[bool],
    learner_seed: u64,
) -> Result<RunOutcome<T>> {
    let n = data.len();
    if dropped.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: dropped.len(),
        });
    }
    if learner.task() != data.task() {
        return Err(Error::WrongTask(format!("{} learner on {} data", learner.task(), data.task())));
    }
    let assignment = split.assignment(n);
    if assignment.contains(&u32::MAX) {
        return Err(Error::invalid("split does not cover every sample"));
    }
    let results: Vec<Result<FoldResult<T>>> = (0..split.k())
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| assignment[i] as usize != f && !dropped[i]).collect();
            if train.is_empty() {
                return Err(Error::EmptyTrainingSet { fold: f });
            }
            let wrap = |e| Error::Fold {
                fold: f,
                source: Box::new(e),
            };
            let model = learner.fit(data, &train, derive_seed(learner_seed, f as u64)).map_err(wrap)?;
            let rows = &split.folds[f];
            let prediction = model.predict(data, rows).map_err(wrap)?;
            let metric = fold_metric(data, rows, &prediction).map_err(wrap)?;
            Ok(FoldResult {
                metric,
                prediction,
                warning: model.diagnostics().warning,
            })
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut sample_metrics = vec![None; n];
    match data.labels() {
        Labels::Classification { values, .. } => {
            for (rows, res) in split.folds.iter().zip(&results) {
                for (i, &r) in rows.iter().enumerate() {
                    let p = res.prediction.probabilities(i).expect("probabilities");
                    sample_metrics[r] = Some(true_class_probability(p, values[r]));
                }
            }
        }
        Labels::Survival { times, events } => {
            // Validation risks of all folds pooled, so every sample is
            // compared with samples inside and outside its fold.
            let mut risk = vec![T::zero(); n];
            for (rows, res) in split.folds.iter().zip(&results) {
                let Prediction::Risk(r) = &res.prediction else { unreachable!() };
                for (&row, &v) in rows.iter().zip(r) {
                    risk[row] = v;
                }
            }
            sample_metrics = sample_concordances(&risk, times, events)?;
        }
        Labels::Ordinal { grades, range } => {
            for (rows, res) in split.folds.iter().zip(&results) {
                let Prediction::Grade(g) = &res.prediction else { unreachable!() };
                for (&r, &v) in rows.iter().zip(g) {
                    sample_metrics[r] = Some(regression_closeness(v, grades[r], *range)?);
                }
            }
        }
    }
    Ok(RunOutcome {
        fold_metrics: results.iter().map(|r| r.metric).collect(),
        fold_metric: FoldMetricKind::for_task(data.task()),
        sample_metrics,
        assignment,
        split_seed: split.seed,
        learner_seed,
        warnings: results.iter().enumerate().filter_map(|(f, r)| r.warning.map(|w| (f, w))).collect(),
    })
}
