//! Memory-guided repeated cross-validation.
//!
//! Each run splits with probabilities `softmax(memory/τ)` so that suspected
//! samples (low memory) tend to share the last fold, drops a random share `β`
//! of the currently identified samples from training, and folds the per-sample
//! validation metric into the memory by an exponential moving average.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::control::{run_fingerprint, HasFingerprint, RunControl};
use crate::cv::{run_cv, weighted_split};
use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};
use crate::learners::LearnerSpec;
use crate::metrics::fit_gmm_1d;
use crate::recov::worst_fold;
use crate::rng::{derive_seed, rng_from, sub_seed, Stream};
use crate::scalar::{round_half_even, Real};

/// Rule turning memory values into an identified (suspected noisy) set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum Threshold {
    /// Memory strictly below the value.
    Absolute(f64),
    /// The given percentage of samples with the lowest memory.
    Percentile(f64),
    /// Below the crossover of a two-component mixture fitted to the memory.
    Gmm,
}

impl std::str::FromStr for Threshold {
    type Err = Error;

    /// `abs:0.3`, `pct:10` or `gmm`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("gmm") {
            return Ok(Threshold::Gmm);
        }
        let (mode, value) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("threshold `{s}`; expected abs:V, pct:P or gmm")))?;
        let v: f64 = value
            .parse()
            .map_err(|_| Error::invalid(format!("threshold value `{value}` is not a number")))?;
        let t = match mode {
            "abs" => Threshold::Absolute(v),
            "pct" => Threshold::Percentile(v),
            _ => return Err(Error::invalid(format!("threshold mode `{mode}`; expected abs, pct or gmm"))),
        };
        t.validate()?;
        Ok(t)
    }
}

impl std::fmt::Display for Threshold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Threshold::Absolute(v) => write!(f, "abs:{v}"),
            Threshold::Percentile(v) => write!(f, "pct:{v}"),
            Threshold::Gmm => f.write_str("gmm"),
        }
    }
}

impl Threshold {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Threshold::Absolute(v) if !v.is_finite() => Err(Error::invalid("absolute threshold must be finite")),
            Threshold::Percentile(p) if !(p > 0.0 && p < 100.0) => {
                Err(Error::invalid(format!("percentile {p} outside (0, 100)")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastRecovConfig {
    pub n_runs: usize,
    pub k: usize,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub threshold: Threshold,
    pub seed: u64,
    pub learner: LearnerSpec,
}

impl FastRecovConfig {
    /// Per-task defaults: classification τ 0.1, β 0.8, absolute 0.3, 10 runs;
    /// survival τ 0.5, β 0.1, 4th percentile, 50 runs; ordinal τ 1.0, β 0.5,
    /// 10th percentile, 15 runs. α is 0.3 and k is 5 throughout.
    pub fn defaults(task: Task) -> Self {
        let (tau, beta, threshold, n_runs) = match task {
            Task::Classification => (0.1, 0.8, Threshold::Absolute(0.3), 10),
            Task::Survival => (0.5, 0.1, Threshold::Percentile(4.0), 50),
            Task::Ordinal => (1.0, 0.5, Threshold::Percentile(10.0), 15),
        };
        Self {
            n_runs,
            k: 5,
            tau,
            alpha: 0.3,
            beta,
            threshold,
            seed: 0,
            learner: LearnerSpec::default_for(task),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_runs < 1 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        if self.k < 2 {
            return Err(Error::invalid("k must be at least 2"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid("temperature must be positive"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid("EMA weight must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::invalid("drop rate must lie in [0, 1]"));
        }
        self.threshold.validate()
    }
}

/// Per-sample memory; lower means more suspect.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBank<T> {
    pub values: Vec<T>,
    pub updates: usize,
}

impl<T: Real> MemoryBank<T> {
    /// Every sample starts at 0.
    pub fn new(n: usize) -> Self {
        Self {
            values: vec![T::zero(); n],
            updates: 0,
        }
    }

    pub fn update(&mut self, metrics: &[Option<T>], alpha: T) -> Result<()> {
        ema_update(&mut self.values, metrics, alpha)?;
        self.updates += 1;
        Ok(())
    }
}

/// `memory = α·memory + (1 - α)·metric`; samples without a metric keep
/// their value.
pub fn ema_update<T: Real>(memory: &mut [T], metrics: &[Option<T>], alpha: T) -> Result<()> {
    if memory.len() != metrics.len() {
        return Err(Error::LengthMismatch {
            expected: memory.len(),
            found: metrics.len(),
        });
    }
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(Error::invalid("EMA weight must lie in [0, 1]"));
    }
    for (m, v) in memory.iter_mut().zip(metrics) {
        if let Some(v) = v {
            *m = alpha * *m + (T::one() - alpha) * *v;
        }
    }
    Ok(())
}

/// `softmax(memory/τ)`, stabilized by subtracting the maximum.
pub fn sampling_probabilities<T: Real>(memory: &[T], tau: T) -> Vec<T> {
    let max = memory.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    let mut p: Vec<T> = memory.iter().map(|&m| ((m - max) / tau).exp()).collect();
    let total = p.iter().copied().sum::<T>();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

/// Indices flagged by `threshold`, in ascending order.
pub fn identify<T: Real>(memory: &[T], threshold: Threshold) -> Result<Vec<usize>> {
    threshold.validate()?;
    let below = |t: T| (0..memory.len()).filter(|&i| memory[i] < t).collect::<Vec<_>>();
    match threshold {
        Threshold::Absolute(t) => Ok(below(T::lit(t))),
        Threshold::Percentile(p) => {
            let count = round_half_even(p / 100.0 * memory.len() as f64) as usize;
            let mut order: Vec<usize> = (0..memory.len()).collect();
            // Stable sort: equal memories keep dataset order.
            order.sort_by(|&a, &b| memory[a].partial_cmp(&memory[b]).expect("finite memory"));
            let mut picked = order[..count].to_vec();
            picked.sort_unstable();
            Ok(picked)
        }
        Threshold::Gmm => match fit_gmm_1d(memory) {
            Ok(g) => Ok(below(g.threshold)),
            // No spread in memory: nothing stands out.
            Err(Error::Degenerate(_)) => Ok(Vec::new()),
            Err(e) => Err(e),
        },
    }
}

/// Memory value below which samples are flagged, when the rule has one:
/// the absolute value itself or the mixture crossover. Percentile mode flags
/// by rank and has none.
pub fn memory_cutoff<T: Real>(memory: &[T], threshold: Threshold) -> Option<f64> {
    match threshold {
        Threshold::Absolute(t) => Some(t),
        Threshold::Percentile(_) => None,
        Threshold::Gmm => fit_gmm_1d(memory).ok().map(|g| g.threshold.as_f64()),
    }
}

/// `⌊β·|identified|⌋` uniformly chosen members of `identified`.
pub fn select_drops(identified: &[usize], beta: f64, seed: u64) -> Vec<usize> {
    let count = ((beta * identified.len() as f64).floor() as usize).min(identified.len());
    let mut rng = rng_from(seed);
    let mut out: Vec<usize> = index::sample(&mut rng, identified.len(), count)
        .into_iter()
        .map(|i| identified[i])
        .collect();
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastRunRecord {
    pub run: usize,
    pub split_seed: u64,
    pub worst_fold: usize,
    pub worst_metric: f64,
    pub fold_metrics: Vec<f64>,
    pub dropped: usize,
    pub identified: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fit_warnings: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FastRecovOutcome<T> {
    pub memory: MemoryBank<T>,
    /// Identified set after the last run.
    pub detected: Vec<usize>,
    pub trace: Vec<FastRunRecord>,
}

#[derive(Serialize, Deserialize)]
struct FastCheckpoint {
    fingerprint: String,
    memory: Vec<f64>,
    updates: usize,
    trace: Vec<FastRunRecord>,
}

impl HasFingerprint for FastCheckpoint {
    fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}

pub fn fastrecov_loop<T: Real>(data: &Dataset<T>, config: &FastRecovConfig, control: &RunControl) -> Result<FastRecovOutcome<T>> {
    config.validate()?;
    let learner = config.learner.build::<T>()?;
    let n = data.len();
    let mut c = config.clone();
    c.n_runs = 0;
    let fingerprint = run_fingerprint(data, &c)?;
    let (mut memory, mut trace) = match control.load::<FastCheckpoint>(&fingerprint)? {
        Some(ck) if ck.updates > config.n_runs => {
            return Err(Error::Checkpoint(format!(
                "checkpoint already holds {} runs, more than the {} requested",
                ck.updates, config.n_runs
            )))
        }
        Some(ck) => (
            MemoryBank {
                values: ck.memory.iter().map(|&v| T::lit(v)).collect(),
                updates: ck.updates,
            },
            ck.trace,
        ),
        None => (MemoryBank::new(n), Vec::new()),
    };
    let tau = T::lit(config.tau);
    let alpha = T::lit(config.alpha);
    // Identification waits for the first update; before it every sample
    // would sit below any positive threshold.
    let mut identified = if memory.updates > 0 {
        identify(&memory.values, config.threshold)?
    } else {
        Vec::new()
    };
    let mut probabilities = sampling_probabilities(&memory.values, tau);
    let save = |memory: &MemoryBank<T>, trace: &Vec<FastRunRecord>| {
        control.save(&FastCheckpoint {
            fingerprint: fingerprint.clone(),
            memory: memory.values.iter().map(|v| v.as_f64()).collect(),
            updates: memory.updates,
            trace: trace.clone(),
        })
    };
    while memory.updates < config.n_runs {
        if control.stop_requested() {
            save(&memory, &trace)?;
            return Err(control.interrupted(memory.updates));
        }
        let run = memory.updates;
        let run_seed = derive_seed(config.seed, run as u64);
        let wrap = |e| Error::Run {
            run,
            source: Box::new(e),
        };
        let split_seed = sub_seed(run_seed, Stream::Split);
        let split = weighted_split(&probabilities, config.k, split_seed).map_err(wrap)?;
        let drops = select_drops(&identified, config.beta, sub_seed(run_seed, Stream::Drops));
        let mut dropped = vec![false; n];
        for &d in &drops {
            dropped[d] = true;
        }
        let outcome = match run_cv(data, &split, learner.as_ref(), &dropped, sub_seed(run_seed, Stream::Learner)) {
            Ok(o) => o,
            Err(e) => {
                save(&memory, &trace)?;
                return Err(wrap(e));
            }
        };
        memory.update(&outcome.sample_metrics, alpha)?;
        identified = identify(&memory.values, config.threshold)?;
        probabilities = sampling_probabilities(&memory.values, tau);
        let worst = worst_fold(&outcome.fold_metrics)?;
        trace.push(FastRunRecord {
            run,
            split_seed,
            worst_fold: worst,
            worst_metric: outcome.fold_metrics[worst].as_f64(),
            fold_metrics: outcome.fold_metrics.iter().map(|v| v.as_f64()).collect(),
            dropped: drops.len(),
            identified: identified.len(),
            fit_warnings: outcome.warnings.iter().map(|w| w.0).collect(),
        });
        if control.progress && (memory.updates % 50 == 0 || memory.updates == config.n_runs) {
            eprintln!(
                "fastrecov: {}/{} runs, {} identified, worst-fold metric {:.4}",
                memory.updates,
                config.n_runs,
                identified.len(),
                outcome.fold_metrics[worst].as_f64()
            );
        }
        save(&memory, &trace)?;
    }
    Ok(FastRecovOutcome {
        memory,
        detected: identified,
        trace,
    })
}
