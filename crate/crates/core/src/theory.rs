//! Occurrence model of repeated cross-validation under random splits.
//!
//! With `K = round(εN)` noisy samples spread uniformly over `k` folds, the
//! fold holding the most noisy samples contains each noisy sample with
//! probability `q_noisy = E(n_most)/K` and each clean one with
//! `q_clean = (N/k - E(n_most))/(N - K)`. Over `R` runs a sample's
//! occurrence count is modeled as `Binomial(R, q)`.

use rand_distr::{Distribution, Hypergeometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::uniform_split;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};
use crate::scalar::round_half_even;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln n! - [(n + ½) ln n - n + ln √(2π)]`, the Stirling remainder.
fn stirling_error(n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let x = n as f64;
    if n <= 15 {
        let ln_fact: f64 = (2..=n).map(|i| i as f64).product::<f64>().ln();
        return ln_fact - ((x + 0.5) * x.ln() - x + LN_SQRT_2PI);
    }
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let xx = x * x;
    (S0 - (S1 - (S2 - (S3 - S4 / xx) / xx) / xx) / xx) / x
}

/// Deviance term `x ln(x/m) + m - x`, evaluated without cancellation when
/// `x` is close to `m`.
fn deviance(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                return next;
            }
            s = next;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// Binomial PMF in saddle-point form, accurate to a few ulps in relative
/// terms even for large `n`.
fn binomial_raw(x: u64, n: u64, p: f64, q: f64) -> f64 {
    if p == 0.0 {
        return if x == 0 { 1.0 } else { 0.0 };
    }
    if q == 0.0 {
        return if x == n { 1.0 } else { 0.0 };
    }
    if x > n {
        return 0.0;
    }
    let nf = n as f64;
    if x == 0 {
        if n == 0 {
            return 1.0;
        }
        let lc = if p < 0.1 { -deviance(nf, nf * q) - nf * p } else { nf * q.ln() };
        return lc.exp();
    }
    if x == n {
        let lc = if q < 0.1 { -deviance(nf, nf * p) - nf * q } else { nf * p.ln() };
        return lc.exp();
    }
    let xf = x as f64;
    let lc = stirling_error(n) - stirling_error(x) - stirling_error(n - x) - deviance(xf, nf * p) - deviance(nf - xf, nf * q);
    let lf = std::f64::consts::TAU.ln() + xf.ln() + (-xf / nf).ln_1p();
    (lc - 0.5 * lf).exp()
}

/// `P(X = x)` for `X ~ Hypergeometric(N, K, n)`: `x` successes in `n` draws
/// without replacement from `N` items of which `K` are successes.
pub fn hypergeometric_pmf(population: u64, successes: u64, draws: u64, x: u64) -> Result<f64> {
    if successes > population || draws > population {
        return Err(Error::invalid(format!(
            "hypergeometric parameters N={population}, K={successes}, n={draws} out of domain"
        )));
    }
    if x > successes || x > draws || draws - x > population - successes {
        return Ok(0.0);
    }
    if draws == 0 || draws == population {
        return Ok(1.0);
    }
    // Ratio of binomials at p = n/N, where the normalizer is well conditioned.
    let p = draws as f64 / population as f64;
    let q = (population - draws) as f64 / population as f64;
    let a = binomial_raw(x, successes, p, q);
    let b = binomial_raw(draws - x, population - successes, p, q);
    let c = binomial_raw(draws, population, p, q);
    Ok(a * b / c)
}

/// `P(X = x)` for `X ~ Binomial(n, p)`.
pub fn binomial_pmf(n: u64, p: f64, x: u64) -> f64 {
    binomial_raw(x, n, p.clamp(0.0, 1.0), 1.0 - p.clamp(0.0, 1.0))
}

/// Smallest interval `[lo, hi]` of a `Binomial(n, p)` holding at least
/// `coverage` mass, trimmed equally from both tails.
pub fn binomial_envelope(n: u64, p: f64, coverage: f64) -> (u64, u64) {
    let tail = (1.0 - coverage) / 2.0;
    let mut acc = 0.0;
    let mut lo = 0;
    while lo < n {
        let next = acc + binomial_pmf(n, p, lo);
        if next > tail {
            break;
        }
        acc = next;
        lo += 1;
    }
    let mut acc = 0.0;
    let mut hi = n;
    while hi > lo {
        let next = acc + binomial_pmf(n, p, hi);
        if next > tail {
            break;
        }
        acc = next;
        hi -= 1;
    }
    (lo, hi)
}

/// Number of noisy samples at ratio `eps`, as in exact-count noise injection.
pub fn noisy_count(n: usize, eps: f64) -> usize {
    round_half_even(eps * n as f64) as usize
}

fn check_domain(n: usize, eps: f64, k: usize) -> Result<usize> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::invalid(format!("noise ratio {eps} outside (0, 0.5)")));
    }
    if k < 1 || k > n {
        return Err(Error::invalid(format!("k = {k} invalid for N = {n}")));
    }
    let noisy = noisy_count(n, eps);
    if noisy < 1 {
        return Err(Error::invalid(format!("noise ratio {eps} on {n} samples gives no noisy sample")));
    }
    Ok(noisy)
}

/// Fold sizes of a near-equal chunking: the first `n mod k` folds get one extra.
pub fn fold_sizes(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|f| n / k + usize::from(f < n % k)).collect()
}

const BATCH: usize = 4096;

/// Monte Carlo estimate of the expected largest per-fold noisy count, with its
/// standard error. Each trial allocates the noisy samples to folds by
/// sequential hypergeometric draws (an exact multivariate hypergeometric
/// allocation).
pub fn expected_most_noisy(n: usize, eps: f64, k: usize, trials: usize, seed: u64) -> Result<(f64, f64)> {
    let noisy = check_domain(n, eps, k)?;
    if trials < 1 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if k == 1 {
        return Ok((noisy as f64, 0.0));
    }
    let sizes = fold_sizes(n, k);
    let batches = trials.div_ceil(BATCH);
    let (sum, sum_sq) = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_from(derive_seed(seed, b as u64));
            let count = BATCH.min(trials - b * BATCH);
            let (mut s, mut s2) = (0u64, 0u64);
            for _ in 0..count {
                let m = most_noisy_allocation(&sizes, n, noisy, &mut rng).1;
                s += m;
                s2 += m * m;
            }
            (s, s2)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let t = trials as f64;
    let mean = sum as f64 / t;
    let var = if trials > 1 {
        ((sum_sq as f64 - t * mean * mean) / (t - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok((mean, (var / t).sqrt()))
}

/// One allocation of `noisy` markers over folds of the given sizes; returns
/// the (lowest) fold index with the largest count and that count.
fn most_noisy_allocation<R: rand::Rng>(sizes: &[usize], n: usize, noisy: usize, rng: &mut R) -> (usize, u64) {
    let (mut pop, mut left) = (n as u64, noisy as u64);
    let (mut best, mut best_count) = (0, 0);
    for (f, &s) in sizes.iter().enumerate() {
        let x = if left == 0 || s == 0 {
            0
        } else if s as u64 == pop {
            left
        } else {
            Hypergeometric::new(pop, left, s as u64).expect("valid parameters").sample(rng)
        };
        if x > best_count {
            best = f;
            best_count = x;
        }
        pop -= s as u64;
        left -= x;
    }
    (best, best_count)
}

/// Mode of `Hypergeometric(N, K, n)`: the location of the PMF maximum.
pub fn hypergeometric_mode(population: u64, successes: u64, draws: u64) -> u64 {
    ((draws + 1) as u128 * (successes + 1) as u128 / (population + 2) as u128) as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccurrenceModel {
    pub n: usize,
    pub eps: f64,
    pub k: usize,
    pub n_noisy: usize,
    pub n_fold: f64,
    pub e_mean: f64,
    pub e_most: f64,
    pub e_most_se: f64,
    /// PMF-maximum reading of `E(n_most)`, reported for comparison only.
    pub e_most_mode: f64,
    pub e_diff: f64,
    /// `E(n_most) / n_fold` and its complement.
    pub p_noisy: f64,
    pub p_clean: f64,
    pub trials: usize,
    pub seed: u64,
}

impl OccurrenceModel {
    /// Per-run probability that a noisy sample lands in the most-noisy fold.
    pub fn q_noisy(&self) -> f64 {
        self.e_most / self.n_noisy as f64
    }

    /// Same for a clean sample.
    pub fn q_clean(&self) -> f64 {
        (self.n_fold - self.e_most) / (self.n - self.n_noisy) as f64
    }
}

pub fn build_occurrence_model(n: usize, eps: f64, k: usize, trials: usize, seed: u64) -> Result<OccurrenceModel> {
    let noisy = check_domain(n, eps, k)?;
    let (e_most, e_most_se) = expected_most_noisy(n, eps, k, trials, seed)?;
    let n_fold = n as f64 / k as f64;
    let mode_draws = round_half_even(n_fold) as u64;
    Ok(OccurrenceModel {
        n,
        eps,
        k,
        n_noisy: noisy,
        n_fold,
        e_mean: eps * n as f64 / k as f64,
        e_most,
        e_most_se,
        e_most_mode: hypergeometric_mode(n as u64, noisy as u64, mode_draws) as f64,
        e_diff: e_most - eps * n as f64 / k as f64,
        p_noisy: e_most / n_fold,
        p_clean: 1.0 - e_most / n_fold,
        trials,
        seed,
    })
}

/// Separation target: means at least `c·(σ_noisy + σ_clean)` apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapTarget {
    pub sigmas: f64,
}

impl OverlapTarget {
    pub const TWO_SIGMA: Self = Self { sigmas: 2.0 };
    pub const THREE_SIGMA: Self = Self { sigmas: 3.0 };

    /// Overlap of two equal-width normals separated this far: `2Φ(-c)`.
    pub fn nominal_overlap(self) -> f64 {
        erfc(self.sigmas / std::f64::consts::SQRT_2)
    }
}

impl std::str::FromStr for OverlapTarget {
    type Err = Error;

    /// `2sigma`, `3sigma` or a positive number of sigmas.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let num = t.strip_suffix("sigma").unwrap_or(&t);
        match num.parse::<f64>() {
            Ok(c) if c > 0.0 && c.is_finite() => Ok(Self { sigmas: c }),
            _ => Err(Error::invalid(format!("overlap target `{s}`; expected e.g. 2sigma, 3sigma or 2.5"))),
        }
    }
}

/// Complementary error function (Numerical Recipes' Chebyshev fit,
/// relative error below 1.2e-7).
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98 + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77))))))));
    let r = t * poly.exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccurrencePlan {
    pub q_noisy: f64,
    pub q_clean: f64,
    pub target: OverlapTarget,
    pub nominal_overlap: f64,
    pub n_runs: usize,
    /// Counts strictly above this are called noisy.
    pub threshold: f64,
    /// The binomial PMFs did not cross between the means; midpoint used.
    pub midpoint_fallback: bool,
}

fn separated(r: usize, qn: f64, qc: f64, c: f64) -> bool {
    let rf = r as f64;
    let gap = rf * (qn - qc);
    let spread = (rf * qn * (1.0 - qn)).sqrt() + (rf * qc * (1.0 - qc)).sqrt();
    gap >= c * spread
}

/// Count where `Binomial(R, q_noisy)` and `Binomial(R, q_clean)` have equal
/// mass, or the midpoint of their means if that point is not between them.
pub fn separation_threshold(n_runs: usize, q_noisy: f64, q_clean: f64) -> (f64, bool) {
    let r = n_runs as f64;
    let a = (q_noisy / q_clean).ln();
    let b = ((1.0 - q_clean) / (1.0 - q_noisy)).ln();
    let x = r * b / (a + b);
    let (lo, hi) = (r * q_clean, r * q_noisy);
    if x.is_finite() && x > lo && x < hi {
        (x, false)
    } else {
        ((lo + hi) / 2.0, true)
    }
}

/// Smallest run count whose binomial occurrence distributions are separated
/// by the target, with the count threshold at that run count.
pub fn plan_runs(model: &OccurrenceModel, target: OverlapTarget) -> Result<OccurrencePlan> {
    let (qn, qc) = (model.q_noisy(), model.q_clean());
    plan_for_probabilities(qn, qc, target)
}

pub fn plan_for_probabilities(q_noisy: f64, q_clean: f64, target: OverlapTarget) -> Result<OccurrencePlan> {
    let (qn, qc) = (q_noisy, q_clean);
    if !(qn > qc) || !(qc > 0.0) || !(qn < 1.0) {
        return Err(Error::Degenerate(format!(
            "q_noisy = {qn} does not exceed q_clean = {qc}; noise is undetectable with these settings"
        )));
    }
    let c = target.sigmas;
    let sn = (qn * (1.0 - qn)).sqrt();
    let sc = (qc * (1.0 - qc)).sqrt();
    let estimate = (c * (sn + sc) / (qn - qc)).powi(2).ceil().max(1.0);
    if estimate > 1e12 {
        return Err(Error::Degenerate(format!("separation needs about {estimate:e} runs")));
    }
    let mut r = estimate as usize;
    while r > 1 && separated(r - 1, qn, qc, c) {
        r -= 1;
    }
    while !separated(r, qn, qc, c) {
        r += 1;
    }
    let (threshold, midpoint_fallback) = separation_threshold(r, qn, qc);
    Ok(OccurrencePlan {
        q_noisy: qn,
        q_clean: qc,
        target,
        nominal_overlap: target.nominal_overlap(),
        n_runs: r,
        threshold,
        midpoint_fallback,
    })
}

/// `plan` moved to a fixed run count: same probabilities, threshold at
/// `n_runs`. The target is kept for reference even if `n_runs` misses it.
pub fn plan_at_runs(plan: &OccurrencePlan, n_runs: usize) -> Result<OccurrencePlan> {
    if n_runs < 1 {
        return Err(Error::invalid("runs must be at least 1"));
    }
    let (threshold, midpoint_fallback) = separation_threshold(n_runs, plan.q_noisy, plan.q_clean);
    Ok(OccurrencePlan {
        n_runs,
        threshold,
        midpoint_fallback,
        ..plan.clone()
    })
}

/// Per-sample occurrence counts from simulated random splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedOccurrences {
    pub n: usize,
    pub k: usize,
    pub runs: usize,
    pub seed: u64,
    pub counts: Vec<u32>,
    /// The first `n_noisy` samples carry the noisy markers.
    pub noisy: Vec<bool>,
}

const SIM_CHUNK: usize = 64;

/// Repeats `runs` uniform k-fold splits of `N` samples, `round(εN)` of them
/// marked noisy, and counts how often each sample lands in the fold with the
/// most noisy markers (ties to the lowest fold index).
pub fn simulate_occurrences(n: usize, eps: f64, k: usize, runs: usize, seed: u64) -> Result<SimulatedOccurrences> {
    let noisy = check_domain(n, eps, k)?;
    if k < 2 {
        return Err(Error::invalid("simulation needs at least 2 folds"));
    }
    let chunks = runs.div_ceil(SIM_CHUNK);
    let partial: Vec<Result<Vec<u32>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![0u32; n];
            for run in c * SIM_CHUNK..((c + 1) * SIM_CHUNK).min(runs) {
                let split = uniform_split(n, k, derive_seed(seed, run as u64))?;
                let mut best = 0;
                let mut best_count = 0;
                for (f, rows) in split.folds.iter().enumerate() {
                    let x = rows.iter().filter(|&&r| r < noisy).count();
                    if x > best_count {
                        best = f;
                        best_count = x;
                    }
                }
                for &r in &split.folds[best] {
                    counts[r] += 1;
                }
            }
            Ok(counts)
        })
        .collect();
    let mut counts = vec![0u32; n];
    for p in partial {
        for (c, v) in counts.iter_mut().zip(p?) {
            *c += v;
        }
    }
    Ok(SimulatedOccurrences {
        n,
        k,
        runs,
        seed,
        counts,
        noisy: (0..n).map(|i| i < noisy).collect(),
    })
}

/// Normalized clean and noisy occurrence histograms on a shared bin grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccurrenceHistograms {
    pub bin_width: u32,
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
}

/// Bin width used for comparing occurrence histograms: half the clean
/// binomial standard deviation, rounded up.
pub fn default_bin_width(runs: usize, q_clean: f64) -> u32 {
    ((runs as f64 * q_clean * (1.0 - q_clean)).sqrt() / 2.0).ceil().max(1.0) as u32
}

fn normalized(counts: impl Iterator<Item = u32>, width: u32, bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    let mut total = 0.0;
    for c in counts {
        h[(c / width) as usize] += 1.0;
        total += 1.0;
    }
    if total > 0.0 {
        h.iter_mut().for_each(|v| *v /= total);
    }
    h
}

impl OccurrenceHistograms {
    /// `max_count` fixes the grid so histograms from different sources align.
    pub fn new(counts: &[u32], noisy: &[bool], bin_width: u32, max_count: u32) -> Result<Self> {
        if counts.len() != noisy.len() {
            return Err(Error::LengthMismatch {
                expected: counts.len(),
                found: noisy.len(),
            });
        }
        if bin_width == 0 {
            return Err(Error::invalid("bin width must be positive"));
        }
        let top = counts.iter().copied().max().unwrap_or(0).max(max_count);
        let bins = (top / bin_width) as usize + 1;
        let pick = |want: bool| counts.iter().zip(noisy).filter(move |(_, &f)| f == want).map(|(&c, _)| c);
        Ok(Self {
            bin_width,
            clean: normalized(pick(false), bin_width, bins),
            noisy: normalized(pick(true), bin_width, bins),
        })
    }

    /// Shared mass of the clean and noisy histograms, `Σ min(p, q)`.
    pub fn overlap(&self) -> f64 {
        self.clean.iter().zip(&self.noisy).map(|(a, b)| a.min(*b)).sum()
    }
}

/// `½ Σ |p - q|` over a common grid (shorter input padded with zeros).
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    (0..n)
        .map(|i| (p.get(i).copied().unwrap_or(0.0) - q.get(i).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
        / 2.0
}
