//! Harrell's concordance index and its per-sample restriction.
//!
//! A pair (i, j) is comparable when `t_i < t_j` and sample i had an event.
//! It is concordant when the earlier-event sample has the strictly higher
//! risk; equal risks count one half.

use crate::error::{Error, Result};
use crate::scalar::Real;

fn check_lengths<T>(risks: &[T], times: &[T], events: &[bool]) -> Result<()> {
    if times.len() != risks.len() {
        return Err(Error::LengthMismatch {
            expected: risks.len(),
            found: times.len(),
        });
    }
    if events.len() != risks.len() {
        return Err(Error::LengthMismatch {
            expected: risks.len(),
            found: events.len(),
        });
    }
    Ok(())
}

/// Credit of the ordered pair where `early` has the earlier event time.
#[inline]
fn credit<T: Real>(risk_early: T, risk_late: T) -> T {
    if risk_early > risk_late {
        T::one()
    } else if risk_early == risk_late {
        T::lit(0.5)
    } else {
        T::zero()
    }
}

pub fn concordance_index<T: Real>(risks: &[T], times: &[T], events: &[bool]) -> Result<T> {
    check_lengths(risks, times, events)?;
    let n = risks.len();
    let mut score = T::zero();
    let mut pairs = 0usize;
    for i in 0..n {
        if !events[i] {
            continue;
        }
        for j in 0..n {
            if times[i] < times[j] {
                pairs += 1;
                score += credit(risks[i], risks[j]);
            }
        }
    }
    if pairs == 0 {
        return Err(Error::NoComparablePairs);
    }
    Ok(score / T::from_count(pairs))
}

/// Concordance over the comparable pairs that involve `sample`.
pub fn sample_concordance<T: Real>(sample: usize, risks: &[T], times: &[T], events: &[bool]) -> Result<T> {
    check_lengths(risks, times, events)?;
    if sample >= risks.len() {
        return Err(Error::invalid(format!("sample index {sample} out of range")));
    }
    let (score, pairs) = sample_pairs(sample, risks, times, events);
    if pairs == 0 {
        Err(Error::NoComparablePairs)
    } else {
        Ok(score / T::from_count(pairs))
    }
}

fn sample_pairs<T: Real>(s: usize, risks: &[T], times: &[T], events: &[bool]) -> (T, usize) {
    let mut score = T::zero();
    let mut pairs = 0usize;
    for j in 0..risks.len() {
        if j == s {
            continue;
        }
        if events[s] && times[s] < times[j] {
            pairs += 1;
            score += credit(risks[s], risks[j]);
        } else if events[j] && times[j] < times[s] {
            pairs += 1;
            score += credit(risks[j], risks[s]);
        }
    }
    (score, pairs)
}

/// Per-sample concordance for every sample; `None` where a sample has no
/// comparable partner.
pub fn sample_concordances<T: Real>(risks: &[T], times: &[T], events: &[bool]) -> Result<Vec<Option<T>>> {
    check_lengths(risks, times, events)?;
    let n = risks.len();
    let mut score = vec![T::zero(); n];
    let mut pairs = vec![0usize; n];
    for i in 0..n {
        if !events[i] {
            continue;
        }
        for j in 0..n {
            if times[i] < times[j] {
                let c = credit(risks[i], risks[j]);
                score[i] += c;
                score[j] += c;
                pairs[i] += 1;
                pairs[j] += 1;
            }
        }
    }
    Ok(score
        .into_iter()
        .zip(pairs)
        .map(|(s, p)| (p > 0).then(|| s / T::from_count(p)))
        .collect())
}

/// Number of comparable pairs each sample takes part in.
pub fn comparable_pair_counts<T: Real>(times: &[T], events: &[bool]) -> Vec<usize> {
    let n = times.len();
    let mut pairs = vec![0usize; n];
    for i in 0..n {
        if !events[i] {
            continue;
        }
        for j in 0..n {
            if times[i] < times[j] {
                pairs[i] += 1;
                pairs[j] += 1;
            }
        }
    }
    pairs
}
