//! Class-conditional label noise for benchmarking, with ground-truth masks.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Labels, MaskSource, NoiseMask};
use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::scalar::{round_half_even, Real};

/// Mislabeling process. `Transition` rows are indexed by the true class:
/// `matrix[j][i] = p(observed = i + 1 | true = j + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Flip with probability `eps` to a uniformly chosen other class.
    Uniform { eps: f64 },
    Transition { matrix: Vec<Vec<f64>> },
}

impl NoiseModel {
    pub fn validate(&self, n_classes: usize) -> Result<()> {
        match self {
            NoiseModel::Uniform { eps } => {
                if !(0.0..0.5).contains(eps) {
                    return Err(Error::invalid(format!("noise ratio {eps} outside [0, 0.5)")));
                }
            }
            NoiseModel::Transition { matrix } => {
                if matrix.len() != n_classes || matrix.iter().any(|r| r.len() != n_classes) {
                    return Err(Error::invalid(format!("transition matrix must be {n_classes}x{n_classes}")));
                }
                for (j, row) in matrix.iter().enumerate() {
                    let s: f64 = row.iter().sum();
                    if (s - 1.0).abs() > 1e-12 || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                        return Err(Error::invalid(format!("transition row {} is not a distribution", j + 1)));
                    }
                    if row[j] < 0.5 {
                        return Err(Error::invalid(format!("transition row {} keeps its label with probability below 0.5", j + 1)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Probability that a sample of `class` (0-based) is flipped.
    fn flip_probability(&self, class: usize) -> f64 {
        match self {
            NoiseModel::Uniform { eps } => *eps,
            NoiseModel::Transition { matrix } => 1.0 - matrix[class][class],
        }
    }

    /// Draws a replacement label (0-based) different from `class`.
    fn draw_other<R: Rng>(&self, class: usize, m: usize, rng: &mut R) -> usize {
        match self {
            NoiseModel::Uniform { .. } => {
                let c = rng.random_range(0..m - 1);
                if c >= class {
                    c + 1
                } else {
                    c
                }
            }
            NoiseModel::Transition { matrix } => {
                let row = &matrix[class];
                let off: f64 = 1.0 - row[class];
                let mut u = rng.random::<f64>() * off;
                let mut last = None;
                for (i, &p) in row.iter().enumerate() {
                    if i == class || p <= 0.0 {
                        continue;
                    }
                    last = Some(i);
                    if u < p {
                        return i;
                    }
                    u -= p;
                }
                last.expect("row has off-diagonal mass")
            }
        }
    }
}

/// Number of flips for `n` samples at rate `eps` under exact counting.
fn exact_flips(n: usize, eps: f64) -> Result<usize> {
    let target = eps * n as f64;
    if target > 0.0 && target < 1.0 {
        return Err(Error::invalid(format!(
            "noise ratio {eps} on {n} samples asks for fewer than one flip"
        )));
    }
    Ok(round_half_even(target) as usize)
}

/// Returns the noisy dataset and the mask of flipped samples.
///
/// With `exact_count`, the uniform model flips exactly `round(eps·N)` samples
/// chosen uniformly; the transition model flips `round(n_j·(1 - P_jj))`
/// samples of each class `j`. Otherwise each sample flips independently.
pub fn inject_noise<T: Real>(
    data: &Dataset<T>,
    model: &NoiseModel,
    exact_count: bool,
    seed: u64,
) -> Result<(Dataset<T>, NoiseMask)> {
    let Labels::Classification { values, classes } = data.labels() else {
        return Err(Error::WrongTask(format!("label noise needs classification labels, got {}", data.task())));
    };
    let m = classes.len();
    if m < 2 {
        return Err(Error::Degenerate("a single class cannot be mislabeled".into()));
    }
    model.validate(m)?;
    let n = values.len();
    let mut rng = rng_from(seed);
    let mut flip = vec![false; n];
    if exact_count {
        match model {
            NoiseModel::Uniform { eps } => {
                let count = exact_flips(n, *eps)?;
                for i in index::sample(&mut rng, n, count) {
                    flip[i] = true;
                }
            }
            NoiseModel::Transition { .. } => {
                for c in 0..m {
                    let members: Vec<usize> = (0..n).filter(|&i| values[i] as usize - 1 == c).collect();
                    let count = exact_flips(members.len(), model.flip_probability(c))?;
                    for i in index::sample(&mut rng, members.len(), count) {
                        flip[members[i]] = true;
                    }
                }
            }
        }
    } else {
        for (i, f) in flip.iter_mut().enumerate() {
            *f = rng.random::<f64>() < model.flip_probability(values[i] as usize - 1);
        }
    }
    let mut noisy = values.clone();
    for i in 0..n {
        if flip[i] {
            noisy[i] = model.draw_other(values[i] as usize - 1, m, &mut rng) as u32 + 1;
        }
    }
    let out = data.with_labels(Labels::Classification {
        values: noisy,
        classes: classes.clone(),
    })?;
    let mask = NoiseMask::new(data.ids().to_vec(), flip, MaskSource::GroundTruth)?;
    Ok((out, mask))
}

/// Flips the event indicator of exactly `round(eps·N)` uniformly chosen
/// survival samples.
pub fn flip_events<T: Real>(data: &Dataset<T>, eps: f64, seed: u64) -> Result<(Dataset<T>, NoiseMask)> {
    let (times, events) = data.survival()?;
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid(format!("flip ratio {eps} outside [0, 1]")));
    }
    let n = times.len();
    let count = exact_flips(n, eps)?;
    let mut rng = rng_from(seed);
    let mut flip = vec![false; n];
    let mut new_events = events.to_vec();
    for i in index::sample(&mut rng, n, count) {
        flip[i] = true;
        new_events[i] = !new_events[i];
    }
    let out = data.with_labels(Labels::Survival {
        times: times.to_vec(),
        events: new_events,
    })?;
    let mask = NoiseMask::new(data.ids().to_vec(), flip, MaskSource::GroundTruth)?;
    Ok((out, mask))
}
