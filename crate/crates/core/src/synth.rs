//! Seeded synthetic datasets with known structure.

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::dataset::{one_hot, Dataset, EncodeOptions, Labels, RawTable};
use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::scalar::Real;

/// Two isotropic unit-variance Gaussians centred at `-offset·1` (class 1) and
/// `+offset·1` (class 2), with exactly `⌈n/2⌉` samples of class 1 in random
/// order. The Bayes boundary is the hyperplane `Σx = 0`.
pub fn gaussian_blobs<T: Real>(n: usize, d: usize, offset: f64, seed: u64) -> Result<Dataset<T>> {
    if n < 2 || d == 0 {
        return Err(Error::invalid("blobs need at least 2 samples and 1 feature"));
    }
    let mut rng = rng_from(seed);
    let mut labels: Vec<u32> = (0..n).map(|i| 1 + (i % 2) as u32).collect();
    labels.shuffle(&mut rng);
    let mut features = Vec::with_capacity(n * d);
    for &y in &labels {
        let centre = if y == 1 { -offset } else { offset };
        for _ in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            features.push(T::lit(centre + z));
        }
    }
    Dataset::with_row_ids(
        "blobs",
        d,
        features,
        Labels::Classification {
            values: labels,
            classes: vec!["1".into(), "2".into()],
        },
    )
}

/// Proportional-hazards data with standard normal covariates, unit baseline
/// hazard and risk `exp(x·β)`. Censoring times are exponential with rate
/// `censoring_rate`; time and event are the minimum and its indicator.
pub fn linear_hazard_survival<T: Real>(n: usize, coefficients: &[f64], censoring_rate: f64, seed: u64) -> Result<Dataset<T>> {
    let d = coefficients.len();
    if n < 2 || d == 0 {
        return Err(Error::invalid("survival data need at least 2 samples and 1 covariate"));
    }
    if !(censoring_rate >= 0.0 && censoring_rate.is_finite()) {
        return Err(Error::invalid("censoring rate must be finite and non-negative"));
    }
    let mut rng = rng_from(seed);
    let mut features = Vec::with_capacity(n * d);
    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for _ in 0..n {
        let mut eta = 0.0;
        for &b in coefficients {
            let z: f64 = StandardNormal.sample(&mut rng);
            eta += b * z;
            features.push(T::lit(z));
        }
        let e: f64 = Exp1.sample(&mut rng);
        let t_event = e / eta.exp();
        let c: f64 = Exp1.sample(&mut rng);
        let t_censor = if censoring_rate > 0.0 { c / censoring_rate } else { f64::INFINITY };
        // Keep times strictly positive after rounding to T.
        times.push(T::lit(t_event.min(t_censor).max(1e-12)));
        events.push(t_event <= t_censor);
    }
    Dataset::with_row_ids("linear-hazard", d, features, Labels::Survival { times, events })
}

/// Attribute names and category codes shaped like the 22 attributes of the
/// agaricus-lepiota mushroom records (117 categories in total).
pub const MUSHROOM_ATTRIBUTES: [(&str, &str); 22] = [
    ("cap-shape", "bcfksx"),
    ("cap-surface", "fgsy"),
    ("cap-color", "bceginprwy"),
    ("bruises", "ft"),
    ("odor", "acflmnpsy"),
    ("gill-attachment", "af"),
    ("gill-spacing", "cw"),
    ("gill-size", "bn"),
    ("gill-color", "beghknopruwy"),
    ("stalk-shape", "et"),
    ("stalk-root", "?bcer"),
    ("stalk-surface-above-ring", "fksy"),
    ("stalk-surface-below-ring", "fksy"),
    ("stalk-color-above-ring", "bcegnopwy"),
    ("stalk-color-below-ring", "bcegnopwy"),
    ("veil-type", "p"),
    ("veil-color", "nowy"),
    ("ring-number", "not"),
    ("ring-type", "eflnp"),
    ("spore-print-color", "bhknoruwy"),
    ("population", "acnsvy"),
    ("habitat", "dglmpuw"),
];

/// Categorical table shaped like the mushroom records: a `class` column
/// (`e`/`p`, about 52% `e`) and the 22 attributes above.
///
/// Odor drives the class: `a`, `l` are edible only, `c f m p s y` poisonous
/// only, and `n` occurs in both. Within odor `n` the poisonous records, and
/// only those, have spore print `r`. The one-hot encoding is therefore
/// linearly separable. Other attributes follow class-conditional
/// distributions fixed by `seed`.
pub fn mushroom_like_table(n: usize, seed: u64) -> Result<RawTable> {
    let mut rng = rng_from(seed);
    // Class-conditional category weights, one table per attribute and class.
    let weights: Vec<[Vec<f64>; 2]> = MUSHROOM_ATTRIBUTES
        .iter()
        .map(|(_, cats)| {
            let mut w = || (0..cats.len()).map(|_| rng.random_range(0.2..1.0)).collect::<Vec<f64>>();
            [w(), w()]
        })
        .collect();
    let samplers: Vec<[WeightedIndex<f64>; 2]> = weights
        .iter()
        .map(|[a, b]| Ok([WeightedIndex::new(a)?, WeightedIndex::new(b)?]))
        .collect::<std::result::Result<_, rand::distr::weighted::Error>>()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let odor = MUSHROOM_ATTRIBUTES.iter().position(|a| a.0 == "odor").expect("odor");
    let spore = MUSHROOM_ATTRIBUTES.iter().position(|a| a.0 == "spore-print-color").expect("spore");
    // Odor frequencies per class, in "acflmnpsy" order.
    let odor_edible = WeightedIndex::new([400.0, 0.0, 0.0, 400.0, 0.0, 3408.0, 0.0, 0.0, 0.0]).expect("weights");
    let odor_poison = WeightedIndex::new([0.0, 192.0, 2160.0, 0.0, 36.0, 120.0, 256.0, 576.0, 576.0]).expect("weights");
    let spore_cats: Vec<char> = MUSHROOM_ATTRIBUTES[spore].1.chars().collect();
    let not_green: Vec<char> = spore_cats.iter().copied().filter(|&c| c != 'r').collect();

    let mut headers = vec!["class".to_string()];
    headers.extend(MUSHROOM_ATTRIBUTES.iter().map(|a| a.0.to_string()));
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let poisonous = rng.random::<f64>() >= 4208.0 / 8124.0;
        let c = poisonous as usize;
        let mut row = vec![if poisonous { "p" } else { "e" }.to_string()];
        let mut odor_code = ' ';
        for (j, (_, cats)) in MUSHROOM_ATTRIBUTES.iter().enumerate() {
            let cats: Vec<char> = cats.chars().collect();
            let v = if j == odor {
                let i = if poisonous { odor_poison.sample(&mut rng) } else { odor_edible.sample(&mut rng) };
                odor_code = cats[i];
                cats[i]
            } else if j == spore {
                if poisonous && odor_code == 'n' {
                    'r'
                } else {
                    not_green[rng.random_range(0..not_green.len())]
                }
            } else {
                cats[samplers[j][c].sample(&mut rng)]
            };
            row.push(v.to_string());
        }
        rows.push(row);
    }
    Ok(RawTable { headers, rows })
}

/// [`mushroom_like_table`] one-hot encoded into a classification dataset.
/// Categories that never occur in the sample get no dummy column.
pub fn mushroom_like<T: Real>(n: usize, seed: u64) -> Result<Dataset<T>> {
    let table = mushroom_like_table(n, seed)?;
    let (encoded, _) = one_hot(
        &table,
        &EncodeOptions {
            passthrough: vec!["class".into()],
        },
    )?;
    let d = encoded.headers.len() - 1;
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for row in &encoded.rows {
        labels.push(if row[0] == "e" { 1 } else { 2 });
        features.extend(row[1..].iter().map(|v| if v == "1" { T::one() } else { T::zero() }));
    }
    Dataset::new(
        "mushroom-like",
        (0..n).map(|i| i.to_string()).collect(),
        encoded.headers[1..].to_vec(),
        features,
        Labels::Classification {
            values: labels,
            classes: vec!["e".into(), "p".into()],
        },
    )
}
