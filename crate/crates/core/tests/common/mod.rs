//! Brute-force reference implementations shared by the test targets.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use recov::dataset::GradeRange;
use recov::learners::optim::Objective;
use recov::learners::{CoxObjective, LogisticObjective};
use recov::metrics::{concordance_index, quadratic_weighted_kappa, sample_concordance};
use recov::theory::hypergeometric_pmf;

#[derive(Debug, Clone)]
pub struct OracleCheck {
    pub name: &'static str,
    pub instances: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Outcome of the unordered pair {i, j}: `None` if not comparable, else the
/// concordance credit (1, 0.5 or 0).
fn pair_credit(i: usize, j: usize, risks: &[f64], times: &[f64], events: &[bool]) -> Option<f64> {
    let (early, late) = if times[i] < times[j] {
        (i, j)
    } else if times[j] < times[i] {
        (j, i)
    } else {
        return None;
    };
    if !events[early] {
        return None;
    }
    Some(match risks[early].partial_cmp(&risks[late]).unwrap() {
        std::cmp::Ordering::Greater => 1.0,
        std::cmp::Ordering::Equal => 0.5,
        std::cmp::Ordering::Less => 0.0,
    })
}

struct SurvivalCase {
    risks: Vec<f64>,
    times: Vec<f64>,
    events: Vec<bool>,
}

fn survival_case(r: &mut ChaCha8Rng) -> SurvivalCase {
    let n = r.random_range(2..=12);
    // Small integer grids so tied times and tied risks both occur.
    SurvivalCase {
        risks: (0..n).map(|_| r.random_range(0..5) as f64 * 0.5).collect(),
        times: (0..n).map(|_| r.random_range(1..=6) as f64).collect(),
        events: (0..n).map(|_| r.random_bool(0.6)).collect(),
    }
}

pub fn c_index_oracle(instances: usize, seed: u64) -> OracleCheck {
    let mut r = rng(seed);
    let mut max_error: f64 = 0.0;
    for _ in 0..instances {
        let c = survival_case(&mut r);
        let n = c.risks.len();
        let credits: Vec<f64> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter_map(|(i, j)| pair_credit(i, j, &c.risks, &c.times, &c.events))
            .collect();
        let got = concordance_index(&c.risks, &c.times, &c.events);
        match (credits.is_empty(), got) {
            (true, Err(_)) => {}
            (false, Ok(v)) => {
                let want = credits.iter().sum::<f64>() / credits.len() as f64;
                max_error = max_error.max((v - want).abs());
            }
            _ => max_error = f64::INFINITY,
        }
    }
    OracleCheck {
        name: "c-index",
        instances,
        max_error,
        tolerance: 1e-9,
    }
}

pub fn sample_concordance_oracle(instances: usize, seed: u64) -> OracleCheck {
    let mut r = rng(seed);
    let mut max_error: f64 = 0.0;
    for _ in 0..instances {
        let c = survival_case(&mut r);
        let n = c.risks.len();
        let s = r.random_range(0..n);
        let credits: Vec<f64> = (0..n)
            .filter(|&j| j != s)
            .filter_map(|j| pair_credit(s, j, &c.risks, &c.times, &c.events))
            .collect();
        match (credits.is_empty(), sample_concordance(s, &c.risks, &c.times, &c.events)) {
            (true, Err(_)) => {}
            (false, Ok(v)) => {
                let want = credits.iter().sum::<f64>() / credits.len() as f64;
                max_error = max_error.max((v - want).abs());
            }
            _ => max_error = f64::INFINITY,
        }
    }
    OracleCheck {
        name: "sample concordance",
        instances,
        max_error,
        tolerance: 1e-9,
    }
}

/// QWK as one minus the ratio of mean squared grade error on matched pairs
/// to the mean over all (prediction, truth) cross pairs.
pub fn qwk_oracle(instances: usize, seed: u64) -> OracleCheck {
    let mut r = rng(seed);
    let mut max_error: f64 = 0.0;
    let mut checked = 0;
    while checked < instances {
        let lo = r.random_range(-2..=1);
        let hi = lo + r.random_range(1..=5);
        let range = GradeRange::new(lo, hi).unwrap();
        let n = r.random_range(2..=12);
        let pred: Vec<i64> = (0..n).map(|_| r.random_range(lo..=hi)).collect();
        let truth: Vec<i64> = (0..n).map(|_| r.random_range(lo..=hi)).collect();
        let sq = |a: i64, b: i64| ((a - b) * (a - b)) as f64;
        let matched: f64 = pred.iter().zip(&truth).map(|(&p, &t)| sq(p, t)).sum::<f64>() / n as f64;
        let cross: f64 = pred.iter().flat_map(|&p| truth.iter().map(move |&t| sq(p, t))).sum::<f64>() / (n * n) as f64;
        if cross == 0.0 {
            continue;
        }
        checked += 1;
        let want = 1.0 - matched / cross;
        match quadratic_weighted_kappa::<f64>(&pred, &truth, range) {
            Ok(v) => max_error = max_error.max((v - want).abs()),
            Err(_) => max_error = f64::INFINITY,
        }
    }
    OracleCheck {
        name: "quadratic weighted kappa",
        instances,
        max_error,
        tolerance: 1e-9,
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Hypergeometric probabilities by enumerating every draw of `n` items out
/// of `N` as a bitmask, the first `K` items being successes.
pub fn hypergeometric_oracle(instances: usize, seed: u64) -> OracleCheck {
    let mut r = rng(seed);
    let mut max_error: f64 = 0.0;
    for _ in 0..instances {
        let big_n: u32 = r.random_range(1..=12);
        let k: u32 = r.random_range(0..=big_n);
        let n: u32 = r.random_range(0..=big_n);
        let x: u32 = r.random_range(0..=n);
        let successes: u32 = (1u32 << k) - 1;
        let (mut hits, mut draws) = (0u64, 0u64);
        for mask in 0u32..(1 << big_n) {
            if mask.count_ones() == n {
                draws += 1;
                if (mask & successes).count_ones() == x {
                    hits += 1;
                }
            }
        }
        let want = hits as f64 / draws as f64;
        debug_assert_eq!(draws as f64, binomial(big_n as u64, n as u64));
        match hypergeometric_pmf(big_n as u64, k as u64, n as u64, x as u64) {
            Ok(v) => max_error = max_error.max((v - want).abs()),
            Err(_) => max_error = f64::INFINITY,
        }
    }
    OracleCheck {
        name: "hypergeometric pmf",
        instances,
        max_error,
        tolerance: 1e-9,
    }
}

/// `‖g - g_fd‖∞ / max(‖g‖∞, 1)`, with central differences of step 1e-5.
fn gradient_error<O: Objective<f64>>(obj: &O, x: &[f64]) -> f64 {
    let d = obj.dim();
    let mut g = vec![0.0; d];
    obj.value_gradient(x, &mut g);
    let h = 1e-5;
    let mut err: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for j in 0..d {
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[j] += h;
        xm[j] -= h;
        let fd = (obj.value(&xp) - obj.value(&xm)) / (2.0 * h);
        err = err.max((fd - g[j]).abs());
        scale = scale.max(g[j].abs());
    }
    err / scale
}

pub fn logistic_gradient_oracle(instances: usize, seed: u64) -> OracleCheck {
    let mut r = rng(seed);
    let mut max_error: f64 = 0.0;
    for _ in 0..instances {
        let n = r.random_range(3..=30);
        let d = r.random_range(1..=5);
        let m = r.random_range(2..=4);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| if r.random_bool(0.3) { 0.0 } else { r.random_range(-2.0..2.0) })
                    .collect()
            })
            .collect();
        let labels: Vec<u32> = (0..n).map(|_| r.random_range(1..=m as u32)).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|v| v.as_slice()).collect();
        let l2 = r.random_range(0.0..0.5);
        let obj = LogisticObjective::new(&refs, &labels, m, l2).unwrap();
        let x: Vec<f64> = (0..obj.dim()).map(|_| r.random_range(-1.5..1.5)).collect();
        max_error = max_error.max(gradient_error(&obj, &x));
    }
    OracleCheck {
        name: "logistic gradient",
        instances,
        max_error,
        tolerance: 1e-5,
    }
}

pub fn cox_gradient_oracle(instances: usize, seed: u64) -> OracleCheck {
    let mut r = rng(seed);
    let mut max_error: f64 = 0.0;
    for _ in 0..instances {
        let n = r.random_range(3..=30);
        let d = r.random_range(1..=5);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
        // Integer times give tied event groups.
        let times: Vec<f64> = (0..n).map(|_| r.random_range(1..=8) as f64).collect();
        let mut events: Vec<bool> = (0..n).map(|_| r.random_bool(0.7)).collect();
        events[0] = true;
        let refs: Vec<&[f64]> = rows.iter().map(|v| v.as_slice()).collect();
        let l2 = r.random_range(0.0..0.5);
        let obj = CoxObjective::new(refs, &times, &events, l2).unwrap();
        let x: Vec<f64> = (0..obj.dim()).map(|_| r.random_range(-1.0..1.0)).collect();
        max_error = max_error.max(gradient_error(&obj, &x));
    }
    OracleCheck {
        name: "Cox gradient",
        instances,
        max_error,
        tolerance: 1e-5,
    }
}

pub fn all_oracles(seed: u64) -> Vec<OracleCheck> {
    vec![
        c_index_oracle(1000, seed),
        qwk_oracle(1000, seed + 1),
        sample_concordance_oracle(1000, seed + 2),
        hypergeometric_oracle(1000, seed + 3),
        logistic_gradient_oracle(100, seed + 4),
        cox_gradient_oracle(100, seed + 5),
    ]
}
