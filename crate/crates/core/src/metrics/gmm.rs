//! Two-component 1-D Gaussian mixture fitted by EM, used to split memory
//! values (or occurrence counts) into a low and a high population.

use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_ITERATIONS: usize = 500;
const LL_TOLERANCE: f64 = 1e-9;
const VARIANCE_FLOOR: f64 = 1e-12;

/// Fitted mixture; component 0 has the lower mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm1d<T> {
    pub means: [T; 2],
    pub variances: [T; 2],
    pub weights: [T; 2],
    /// Point between the means where both posterior responsibilities are equal.
    pub threshold: T,
    /// Mean log-likelihood after each EM iteration.
    pub log_likelihood: Vec<T>,
    /// A variance hit the floor.
    pub degenerate: bool,
}

impl<T: Real> Gmm1d<T> {
    /// Posterior responsibility of the upper component at `x`.
    pub fn upper_responsibility(&self, x: T) -> T {
        let (a, b) = (self.log_weighted(0, x), self.log_weighted(1, x));
        let m = a.max(b);
        let (ea, eb) = ((a - m).exp(), (b - m).exp());
        eb / (ea + eb)
    }

    fn log_weighted(&self, c: usize, x: T) -> T {
        log_weighted(self.weights[c], self.means[c], self.variances[c], x)
    }
}

fn log_weighted<T: Real>(w: T, mu: T, var: T, x: T) -> T {
    let two_pi = T::lit(std::f64::consts::TAU);
    let d = x - mu;
    w.ln() - T::lit(0.5) * (two_pi * var).ln() - d * d / (T::lit(2.0) * var)
}

fn percentile<T: Real>(sorted: &[T], q: f64) -> T {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Fits the mixture by EM started from the 25th/75th percentiles with equal
/// weights. Stops when the mean log-likelihood changes by less than 1e-9 or
/// after 500 iterations. Needs at least two distinct values.
pub fn fit_gmm_1d<T: Real>(values: &[T]) -> Result<Gmm1d<T>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("mixture input contains non-finite values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    if sorted.len() < 2 || sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::Degenerate("mixture input has fewer than two distinct values".into()));
    }
    let n = T::from_count(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    let total_var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;

    let (mut lo, mut hi) = (percentile(&sorted, 0.25), percentile(&sorted, 0.75));
    if lo == hi {
        lo = sorted[0];
        hi = sorted[sorted.len() - 1];
    }
    let floor = T::lit(VARIANCE_FLOOR);
    let mut means = [lo, hi];
    let mut variances = [total_var.max(floor); 2];
    let mut weights = [T::lit(0.5); 2];
    let mut degenerate = false;
    let mut trace: Vec<T> = Vec::new();
    let mut resp = vec![T::zero(); values.len()];

    for _ in 0..MAX_ITERATIONS {
        // E step, accumulating the log-likelihood of the current parameters.
        let mut ll = T::zero();
        for (r, &x) in resp.iter_mut().zip(values) {
            let a = log_weighted(weights[0], means[0], variances[0], x);
            let b = log_weighted(weights[1], means[1], variances[1], x);
            let m = a.max(b);
            let (ea, eb) = ((a - m).exp(), (b - m).exp());
            ll += m + (ea + eb).ln();
            *r = eb / (ea + eb);
        }
        let ll = ll / n;

        // M step.
        let n1 = resp.iter().copied().sum::<T>();
        let n0 = n - n1;
        if n0 <= T::zero() || n1 <= T::zero() {
            degenerate = true;
            trace.push(ll);
            break;
        }
        let m0 = values.iter().zip(&resp).map(|(&x, &r)| (T::one() - r) * x).sum::<T>() / n0;
        let m1 = values.iter().zip(&resp).map(|(&x, &r)| r * x).sum::<T>() / n1;
        let v0 = values
            .iter()
            .zip(&resp)
            .map(|(&x, &r)| (T::one() - r) * (x - m0) * (x - m0))
            .sum::<T>()
            / n0;
        let v1 = values.iter().zip(&resp).map(|(&x, &r)| r * (x - m1) * (x - m1)).sum::<T>() / n1;
        means = [m0, m1];
        variances = [v0, v1];
        for v in &mut variances {
            if *v < floor {
                *v = floor;
                degenerate = true;
            }
        }
        weights = [n0 / n, n1 / n];

        let converged = trace.last().is_some_and(|&prev| (ll - prev).abs() < T::lit(LL_TOLERANCE));
        trace.push(ll);
        if converged {
            break;
        }
    }

    if means[0] > means[1] {
        means.swap(0, 1);
        variances.swap(0, 1);
        weights.swap(0, 1);
    }
    let threshold = crossover(&means, &variances, &weights);
    Ok(Gmm1d {
        means,
        variances,
        weights,
        threshold,
        log_likelihood: trace,
        degenerate,
    })
}

/// Root of the log posterior ratio between the two means, by bisection; the
/// midpoint when the ratio does not change sign there.
fn crossover<T: Real>(means: &[T; 2], variances: &[T; 2], weights: &[T; 2]) -> T {
    let f = |x: T| {
        log_weighted(weights[1], means[1], variances[1], x) - log_weighted(weights[0], means[0], variances[0], x)
    };
    let (mut a, mut b) = (means[0], means[1]);
    let (fa, fb) = (f(a), f(b));
    if !(fa <= T::zero() && fb >= T::zero()) || a == b {
        return (a + b) / T::lit(2.0);
    }
    for _ in 0..200 {
        let mid = (a + b) / T::lit(2.0);
        if mid == a || mid == b {
            break;
        }
        if f(mid) < T::zero() {
            a = mid;
        } else {
            b = mid;
        }
    }
    (a + b) / T::lit(2.0)
}
