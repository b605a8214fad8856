//! Linear Cox proportional hazards with the Breslow handling of ties.
//!
//! Minimizes `-ℓ(β)/n + (λ/2) ‖β‖²` where ℓ is the log partial likelihood.
//! Risk-set sums are accumulated over samples sorted by decreasing time, so a
//! full gradient or Hessian costs one pass.

use super::optim::{minimize, Objective};
use super::{FitConfig, FitDiagnostics, FitWarning, FittedModel, Learner, Prediction};
use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub struct CoxObjective<'a, T> {
    xs: Vec<&'a [T]>,
    events: Vec<bool>,
    /// Tie groups of sample positions, in decreasing time order.
    groups: Vec<Vec<usize>>,
    l2: T,
    d: usize,
}

impl<'a, T: Real> CoxObjective<'a, T> {
    pub fn new(xs: Vec<&'a [T]>, times: &[T], events: &[bool], l2: T) -> Result<Self> {
        if times.len() != xs.len() || events.len() != xs.len() {
            return Err(Error::LengthMismatch {
                expected: xs.len(),
                found: times.len().min(events.len()),
            });
        }
        let d = xs.first().map_or(0, |r| r.len());
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by(|&a, &b| times[b].partial_cmp(&times[a]).expect("finite times").then(a.cmp(&b)));
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for i in order {
            match groups.last_mut() {
                Some(g) if times[g[0]] == times[i] => g.push(i),
                _ => groups.push(vec![i]),
            }
        }
        Ok(Self {
            xs,
            events: events.to_vec(),
            groups,
            l2,
            d,
        })
    }

    fn etas(&self, beta: &[T]) -> (Vec<T>, T) {
        let eta: Vec<T> = self
            .xs
            .iter()
            .map(|r| r.iter().zip(beta).fold(T::zero(), |s, (&a, &b)| s + a * b))
            .collect();
        let shift = eta.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        (eta, if shift.is_finite() { shift } else { T::zero() })
    }

    fn penalty(&self, beta: &[T]) -> T {
        self.l2 * beta.iter().fold(T::zero(), |s, &b| s + b * b) / T::lit(2.0)
    }

    /// Walks the risk sets; `f` sees (event sample, S0, S1, S2) where the
    /// sums use weights `exp(η - shift)`.
    fn sweep(&self, beta: &[T], second_order: bool, mut f: impl FnMut(usize, T, &[T], &[T], T)) {
        let (eta, shift) = self.etas(beta);
        let d = self.d;
        let mut s0 = T::zero();
        let mut s1 = vec![T::zero(); d];
        let mut s2 = vec![T::zero(); if second_order { d * d } else { 0 }];
        for g in &self.groups {
            for &i in g {
                let w = (eta[i] - shift).exp();
                s0 += w;
                let x = self.xs[i];
                for a in 0..d {
                    s1[a] += w * x[a];
                    if second_order {
                        for b in a..d {
                            s2[a * d + b] += w * x[a] * x[b];
                        }
                    }
                }
            }
            for &i in g {
                if self.events[i] {
                    f(i, s0, &s1, &s2, eta[i] - shift);
                }
            }
        }
    }
}

impl<T: Real> Objective<T> for CoxObjective<'_, T> {
    fn dim(&self) -> usize {
        self.d
    }

    fn value_gradient(&self, beta: &[T], grad: &mut [T]) -> T {
        let n = T::from_count(self.xs.len());
        grad.iter_mut().for_each(|g| *g = T::zero());
        let mut ll = T::zero();
        self.sweep(beta, false, |i, s0, s1, _, eta| {
            ll += eta - s0.ln();
            for (a, g) in grad.iter_mut().enumerate() {
                *g -= self.xs[i][a] - s1[a] / s0;
            }
        });
        for (g, &b) in grad.iter_mut().zip(beta) {
            *g = *g / n + self.l2 * b;
        }
        -ll / n + self.penalty(beta)
    }

    fn value(&self, beta: &[T]) -> T {
        let n = T::from_count(self.xs.len());
        let mut ll = T::zero();
        self.sweep(beta, false, |_, s0, _, _, eta| ll += eta - s0.ln());
        -ll / n + self.penalty(beta)
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn hessian(&self, beta: &[T], h: &mut [T]) -> bool {
        let d = self.d;
        let n = T::from_count(self.xs.len());
        h.iter_mut().for_each(|v| *v = T::zero());
        self.sweep(beta, true, |_, s0, s1, s2, _| {
            for a in 0..d {
                for b in a..d {
                    h[a * d + b] += s2[a * d + b] / s0 - (s1[a] / s0) * (s1[b] / s0);
                }
            }
        });
        for a in 0..d {
            for b in a..d {
                h[a * d + b] /= n;
                h[b * d + a] = h[a * d + b];
            }
            h[a * d + a] += self.l2;
        }
        true
    }
}

#[derive(Debug, Clone)]
pub struct CoxLearner {
    config: FitConfig,
}

impl CoxLearner {
    pub fn new(config: FitConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl<T: Real> Learner<T> for CoxLearner {
    fn task(&self) -> Task {
        Task::Survival
    }

    fn fit(&self, data: &Dataset<T>, rows: &[usize], _seed: u64) -> Result<Box<dyn FittedModel<T>>> {
        Ok(Box::new(CoxModel::fit(data, rows, &self.config)?))
    }
}

#[derive(Debug, Clone)]
pub struct CoxModel<T> {
    pub coefficients: Vec<T>,
    diagnostics: FitDiagnostics,
}

impl<T: Real> CoxModel<T> {
    pub fn fit(data: &Dataset<T>, rows: &[usize], config: &FitConfig) -> Result<Self> {
        let (times, events) = data.survival()?;
        let t: Vec<T> = rows.iter().map(|&r| times[r]).collect();
        let e: Vec<bool> = rows.iter().map(|&r| events[r]).collect();
        if e.iter().filter(|&&v| v).count() < 2 {
            return Err(Error::Degenerate("Cox model needs at least two events".into()));
        }
        let xs: Vec<&[T]> = rows.iter().map(|&r| data.row(r)).collect();
        let obj = CoxObjective::new(xs, &t, &e, T::lit(config.l2_penalty))?;
        let mut opts = config.minimize_options::<T>();
        opts.norm_cap = Some(T::lit(config.coefficient_cap));
        let m = minimize(&obj, vec![T::zero(); obj.dim()], config.solver, &opts);
        let warning = if m.capped {
            Some(FitWarning::CoefficientCap)
        } else if !m.converged {
            Some(FitWarning::NotConverged)
        } else {
            None
        };
        Ok(Self {
            coefficients: m.x,
            diagnostics: FitDiagnostics {
                iterations: m.iterations,
                warning,
            },
        })
    }

    pub fn risk(&self, x: &[T]) -> T {
        x.iter().zip(&self.coefficients).fold(T::zero(), |s, (&a, &b)| s + a * b)
    }
}

impl<T: Real> FittedModel<T> for CoxModel<T> {
    fn predict(&self, data: &Dataset<T>, rows: &[usize]) -> Result<Prediction<T>> {
        if data.n_features() != self.coefficients.len() {
            return Err(Error::LengthMismatch {
                expected: self.coefficients.len(),
                found: data.n_features(),
            });
        }
        Ok(Prediction::Risk(rows.iter().map(|&r| self.risk(data.row(r))).collect()))
    }

    fn diagnostics(&self) -> FitDiagnostics {
        self.diagnostics
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Labels;
    use crate::metrics::concordance_index;

    fn survival(features: Vec<f64>, d: usize, times: Vec<f64>, events: Vec<bool>) -> Dataset<f64> {
        Dataset::with_row_ids("s", d, features, Labels::Survival { times, events }).unwrap()
    }

    #[test]
    fn perfectly_ordering_covariate() {
        let times = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let x = vec![6.0, 5.0, 4.0, 3.0, 2.0, 1.0];
        let d = survival(x, 1, times.clone(), vec![true; 6]);
        let rows: Vec<usize> = (0..6).collect();
        let m = CoxModel::fit(&d, &rows, &FitConfig::default()).unwrap();
        let Prediction::Risk(r) = m.predict(&d, &rows).unwrap() else { panic!() };
        assert_eq!(concordance_index(&r, &times, &[true; 6]).unwrap(), 1.0);
    }

    #[test]
    fn constant_covariate_gets_zero_coefficient() {
        let d = survival(vec![2.0; 5], 1, vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![true, false, true, true, false]);
        let m = CoxModel::fit(&d, &[0, 1, 2, 3, 4], &FitConfig::default()).unwrap();
        assert!(m.coefficients[0].abs() < 1e-12, "{:?}", m.coefficients);
    }

    #[test]
    fn too_few_events_rejected() {
        let d = survival(vec![1.0, 2.0, 3.0], 1, vec![1.0, 2.0, 3.0], vec![false, true, false]);
        assert!(matches!(CoxModel::fit(&d, &[0, 1, 2], &FitConfig::default()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn three_sample_gradient_at_zero() {
        // Times 1, 2, 3 with events at 1 and 2; x = 1, 2, 4.
        // dℓ/dβ at 0 = (1 - 7/3) + (2 - 3) = -7/3.
        let xs = [[1.0], [2.0], [4.0]];
        let refs: Vec<&[f64]> = xs.iter().map(|r| r.as_slice()).collect();
        let obj = CoxObjective::new(refs, &[1.0, 2.0, 3.0], &[true, true, false], 0.0).unwrap();
        let mut g = [0.0];
        obj.value_gradient(&[0.0], &mut g);
        assert!((g[0] - 7.0 / 9.0).abs() < 1e-12);
        let h = 1e-6;
        let fd = (obj.value(&[h]) - obj.value(&[-h])) / (2.0 * h);
        assert!((fd - g[0]).abs() < 1e-6);
    }

    #[test]
    fn tied_times_share_a_risk_set() {
        let xs = [[0.5, 1.0], [-1.0, 0.2], [0.3, -0.4], [1.2, 0.0]];
        let refs: Vec<&[f64]> = xs.iter().map(|r| r.as_slice()).collect();
        let obj = CoxObjective::new(refs, &[1.0, 1.0, 2.0, 3.0], &[true, true, true, false], 0.01).unwrap();
        let beta = [0.3, -0.2];
        let mut h = vec![0.0; 4];
        obj.hessian(&beta, &mut h);
        let step = 1e-6;
        for j in 0..2 {
            let (mut bp, mut bm) = (beta, beta);
            bp[j] += step;
            bm[j] -= step;
            let (mut gp, mut gm) = ([0.0; 2], [0.0; 2]);
            obj.value_gradient(&bp, &mut gp);
            obj.value_gradient(&bm, &mut gm);
            for i in 0..2 {
                assert!(((gp[i] - gm[i]) / (2.0 * step) - h[i * 2 + j]).abs() < 1e-6);
            }
        }
    }
}
