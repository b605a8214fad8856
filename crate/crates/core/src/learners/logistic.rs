//! Multinomial logistic regression with the first class as reference.
//!
//! Parameters are `m - 1` blocks of `[intercept, w_1..w_D]`; intercepts are
//! not penalized. Training rows are stored sparsely so one-hot designs
//! (mostly zeros) keep Hessian accumulation cheap.

use super::optim::{minimize, Objective};
use super::{FitConfig, FitDiagnostics, FitWarning, FittedModel, Learner, Prediction};
use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Penalized mean cross-entropy over a set of training rows.
pub struct LogisticObjective<T> {
    n_features: usize,
    n_classes: usize,
    l2: T,
    // CSR with column 0 standing for the intercept.
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
    labels: Vec<usize>,
}

impl<T: Real> LogisticObjective<T> {
    /// `labels` are 1-based class indices in `1..=n_classes`.
    pub fn new(rows: &[&[T]], labels: &[u32], n_classes: usize, l2: T) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        if n_classes < 2 {
            return Err(Error::invalid("logistic regression needs at least two classes"));
        }
        let n_features = rows.first().map_or(0, |r| r.len());
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in rows {
            if r.len() != n_features {
                return Err(Error::LengthMismatch {
                    expected: n_features,
                    found: r.len(),
                });
            }
            cols.push(0);
            vals.push(T::one());
            for (j, &v) in r.iter().enumerate() {
                if v != T::zero() {
                    cols.push(j + 1);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        let labels = labels
            .iter()
            .map(|&l| {
                if l >= 1 && (l as usize) <= n_classes {
                    Ok(l as usize - 1)
                } else {
                    Err(Error::invalid(format!("class label {l} outside 1..={n_classes}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_features,
            n_classes,
            l2,
            row_ptr,
            cols,
            vals,
            labels,
        })
    }

    fn block(&self) -> usize {
        self.n_features + 1
    }

    fn n(&self) -> T {
        T::from_count(self.labels.len())
    }

    /// Logits of the non-reference classes for row `i`.
    fn logits(&self, x: &[T], i: usize, z: &mut [T]) {
        let b = self.block();
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        for (k, zk) in z.iter_mut().enumerate() {
            let w = &x[k * b..(k + 1) * b];
            let mut acc = T::zero();
            for p in s..e {
                acc += w[self.cols[p]] * self.vals[p];
            }
            *zk = acc;
        }
    }

    fn penalty(&self, x: &[T]) -> T {
        let b = self.block();
        let mut s = T::zero();
        for (p, &v) in x.iter().enumerate() {
            if p % b != 0 {
                s += v * v;
            }
        }
        self.l2 * s / T::lit(2.0)
    }

    /// Fills `p` with class probabilities from the non-reference logits and
    /// returns the log normalizer.
    fn softmax(z: &[T], p: &mut [T]) -> T {
        let m = z.iter().fold(T::zero(), |a, &v| a.max(v));
        let mut total = (-m).exp();
        p[0] = total;
        for (k, &v) in z.iter().enumerate() {
            let e = (v - m).exp();
            p[k + 1] = e;
            total += e;
        }
        p.iter_mut().for_each(|v| *v /= total);
        m + total.ln()
    }
}

impl<T: Real> Objective<T> for LogisticObjective<T> {
    fn dim(&self) -> usize {
        (self.n_classes - 1) * self.block()
    }

    fn value(&self, x: &[T]) -> T {
        let mut z = vec![T::zero(); self.n_classes - 1];
        let mut p = vec![T::zero(); self.n_classes];
        let mut loss = T::zero();
        for (i, &y) in self.labels.iter().enumerate() {
            self.logits(x, i, &mut z);
            let lse = Self::softmax(&z, &mut p);
            loss += lse - if y == 0 { T::zero() } else { z[y - 1] };
        }
        loss / self.n() + self.penalty(x)
    }

    fn value_gradient(&self, x: &[T], grad: &mut [T]) -> T {
        let b = self.block();
        let mut z = vec![T::zero(); self.n_classes - 1];
        let mut p = vec![T::zero(); self.n_classes];
        grad.iter_mut().for_each(|g| *g = T::zero());
        let mut loss = T::zero();
        for (i, &y) in self.labels.iter().enumerate() {
            self.logits(x, i, &mut z);
            let lse = Self::softmax(&z, &mut p);
            loss += lse - if y == 0 { T::zero() } else { z[y - 1] };
            for k in 1..self.n_classes {
                let r = p[k] - if y == k { T::one() } else { T::zero() };
                let g = &mut grad[(k - 1) * b..k * b];
                for q in self.row_ptr[i]..self.row_ptr[i + 1] {
                    g[self.cols[q]] += r * self.vals[q];
                }
            }
        }
        let n = self.n();
        for (q, g) in grad.iter_mut().enumerate() {
            *g /= n;
            if q % b != 0 {
                *g += self.l2 * x[q];
            }
        }
        loss / n + self.penalty(x)
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn hessian(&self, x: &[T], h: &mut [T]) -> bool {
        let b = self.block();
        let d = self.dim();
        let mut z = vec![T::zero(); self.n_classes - 1];
        let mut p = vec![T::zero(); self.n_classes];
        h.iter_mut().for_each(|v| *v = T::zero());
        for i in 0..self.labels.len() {
            self.logits(x, i, &mut z);
            Self::softmax(&z, &mut p);
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            for k in 1..self.n_classes {
                for l in k..self.n_classes {
                    let c = if k == l { p[k] * (T::one() - p[k]) } else { -p[k] * p[l] };
                    let (rk, rl) = ((k - 1) * b, (l - 1) * b);
                    for qa in s..e {
                        let ca = c * self.vals[qa];
                        let row = (rk + self.cols[qa]) * d + rl;
                        // Columns ascend within a row, so on diagonal blocks
                        // starting at `qa` fills the upper triangle.
                        let from = if k == l { qa } else { s };
                        let h_row = &mut h[row..row + b];
                        for (&cb, &vb) in self.cols[from..e].iter().zip(&self.vals[from..e]) {
                            h_row[cb] += ca * vb;
                        }
                    }
                }
            }
        }
        let n = self.n();
        // Upper blocks, and the upper triangle of diagonal blocks, were
        // accumulated; scale those and mirror the rest.
        let upper = |r: usize, c: usize| r / b < c / b || (r / b == c / b && r <= c);
        for r in 0..d {
            for c in 0..d {
                if upper(r, c) {
                    h[r * d + c] /= n;
                }
            }
        }
        for r in 0..d {
            for c in 0..d {
                if !upper(r, c) {
                    h[r * d + c] = h[c * d + r];
                }
            }
        }
        for q in 0..d {
            if q % b != 0 {
                h[q * d + q] += self.l2;
            }
        }
        true
    }
}

#[derive(Debug, Clone)]
pub struct LogisticLearner {
    config: FitConfig,
}

impl LogisticLearner {
    pub fn new(config: FitConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl<T: Real> Learner<T> for LogisticLearner {
    fn task(&self) -> Task {
        Task::Classification
    }

    fn fit(&self, data: &Dataset<T>, rows: &[usize], _seed: u64) -> Result<Box<dyn FittedModel<T>>> {
        Ok(Box::new(LogisticModel::fit(data, rows, &self.config)?))
    }
}

/// Fitted coefficients, `(m - 1) × (D + 1)` row-major.
#[derive(Debug, Clone)]
pub struct LogisticModel<T> {
    pub n_classes: usize,
    pub n_features: usize,
    pub coefficients: Vec<T>,
    diagnostics: FitDiagnostics,
}

impl<T: Real> LogisticModel<T> {
    pub fn fit(data: &Dataset<T>, rows: &[usize], config: &FitConfig) -> Result<Self> {
        let labels = data.class_labels()?;
        let n_classes = data.n_classes().unwrap_or(0);
        if rows.is_empty() {
            return Err(Error::invalid("empty training set"));
        }
        let y: Vec<u32> = rows.iter().map(|&r| labels[r]).collect();
        if y.iter().all(|&l| l == y[0]) {
            return Err(Error::SingleClass);
        }
        let xs: Vec<&[T]> = rows.iter().map(|&r| data.row(r)).collect();
        let obj = LogisticObjective::new(&xs, &y, n_classes, T::lit(config.l2_penalty))?;
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
            n_classes,
            n_features: data.n_features(),
            coefficients: m.x,
            diagnostics: FitDiagnostics {
                iterations: m.iterations,
                warning,
            },
        })
    }

    pub fn predict_row(&self, x: &[T], out: &mut [T]) {
        let b = self.n_features + 1;
        let z: Vec<T> = (0..self.n_classes - 1)
            .map(|k| {
                let w = &self.coefficients[k * b..(k + 1) * b];
                w[0] + x.iter().zip(&w[1..]).fold(T::zero(), |s, (&a, &c)| s + a * c)
            })
            .collect();
        LogisticObjective::softmax(&z, out);
    }
}

impl<T: Real> FittedModel<T> for LogisticModel<T> {
    fn predict(&self, data: &Dataset<T>, rows: &[usize]) -> Result<Prediction<T>> {
        if data.n_features() != self.n_features {
            return Err(Error::LengthMismatch {
                expected: self.n_features,
                found: data.n_features(),
            });
        }
        let m = self.n_classes;
        let mut values = vec![T::zero(); rows.len() * m];
        for (i, &r) in rows.iter().enumerate() {
            self.predict_row(data.row(r), &mut values[i * m..(i + 1) * m]);
        }
        Ok(Prediction::Probabilities { n_classes: m, values })
    }

    fn diagnostics(&self) -> FitDiagnostics {
        self.diagnostics
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Labels;
    use crate::learners::optim::Solver;

    fn classification(features: Vec<f64>, d: usize, labels: Vec<u32>, m: usize) -> Dataset<f64> {
        let classes = (1..=m).map(|c| c.to_string()).collect();
        Dataset::with_row_ids("t", d, features, Labels::Classification { values: labels, classes }).unwrap()
    }

    #[test]
    fn separable_pair_is_fit() {
        let d = classification(vec![-1.0, 1.0], 1, vec![1, 2], 2);
        let m = LogisticModel::fit(&d, &[0, 1], &FitConfig::default()).unwrap();
        let p = m.predict(&d, &[0, 1]).unwrap();
        assert_eq!(p.predicted_class(0), Some(1));
        assert_eq!(p.predicted_class(1), Some(2));
    }

    #[test]
    fn constant_features_give_priors() {
        let d = classification(vec![3.0; 8], 2, vec![1, 2, 1, 2], 2);
        let m = LogisticModel::fit(&d, &[0, 1, 2, 3], &FitConfig::default()).unwrap();
        let p = m.predict(&d, &[0]).unwrap();
        let row = p.probabilities(0).unwrap();
        assert!((row[0] - 0.5).abs() < 1e-9 && (row[1] - 0.5).abs() < 1e-9, "{row:?}");
    }

    #[test]
    fn single_class_rejected() {
        let d = classification(vec![0.0, 1.0, 2.0], 1, vec![1, 1, 2], 2);
        assert!(matches!(LogisticModel::fit(&d, &[0, 1], &FitConfig::default()), Err(Error::SingleClass)));
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let rows: Vec<Vec<f64>> = vec![vec![0.5, 0.0], vec![-1.0, 2.0], vec![0.0, 0.3], vec![1.5, -0.7], vec![0.2, 0.2]];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let obj = LogisticObjective::new(&refs, &[1, 2, 3, 2, 1], 3, 0.1).unwrap();
        let x: Vec<f64> = (0..obj.dim()).map(|i| 0.1 * i as f64 - 0.2).collect();
        let d = obj.dim();
        let mut h = vec![0.0; d * d];
        obj.hessian(&x, &mut h);
        let step = 1e-6;
        for j in 0..d {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += step;
            xm[j] -= step;
            let (mut gp, mut gm) = (vec![0.0; d], vec![0.0; d]);
            obj.value_gradient(&xp, &mut gp);
            obj.value_gradient(&xm, &mut gm);
            for i in 0..d {
                let fd = (gp[i] - gm[i]) / (2.0 * step);
                assert!((fd - h[i * d + j]).abs() < 1e-6, "h[{i},{j}] {} vs {fd}", h[i * d + j]);
            }
        }
    }

    #[test]
    fn solvers_agree_on_three_classes() {
        let features: Vec<f64> = (0..30).flat_map(|i| [(i % 7) as f64 - 3.0, (i % 5) as f64 * 0.5]).collect();
        let labels: Vec<u32> = (0..30).map(|i| (i % 3) as u32 + 1).collect();
        let d = classification(features, 2, labels, 3);
        let rows: Vec<usize> = (0..30).collect();
        let newton = LogisticModel::fit(&d, &rows, &FitConfig::default()).unwrap();
        let lbfgs = LogisticModel::fit(
            &d,
            &rows,
            &FitConfig {
                solver: Solver::Lbfgs,
                max_iterations: 5000,
                ..FitConfig::default()
            },
        )
        .unwrap();
        for (a, b) in newton.coefficients.iter().zip(&lbfgs.coefficients) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }
}
