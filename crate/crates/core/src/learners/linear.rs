//! Ridge regression on ordinal grades.
//!
//! Minimizes `(1/2n) Σ (y - b - wᵀx)² + (λ/2) ‖w‖²` with an unpenalized
//! intercept. `Auto`/`Newton` solve the centered normal equations directly;
//! the iterative solvers minimize the same objective.

use super::linalg::solve_spd;
use super::optim::{minimize, Objective, Solver};
use super::{FitConfig, FitDiagnostics, FitWarning, FittedModel, Learner, Prediction};
use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Penalty substituted when an unpenalized system is singular.
pub const FORCED_PENALTY: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct LinearLearner {
    config: FitConfig,
}

impl LinearLearner {
    pub fn new(config: FitConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl<T: Real> Learner<T> for LinearLearner {
    fn task(&self) -> Task {
        Task::Ordinal
    }

    fn fit(&self, data: &Dataset<T>, rows: &[usize], _seed: u64) -> Result<Box<dyn FittedModel<T>>> {
        Ok(Box::new(LinearModel::fit(data, rows, &self.config)?))
    }
}

#[derive(Debug, Clone)]
pub struct LinearModel<T> {
    pub intercept: T,
    pub weights: Vec<T>,
    /// Penalty actually used; differs from the configured one only when it
    /// had to be forced.
    pub l2_used: T,
    diagnostics: FitDiagnostics,
}

struct RidgeObjective<'a, T> {
    xs: Vec<&'a [T]>,
    y: Vec<T>,
    l2: T,
}

impl<T: Real> Objective<T> for RidgeObjective<'_, T> {
    fn dim(&self) -> usize {
        self.xs.first().map_or(0, |r| r.len()) + 1
    }

    fn value_gradient(&self, x: &[T], grad: &mut [T]) -> T {
        grad.iter_mut().for_each(|g| *g = T::zero());
        let n = T::from_count(self.y.len());
        let mut loss = T::zero();
        for (row, &y) in self.xs.iter().zip(&self.y) {
            let pred = x[0] + row.iter().zip(&x[1..]).fold(T::zero(), |s, (&a, &w)| s + a * w);
            let r = pred - y;
            loss += r * r;
            grad[0] += r;
            for (g, &a) in grad[1..].iter_mut().zip(row.iter()) {
                *g += r * a;
            }
        }
        let mut pen = T::zero();
        for (q, g) in grad.iter_mut().enumerate() {
            *g /= n;
            if q > 0 {
                *g += self.l2 * x[q];
                pen += x[q] * x[q];
            }
        }
        loss / (T::lit(2.0) * n) + self.l2 * pen / T::lit(2.0)
    }
}

impl<T: Real> LinearModel<T> {
    pub fn fit(data: &Dataset<T>, rows: &[usize], config: &FitConfig) -> Result<Self> {
        let (grades, _) = data.ordinal()?;
        if rows.is_empty() {
            return Err(Error::invalid("empty training set"));
        }
        let y: Vec<T> = rows.iter().map(|&r| T::lit(grades[r] as f64)).collect();
        let xs: Vec<&[T]> = rows.iter().map(|&r| data.row(r)).collect();
        match config.solver {
            Solver::Auto | Solver::Newton => Self::closed_form(&xs, &y, T::lit(config.l2_penalty)),
            solver => {
                let obj = RidgeObjective {
                    xs,
                    y,
                    l2: T::lit(config.l2_penalty),
                };
                let m = minimize(&obj, vec![T::zero(); obj.dim()], solver, &config.minimize_options());
                Ok(Self {
                    intercept: m.x[0],
                    weights: m.x[1..].to_vec(),
                    l2_used: obj.l2,
                    diagnostics: FitDiagnostics {
                        iterations: m.iterations,
                        warning: (!m.converged).then_some(FitWarning::NotConverged),
                    },
                })
            }
        }
    }

    fn closed_form(xs: &[&[T]], y: &[T], l2: T) -> Result<Self> {
        let d = xs[0].len();
        let n = T::from_count(xs.len());
        let mut mean_x = vec![T::zero(); d];
        for row in xs {
            for (m, &v) in mean_x.iter_mut().zip(row.iter()) {
                *m += v;
            }
        }
        mean_x.iter_mut().for_each(|m| *m /= n);
        let mean_y = y.iter().copied().sum::<T>() / n;

        let mut a = vec![T::zero(); d * d];
        let mut b = vec![T::zero(); d];
        for (row, &yi) in xs.iter().zip(y) {
            let yc = yi - mean_y;
            for i in 0..d {
                let xi = row[i] - mean_x[i];
                b[i] += xi * yc;
                for j in i..d {
                    a[i * d + j] += xi * (row[j] - mean_x[j]);
                }
            }
        }
        for i in 0..d {
            b[i] /= n;
            for j in i..d {
                a[i * d + j] /= n;
                a[j * d + i] = a[i * d + j];
            }
        }
        let mut l2_used = l2;
        let solve = |pen: T, b: &mut [T]| {
            let mut m = a.clone();
            for i in 0..d {
                m[i * d + i] += pen;
            }
            let mut work = m.clone();
            if super::linalg::cholesky(&mut work, d) {
                super::linalg::cholesky_solve(&work, d, b);
                true
            } else {
                false
            }
        };
        let mut w = b.clone();
        if d > 0 && !solve(l2_used, &mut w) {
            if l2 == T::zero() {
                l2_used = T::lit(FORCED_PENALTY);
                w = b.clone();
            }
            if !solve(l2_used, &mut w) {
                // Penalized but numerically singular (e.g. all-zero columns).
                w = b.clone();
                let mut m = a.clone();
                for i in 0..d {
                    m[i * d + i] += l2_used;
                }
                solve_spd(&m, d, &mut w).ok_or_else(|| Error::Degenerate("ridge system is not solvable".into()))?;
            }
        }
        let intercept = mean_y - w.iter().zip(&mean_x).fold(T::zero(), |s, (&wi, &mi)| s + wi * mi);
        Ok(Self {
            intercept,
            weights: w,
            l2_used,
            diagnostics: FitDiagnostics::default(),
        })
    }

    pub fn predict_row(&self, x: &[T]) -> T {
        self.intercept + x.iter().zip(&self.weights).fold(T::zero(), |s, (&a, &w)| s + a * w)
    }
}

impl<T: Real> FittedModel<T> for LinearModel<T> {
    fn predict(&self, data: &Dataset<T>, rows: &[usize]) -> Result<Prediction<T>> {
        if data.n_features() != self.weights.len() {
            return Err(Error::LengthMismatch {
                expected: self.weights.len(),
                found: data.n_features(),
            });
        }
        Ok(Prediction::Grade(rows.iter().map(|&r| self.predict_row(data.row(r))).collect()))
    }

    fn diagnostics(&self) -> FitDiagnostics {
        self.diagnostics
    }
}
