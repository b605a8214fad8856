//! Base learners behind a common fit/predict contract.
//!
//! Built-in learners are full-batch and deterministic, so the only source of
//! run-to-run variation in repeated cross-validation is the fold split.

mod cox;
mod external;
pub mod linalg;
mod linear;
mod logistic;
pub mod optim;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub use cox::{CoxLearner, CoxModel, CoxObjective};
pub use external::{ExternalLearner, ExternalSpec};
pub use linear::{LinearLearner, LinearModel};
pub use logistic::{LogisticLearner, LogisticModel, LogisticObjective};
pub use optim::Solver;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub l2_penalty: f64,
    pub max_iterations: usize,
    pub convergence_tolerance: f64,
    pub solver: Solver,
    /// Gradient-descent step size and its `lr / (1 + decay·t)` decay.
    pub learning_rate: f64,
    pub learning_rate_decay: f64,
    /// Coefficient norm beyond which a fit is stopped and flagged.
    pub coefficient_cap: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            l2_penalty: 1e-4,
            max_iterations: 500,
            convergence_tolerance: 1e-8,
            solver: Solver::Auto,
            learning_rate: 0.1,
            learning_rate_decay: 0.0,
            coefficient_cap: 1e3,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2_penalty >= 0.0 && self.l2_penalty.is_finite()) {
            return Err(Error::invalid("l2_penalty must be a finite non-negative number"));
        }
        if self.max_iterations < 1 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if !(self.convergence_tolerance > 0.0) {
            return Err(Error::invalid("convergence_tolerance must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate_decay >= 0.0) {
            return Err(Error::invalid("learning rate must be positive and decay non-negative"));
        }
        if !(self.coefficient_cap > 0.0) {
            return Err(Error::invalid("coefficient_cap must be positive"));
        }
        Ok(())
    }

    pub(crate) fn minimize_options<T: Real>(&self) -> optim::MinimizeOptions<T> {
        optim::MinimizeOptions {
            max_iterations: self.max_iterations,
            tolerance: T::lit(self.convergence_tolerance),
            learning_rate: T::lit(self.learning_rate),
            learning_rate_decay: T::lit(self.learning_rate_decay),
            newton_max_dim: 1000,
            norm_cap: None,
        }
    }
}

/// Outcome of a fit that returned a usable model but deserves attention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitWarning {
    /// Stopped at `max_iterations`; the best iterate is used.
    NotConverged,
    /// Coefficients hit `coefficient_cap` (e.g. monotone partial likelihood).
    CoefficientCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub warning: Option<FitWarning>,
}

/// Task-appropriate predictions for a batch of rows.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction<T> {
    /// Row-major `rows × n_classes` class probabilities (class order = label index order).
    Probabilities { n_classes: usize, values: Vec<T> },
    /// Higher = earlier expected event.
    Risk(Vec<T>),
    /// Real-valued ordinal grade.
    Grade(Vec<T>),
}

impl<T: Real> Prediction<T> {
    pub fn len(&self) -> usize {
        match self {
            Prediction::Probabilities { n_classes, values } => values.len() / n_classes,
            Prediction::Risk(v) | Prediction::Grade(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Probability row of the `i`-th predicted sample.
    pub fn probabilities(&self, i: usize) -> Option<&[T]> {
        match self {
            Prediction::Probabilities { n_classes, values } => Some(&values[i * n_classes..(i + 1) * n_classes]),
            _ => None,
        }
    }

    /// Most probable class (1-based); ties go to the lower class.
    pub fn predicted_class(&self, i: usize) -> Option<u32> {
        let p = self.probabilities(i)?;
        let mut best = 0;
        for (c, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = c;
            }
        }
        Some(best as u32 + 1)
    }
}

pub trait FittedModel<T: Real>: Send + Sync {
    fn predict(&self, data: &Dataset<T>, rows: &[usize]) -> Result<Prediction<T>>;

    fn diagnostics(&self) -> FitDiagnostics;
}

/// Fits a model on a subset of a dataset's rows.
pub trait Learner<T: Real>: Send + Sync {
    fn task(&self) -> Task;

    /// Deterministic given `(data, rows, seed)`.
    fn fit(&self, data: &Dataset<T>, rows: &[usize], seed: u64) -> Result<Box<dyn FittedModel<T>>>;
}

/// Serializable learner choice, embedded in run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerSpec {
    Logistic(FitConfig),
    Linear(FitConfig),
    Cox(FitConfig),
    External(ExternalSpec),
}

impl LearnerSpec {
    pub fn default_for(task: Task) -> Self {
        match task {
            Task::Classification => LearnerSpec::Logistic(FitConfig::default()),
            Task::Survival => LearnerSpec::Cox(FitConfig::default()),
            Task::Ordinal => LearnerSpec::Linear(FitConfig::default()),
        }
    }

    pub fn task(&self) -> Task {
        match self {
            LearnerSpec::Logistic(_) => Task::Classification,
            LearnerSpec::Linear(_) => Task::Ordinal,
            LearnerSpec::Cox(_) => Task::Survival,
            LearnerSpec::External(e) => e.task,
        }
    }

    pub fn build<T: Real>(&self) -> Result<Box<dyn Learner<T>>> {
        Ok(match self {
            LearnerSpec::Logistic(c) => Box::new(LogisticLearner::new(c.clone())?),
            LearnerSpec::Linear(c) => Box::new(LinearLearner::new(c.clone())?),
            LearnerSpec::Cox(c) => Box::new(CoxLearner::new(c.clone())?),
            LearnerSpec::External(e) => Box::new(ExternalLearner::new(e.clone())),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(FitConfig::default().validate().is_ok());
        let bad = FitConfig {
            convergence_tolerance: 0.0,
            ..FitConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FitConfig {
            max_iterations: 0,
            ..FitConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn argmax_prefers_lower_class_on_ties() {
        let p = Prediction::Probabilities {
            n_classes: 3,
            values: vec![0.4, 0.4, 0.2, 0.1, 0.2, 0.7],
        };
        assert_eq!(p.predicted_class(0), Some(1));
        assert_eq!(p.predicted_class(1), Some(3));
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn spec_roundtrip() {
        let s = LearnerSpec::default_for(Task::Survival);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<LearnerSpec>(&text).unwrap(), s);
    }
}
