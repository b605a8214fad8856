//! Fold-level metrics, per-sample ranking metrics and 1-D mixture thresholding.
//!
//! Every per-sample metric is scaled to `[0, 1]` with higher meaning "more
//! plausibly clean", so memory values behave the same for every task.

mod classification;
mod gmm;
mod ordinal;
mod survival;

use serde::{Deserialize, Serialize};

use crate::dataset::Task;

pub use classification::{accuracy, true_class_probability};
pub use gmm::{fit_gmm_1d, Gmm1d};
pub use ordinal::{quadratic_weighted_kappa, regression_closeness};
pub use survival::{comparable_pair_counts, concordance_index, sample_concordance, sample_concordances};

/// Metric computed on each validation fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldMetricKind {
    Accuracy,
    ConcordanceIndex,
    QuadraticWeightedKappa,
}

impl FoldMetricKind {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Classification => FoldMetricKind::Accuracy,
            Task::Survival => FoldMetricKind::ConcordanceIndex,
            Task::Ordinal => FoldMetricKind::QuadraticWeightedKappa,
        }
    }

    pub fn task(self) -> Task {
        match self {
            FoldMetricKind::Accuracy => Task::Classification,
            FoldMetricKind::ConcordanceIndex => Task::Survival,
            FoldMetricKind::QuadraticWeightedKappa => Task::Ordinal,
        }
    }

    /// Inclusive range of valid values.
    pub fn range(self) -> (f64, f64) {
        match self {
            FoldMetricKind::QuadraticWeightedKappa => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }
}

/// Per-sample ranking metric used by the memory bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMetricKind {
    TrueClassProbability,
    SampleConcordance,
    RegressionCloseness,
}

impl SampleMetricKind {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Classification => SampleMetricKind::TrueClassProbability,
            Task::Survival => SampleMetricKind::SampleConcordance,
            Task::Ordinal => SampleMetricKind::RegressionCloseness,
        }
    }
}
