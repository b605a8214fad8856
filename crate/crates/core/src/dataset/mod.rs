//! Datasets, label sets and noise masks.

mod encode;
mod io;
mod mask;

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use encode::{encode_csv, one_hot, EncodeOptions, EncodeSummary, RawTable};
pub use io::{load_dataset, save_dataset, save_dataset_as, LabelSchema, Schema};
pub use mask::{load_mask, save_mask, DetectionScores, MaskSource, NoiseMask};

/// Supervised task type; decides the fold metric and the per-sample metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Survival,
    Ordinal,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Classification => "classification",
            Task::Survival => "survival",
            Task::Ordinal => "ordinal",
        })
    }
}

/// Closed integer range of ordinal grades.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeRange {
    pub min: i64,
    pub max: i64,
}

impl GradeRange {
    pub fn new(min: i64, max: i64) -> Result<Self> {
        if max <= min {
            return Err(Error::invalid(format!("degenerate grade range {min}:{max}")));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, g: i64) -> bool {
        (self.min..=self.max).contains(&g)
    }

    /// Number of distinct grades.
    pub fn levels(&self) -> usize {
        (self.max - self.min + 1) as usize
    }

    pub fn width(&self) -> i64 {
        self.max - self.min
    }
}

impl fmt::Display for GradeRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.min, self.max)
    }
}

impl std::str::FromStr for GradeRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("grade range `{s}` is not MIN:MAX")))?;
        let min = a.trim().parse().map_err(|_| Error::invalid(format!("bad grade `{a}`")))?;
        let max = b.trim().parse().map_err(|_| Error::invalid(format!("bad grade `{b}`")))?;
        GradeRange::new(min, max)
    }
}

/// Task-typed labels. Classification labels are 1-based class indices into
/// `classes`, which keeps the original label spellings for output.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels<T> {
    Classification { values: Vec<u32>, classes: Vec<String> },
    Survival { times: Vec<T>, events: Vec<bool> },
    Ordinal { grades: Vec<i64>, range: GradeRange },
}

impl<T: Real> Labels<T> {
    pub fn len(&self) -> usize {
        match self {
            Labels::Classification { values, .. } => values.len(),
            Labels::Survival { times, .. } => times.len(),
            Labels::Ordinal { grades, .. } => grades.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self {
            Labels::Classification { .. } => Task::Classification,
            Labels::Survival { .. } => Task::Survival,
            Labels::Ordinal { .. } => Task::Ordinal,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Labels::Classification { values, classes } => {
                if classes.len() < 2 {
                    return Err(Error::Schema(format!(
                        "classification needs at least 2 classes, got {}",
                        classes.len()
                    )));
                }
                let m = classes.len() as u32;
                if let Some((i, v)) = values.iter().enumerate().find(|(_, &v)| v == 0 || v > m) {
                    return Err(Error::LabelOutOfRange {
                        line: i as u64 + 2,
                        label: v.to_string(),
                        range: format!("1..={m}"),
                    });
                }
            }
            Labels::Survival { times, events } => {
                if times.len() != events.len() {
                    return Err(Error::LengthMismatch {
                        expected: times.len(),
                        found: events.len(),
                    });
                }
                if let Some((i, t)) = times.iter().enumerate().find(|(_, t)| !(t.is_finite() && **t > T::zero())) {
                    return Err(Error::LabelOutOfRange {
                        line: i as u64 + 2,
                        label: t.to_string(),
                        range: "(0, inf)".into(),
                    });
                }
            }
            Labels::Ordinal { grades, range } => {
                if let Some((i, g)) = grades.iter().enumerate().find(|(_, g)| !range.contains(**g)) {
                    return Err(Error::LabelOutOfRange {
                        line: i as u64 + 2,
                        label: g.to_string(),
                        range: range.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    fn select(&self, rows: &[usize]) -> Self {
        match self {
            Labels::Classification { values, classes } => Labels::Classification {
                values: rows.iter().map(|&r| values[r]).collect(),
                classes: classes.clone(),
            },
            Labels::Survival { times, events } => Labels::Survival {
                times: rows.iter().map(|&r| times[r]).collect(),
                events: rows.iter().map(|&r| events[r]).collect(),
            },
            Labels::Ordinal { grades, range } => Labels::Ordinal {
                grades: rows.iter().map(|&r| grades[r]).collect(),
                range: *range,
            },
        }
    }
}

/// N samples × D real features with task-typed labels and unique string ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub name: String,
    ids: Vec<String>,
    feature_names: Vec<String>,
    features: Vec<T>,
    labels: Labels<T>,
}

impl<T: Real> Dataset<T> {
    /// Builds a dataset from row-major features, validating every invariant.
    pub fn new(
        name: impl Into<String>,
        ids: Vec<String>,
        feature_names: Vec<String>,
        features: Vec<T>,
        labels: Labels<T>,
    ) -> Result<Self> {
        let n = ids.len();
        let d = feature_names.len();
        if features.len() != n * d {
            return Err(Error::LengthMismatch {
                expected: n * d,
                found: features.len(),
            });
        }
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: labels.len(),
            });
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        // A non-empty feature vector implies d > 0.
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                line: (pos / d) as u64 + 2,
                column: feature_names[pos % d].clone(),
                value: features[pos].to_string(),
            });
        }
        labels.validate()?;
        Ok(Self {
            name: name.into(),
            ids,
            feature_names,
            features,
            labels,
        })
    }

    /// Dataset whose ids are the row indices `0..n`.
    pub fn with_row_ids(name: impl Into<String>, n_features: usize, features: Vec<T>, labels: Labels<T>) -> Result<Self> {
        let n = labels.len();
        let ids = (0..n).map(|i| i.to_string()).collect();
        let names = (0..n_features).map(|j| format!("x{j}")).collect();
        Self::new(name, ids, names, features, labels)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        let d = self.n_features();
        &self.features[i * d..(i + 1) * d]
    }

    pub fn labels(&self) -> &Labels<T> {
        &self.labels
    }

    pub fn task(&self) -> Task {
        self.labels.task()
    }

    /// Number of classes for classification data.
    pub fn n_classes(&self) -> Option<usize> {
        match &self.labels {
            Labels::Classification { classes, .. } => Some(classes.len()),
            _ => None,
        }
    }

    pub fn class_labels(&self) -> Result<&[u32]> {
        match &self.labels {
            Labels::Classification { values, .. } => Ok(values),
            other => Err(Error::WrongTask(format!("expected classification labels, got {}", other.task()))),
        }
    }

    pub fn survival(&self) -> Result<(&[T], &[bool])> {
        match &self.labels {
            Labels::Survival { times, events } => Ok((times, events)),
            other => Err(Error::WrongTask(format!("expected survival labels, got {}", other.task()))),
        }
    }

    pub fn ordinal(&self) -> Result<(&[i64], GradeRange)> {
        match &self.labels {
            Labels::Ordinal { grades, range } => Ok((grades, *range)),
            other => Err(Error::WrongTask(format!("expected ordinal labels, got {}", other.task()))),
        }
    }

    pub fn id_index(&self) -> HashMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }

    /// Row positions of `ids`, failing on any id not in the dataset.
    pub fn positions_of<S: AsRef<str>>(&self, ids: &[S]) -> Result<Vec<usize>> {
        let index = self.id_index();
        ids.iter()
            .map(|id| {
                index
                    .get(id.as_ref())
                    .copied()
                    .ok_or_else(|| Error::UnknownId(id.as_ref().to_string()))
            })
            .collect()
    }

    /// New dataset holding `rows` in the given order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let d = self.n_features();
        let mut features = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            features.extend_from_slice(self.row(r));
        }
        Self {
            name: self.name.clone(),
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
            feature_names: self.feature_names.clone(),
            features,
            labels: self.labels.select(rows),
        }
    }

    /// Same samples with replacement labels (e.g. after noise injection).
    pub fn with_labels(&self, labels: Labels<T>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: labels.len(),
            });
        }
        labels.validate()?;
        Ok(Self {
            labels,
            ..self.clone()
        })
    }

    /// Mean and population standard deviation of each listed column.
    pub fn column_stats(&self, columns: &[usize]) -> Vec<(T, T)> {
        let n = self.len();
        let d = self.n_features();
        if n == 0 {
            return columns.iter().map(|_| (T::zero(), T::zero())).collect();
        }
        let nf = T::from_count(n);
        columns
            .iter()
            .map(|&j| {
                let mean = (0..n).map(|i| self.features[i * d + j]).sum::<T>() / nf;
                let var = (0..n)
                    .map(|i| {
                        let c = self.features[i * d + j] - mean;
                        c * c
                    })
                    .sum::<T>()
                    / nf;
                (mean, var.sqrt())
            })
            .collect()
    }

    /// Applies `(x - mean) / sd` per column; a zero `sd` only centres.
    pub fn apply_standardization(&mut self, columns: &[usize], stats: &[(T, T)]) {
        let d = self.n_features();
        for (&j, &(mean, sd)) in columns.iter().zip(stats) {
            for i in 0..self.len() {
                let v = &mut self.features[i * d + j];
                *v -= mean;
                if sd > T::zero() {
                    *v /= sd;
                }
            }
        }
    }

    /// Z-scores the given feature columns in place. Constant columns are
    /// centred only.
    pub fn standardize_columns(&mut self, columns: &[usize]) {
        let stats = self.column_stats(columns);
        self.apply_standardization(columns, &stats);
    }

    /// Columns that take values other than 0 and 1.
    pub fn continuous_columns(&self) -> Vec<usize> {
        let d = self.n_features();
        (0..d)
            .filter(|&j| {
                self.features
                    .iter()
                    .skip(j)
                    .step_by(d.max(1))
                    .any(|&v| v != T::zero() && v != T::one())
            })
            .collect()
    }
}
