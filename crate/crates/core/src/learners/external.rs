//! Adapter that delegates fit/predict to an external command.
//!
//! For each prediction request the adapter writes, into a fresh temporary
//! directory:
//!
//! - `train.csv`: the training rows in the dataset CSV layout (`id`, label
//!   columns, features);
//! - `predict.csv`: `id` followed by the features of the rows to score;
//!
//! then runs
//!
//! ```text
//! <program> <args..> --task <task> --train train.csv --predict predict.csv \
//!     --out predictions.csv --seed <seed>
//! ```
//!
//! and reads `predictions.csv`, which must hold one row per requested id with
//! header `id,p1,..,pm` (class probabilities in class-index order),
//! `id,risk` or `id,grade`. A non-zero exit status is an error.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::{FitDiagnostics, FittedModel, Learner, Prediction};
use crate::dataset::{save_dataset, Dataset, Task};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalSpec {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
    pub task: Task,
}

#[derive(Debug, Clone)]
pub struct ExternalLearner {
    spec: ExternalSpec,
}

impl ExternalLearner {
    pub fn new(spec: ExternalSpec) -> Self {
        Self { spec }
    }
}

impl<T: Real> Learner<T> for ExternalLearner {
    fn task(&self) -> Task {
        self.spec.task
    }

    fn fit(&self, data: &Dataset<T>, rows: &[usize], seed: u64) -> Result<Box<dyn FittedModel<T>>> {
        if data.task() != self.spec.task {
            return Err(Error::WrongTask(format!(
                "external learner is configured for {} but the dataset is {}",
                self.spec.task,
                data.task()
            )));
        }
        // Fitting is deferred: the command trains and predicts in one call.
        Ok(Box::new(ExternalModel {
            spec: self.spec.clone(),
            train: data.subset(rows),
            seed,
        }))
    }
}

struct ExternalModel<T> {
    spec: ExternalSpec,
    train: Dataset<T>,
    seed: u64,
}

fn write_features<T: Real>(data: &Dataset<T>, rows: &[usize], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["id".to_string()];
    header.extend(data.feature_names().iter().cloned());
    w.write_record(&header)?;
    for &r in rows {
        let mut rec = vec![data.ids()[r].clone()];
        rec.extend(data.row(r).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn read_predictions<T: Real>(path: &Path, ids: &[&str], width: usize) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut by_id: HashMap<String, Vec<T>> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width + 1 {
            return Err(Error::MalformedRow {
                line,
                message: format!("expected {} prediction columns, found {}", width, rec.len().saturating_sub(1)),
            });
        }
        let vals = rec
            .iter()
            .skip(1)
            .map(|s| {
                s.parse::<T>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::NonFinite {
                    line,
                    column: "prediction".into(),
                    value: s.into(),
                })
            })
            .collect::<Result<Vec<T>>>()?;
        by_id.insert(rec[0].to_string(), vals);
    }
    let mut out = Vec::with_capacity(ids.len() * width);
    for id in ids {
        let v = by_id
            .get(*id)
            .ok_or_else(|| Error::Subprocess(format!("no prediction for id `{id}`")))?;
        out.extend_from_slice(v);
    }
    Ok(out)
}

impl<T: Real> FittedModel<T> for ExternalModel<T> {
    fn predict(&self, data: &Dataset<T>, rows: &[usize]) -> Result<Prediction<T>> {
        let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let train = dir.path().join("train.csv");
        let predict = dir.path().join("predict.csv");
        let out = dir.path().join("predictions.csv");
        save_dataset(&self.train, &train)?;
        write_features(data, rows, &predict)?;
        let status = Command::new(&self.spec.program)
            .args(&self.spec.args)
            .arg("--task")
            .arg(self.spec.task.to_string())
            .arg("--train")
            .arg(&train)
            .arg("--predict")
            .arg(&predict)
            .arg("--out")
            .arg(&out)
            .arg("--seed")
            .arg(self.seed.to_string())
            .status()
            .map_err(|e| Error::Subprocess(format!("cannot run `{}`: {e}", self.spec.program)))?;
        if !status.success() {
            return Err(Error::Subprocess(format!("`{}` exited with {status}", self.spec.program)));
        }
        let ids: Vec<&str> = rows.iter().map(|&r| data.ids()[r].as_str()).collect();
        Ok(match self.spec.task {
            Task::Classification => {
                let m = data.n_classes().unwrap_or(0);
                let values = read_predictions(&out, &ids, m)?;
                for (i, p) in values.chunks(m).enumerate() {
                    let s = p.iter().copied().sum::<T>();
                    if (s - T::one()).abs() > T::lit(1e-6) || p.iter().any(|&v| v < T::zero()) {
                        return Err(Error::Subprocess(format!("probabilities for `{}` do not form a distribution", ids[i])));
                    }
                }
                Prediction::Probabilities { n_classes: m, values }
            }
            Task::Survival => Prediction::Risk(read_predictions(&out, &ids, 1)?),
            Task::Ordinal => Prediction::Grade(read_predictions(&out, &ids, 1)?),
        })
    }

    fn diagnostics(&self) -> FitDiagnostics {
        FitDiagnostics::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Labels;

    #[cfg(unix)]
    #[test]
    fn shell_script_learner_round_trip() {
        use std::io::Write;
        use std::os::unix::fs::PermissionsExt;
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("learner.sh");
        // Predicts risk = first feature, ignoring the training file.
        let body = r#"#!/bin/sh
while [ $# -gt 0 ]; do
  case "$1" in
    --predict) pred="$2"; shift 2;;
    --out) out="$2"; shift 2;;
    *) shift;;
  esac
done
awk -F, 'NR==1 {print "id,risk"; next} {print $1 "," $2}' "$pred" > "$out"
"#;
        File::create(&script).unwrap().write_all(body.as_bytes()).unwrap();
        std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
        let data = Dataset::with_row_ids(
            "s",
            1,
            vec![0.5, 1.5, -2.0],
            Labels::Survival {
                times: vec![1.0, 2.0, 3.0],
                events: vec![true, true, false],
            },
        )
        .unwrap();
        let learner = ExternalLearner::new(ExternalSpec {
            program: script.to_string_lossy().into(),
            args: vec![],
            task: Task::Survival,
        });
        let model = Learner::<f64>::fit(&learner, &data, &[0, 1], 7).unwrap();
        assert_eq!(model.predict(&data, &[2, 0]).unwrap(), Prediction::Risk(vec![-2.0, 0.5]));
    }
}
