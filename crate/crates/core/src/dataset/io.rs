use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, GradeRange, Labels, Task};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Which CSV columns hold the labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum LabelSchema {
    /// `classes` fixes the label set and its order; when absent the classes
    /// are the distinct values found, in numeric order if all are integers
    /// and lexicographic order otherwise.
    Classification {
        label_col: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        classes: Option<Vec<String>>,
    },
    Survival {
        time_col: String,
        event_col: String,
    },
    /// `range` defaults to the observed min..max.
    Ordinal {
        label_col: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        range: Option<GradeRange>,
    },
}

impl LabelSchema {
    pub fn task(&self) -> Task {
        match self {
            LabelSchema::Classification { .. } => Task::Classification,
            LabelSchema::Survival { .. } => Task::Survival,
            LabelSchema::Ordinal { .. } => Task::Ordinal,
        }
    }

    fn claimed(&self) -> Vec<&str> {
        match self {
            LabelSchema::Classification { label_col, .. } | LabelSchema::Ordinal { label_col, .. } => {
                vec![label_col]
            }
            LabelSchema::Survival { time_col, event_col } => vec![time_col, event_col],
        }
    }
}

/// Column mapping for [`load_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    /// Sample id column; row indices (`0`, `1`, ...) are used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id_col: Option<String>,
    pub labels: LabelSchema,
    /// Explicit feature columns. When absent every numeric column not named
    /// above is a feature and non-numeric columns are ignored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_cols: Option<Vec<String>>,
}

impl Schema {
    pub fn classification(label_col: &str) -> Self {
        Self {
            id_col: None,
            labels: LabelSchema::Classification {
                label_col: label_col.into(),
                classes: None,
            },
            feature_cols: None,
        }
    }

    pub fn survival(time_col: &str, event_col: &str) -> Self {
        Self {
            id_col: None,
            labels: LabelSchema::Survival {
                time_col: time_col.into(),
                event_col: event_col.into(),
            },
            feature_cols: None,
        }
    }

    pub fn ordinal(label_col: &str, range: Option<GradeRange>) -> Self {
        Self {
            id_col: None,
            labels: LabelSchema::Ordinal {
                label_col: label_col.into(),
                range,
            },
            feature_cols: None,
        }
    }

    pub fn with_id(mut self, id_col: &str) -> Self {
        self.id_col = Some(id_col.into());
        self
    }

    /// Schema matching the layout written by [`save_dataset`] for `data`.
    pub fn of_saved<T: Real>(data: &Dataset<T>) -> Self {
        let labels = match data.labels() {
            Labels::Classification { classes, .. } => LabelSchema::Classification {
                label_col: "label".into(),
                classes: Some(classes.clone()),
            },
            Labels::Survival { .. } => LabelSchema::Survival {
                time_col: "time".into(),
                event_col: "event".into(),
            },
            Labels::Ordinal { range, .. } => LabelSchema::Ordinal {
                label_col: "grade".into(),
                range: Some(*range),
            },
        };
        Schema {
            id_col: Some("id".into()),
            labels,
            feature_cols: Some(data.feature_names().to_vec()),
        }
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Schema(format!("column `{name}` not found")))
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_event(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "1.0" | "true" | "t" | "yes" => Some(true),
        "0" | "0.0" | "false" | "f" | "no" => Some(false),
        _ => None,
    }
}

/// Reads a headed CSV file into a validated [`Dataset`].
pub fn load_dataset<T: Real>(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers()?.clone();
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| match e.position() {
            Some(p) => Error::MalformedRow {
                line: p.line(),
                message: e.to_string(),
            },
            None => Error::Csv(e),
        })?;
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::Schema(format!("{}: no data rows", path.display())));
    }

    let id_idx = schema.id_col.as_deref().map(|c| column(&headers, c)).transpose()?;
    let mut claimed: Vec<usize> = schema
        .labels
        .claimed()
        .into_iter()
        .map(|c| column(&headers, c))
        .collect::<Result<_>>()?;
    claimed.extend(id_idx);

    let feature_idx: Vec<usize> = match &schema.feature_cols {
        Some(cols) => cols.iter().map(|c| column(&headers, c)).collect::<Result<_>>()?,
        None => (0..headers.len())
            .filter(|j| !claimed.contains(j))
            .filter(|&j| records[0].get(j).is_some_and(|v| v.parse::<f64>().is_ok()))
            .collect(),
    };
    let feature_names: Vec<String> = feature_idx.iter().map(|&j| headers[j].to_string()).collect();

    let n = records.len();
    let d = feature_idx.len();
    let mut features = Vec::with_capacity(n * d);
    let mut ids = Vec::with_capacity(n);
    for (i, rec) in records.iter().enumerate() {
        let line = line_of(rec);
        if rec.len() != headers.len() {
            return Err(Error::MalformedRow {
                line,
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        ids.push(match id_idx {
            Some(j) => rec[j].to_string(),
            None => i.to_string(),
        });
        for (&j, name) in feature_idx.iter().zip(&feature_names) {
            let raw = &rec[j];
            let v: T = raw.parse().map_err(|_| Error::MalformedRow {
                line,
                message: format!("column `{name}`: `{raw}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    line,
                    column: name.clone(),
                    value: raw.to_string(),
                });
            }
            features.push(v);
        }
    }

    let labels = match &schema.labels {
        LabelSchema::Classification { label_col, classes } => {
            let j = column(&headers, label_col)?;
            parse_classes(&records, j, classes.as_deref())?
        }
        LabelSchema::Survival { time_col, event_col } => {
            let (jt, je) = (column(&headers, time_col)?, column(&headers, event_col)?);
            let mut times = Vec::with_capacity(n);
            let mut events = Vec::with_capacity(n);
            for rec in &records {
                let line = line_of(rec);
                let t: T = rec[jt].parse().map_err(|_| Error::MalformedRow {
                    line,
                    message: format!("time `{}` is not a number", &rec[jt]),
                })?;
                if !(t.is_finite() && t > T::zero()) {
                    return Err(Error::LabelOutOfRange {
                        line,
                        label: rec[jt].to_string(),
                        range: "(0, inf)".into(),
                    });
                }
                let e = parse_event(&rec[je]).ok_or_else(|| Error::LabelOutOfRange {
                    line,
                    label: rec[je].to_string(),
                    range: "{0,1}".into(),
                })?;
                times.push(t);
                events.push(e);
            }
            Labels::Survival { times, events }
        }
        LabelSchema::Ordinal { label_col, range } => {
            let j = column(&headers, label_col)?;
            let mut grades = Vec::with_capacity(n);
            for rec in &records {
                let raw = &rec[j];
                let g: i64 = raw
                    .parse()
                    .ok()
                    .or_else(|| raw.parse::<f64>().ok().filter(|v| v.fract() == 0.0).map(|v| v as i64))
                    .ok_or_else(|| Error::MalformedRow {
                        line: line_of(rec),
                        message: format!("grade `{raw}` is not an integer"),
                    })?;
                if let Some(r) = range {
                    if !r.contains(g) {
                        return Err(Error::LabelOutOfRange {
                            line: line_of(rec),
                            label: raw.to_string(),
                            range: r.to_string(),
                        });
                    }
                }
                grades.push(g);
            }
            let range = match range {
                Some(r) => *r,
                None => {
                    let lo = *grades.iter().min().expect("non-empty");
                    let hi = *grades.iter().max().expect("non-empty");
                    GradeRange::new(lo, hi)?
                }
            };
            Labels::Ordinal { grades, range }
        }
    };

    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Dataset::new(name, ids, feature_names, features, labels)
}

fn parse_classes<T>(records: &[csv::StringRecord], j: usize, declared: Option<&[String]>) -> Result<Labels<T>> {
    let classes: Vec<String> = match declared {
        Some(c) => c.to_vec(),
        None => {
            let distinct: BTreeSet<&str> = records.iter().map(|r| &r[j]).collect();
            let mut v: Vec<&str> = distinct.into_iter().collect();
            if v.iter().all(|s| s.parse::<i64>().is_ok()) {
                v.sort_by_key(|s| s.parse::<i64>().unwrap());
            }
            v.into_iter().map(String::from).collect()
        }
    };
    if classes.len() < 2 {
        return Err(Error::Schema(format!(
            "classification needs at least 2 classes, found {}",
            classes.len()
        )));
    }
    let index: HashMap<&str, u32> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i as u32 + 1)).collect();
    let values = records
        .iter()
        .map(|rec| {
            index.get(&rec[j]).copied().ok_or_else(|| Error::LabelOutOfRange {
                line: line_of(rec),
                label: rec[j].to_string(),
                range: format!("{{{}}}", classes.join(",")),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Labels::Classification { values, classes })
}

/// Writes `data` as CSV with columns `id`, the label columns (`label`,
/// `time`+`event` or `grade`), then the features. Values are written with
/// shortest round-trip formatting so reloading with [`Schema::of_saved`]
/// reproduces the dataset exactly.
pub fn save_dataset<T: Real>(data: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    save_dataset_as(data, path, &Schema::of_saved(data))
}

/// Like [`save_dataset`] but names the id and label columns after `schema`,
/// so the file keeps the layout it was loaded from. Feature columns keep
/// their names either way.
pub fn save_dataset_as<T: Real>(data: &Dataset<T>, path: impl AsRef<Path>, schema: &Schema) -> Result<()> {
    if schema.labels.task() != data.task() {
        return Err(Error::WrongTask(format!(
            "{} schema for {} data",
            schema.labels.task(),
            data.task()
        )));
    }
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec![schema.id_col.clone().unwrap_or_else(|| "id".into())];
    header.extend(schema.labels.claimed().into_iter().map(String::from));
    header.extend(data.feature_names().iter().cloned());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..data.len() {
        row.clear();
        row.push(data.ids()[i].clone());
        match data.labels() {
            Labels::Classification { values, classes } => row.push(classes[values[i] as usize - 1].clone()),
            Labels::Survival { times, events } => {
                row.push(times[i].to_string());
                row.push(if events[i] { "1" } else { "0" }.into());
            }
            Labels::Ordinal { grades, .. } => row.push(grades[i].to_string()),
        }
        row.extend(data.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
