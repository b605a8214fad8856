use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSource {
    GroundTruth,
    Detected,
}

/// Per-sample noisy/clean flags keyed by sample id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseMask {
    pub ids: Vec<String>,
    pub flags: Vec<bool>,
    pub source: MaskSource,
}

/// Confusion counts of a detected mask against ground truth (positive = noisy).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionScores {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

impl DetectionScores {
    pub fn accuracy(&self) -> f64 {
        let total = self.true_positives + self.false_positives + self.true_negatives + self.false_negatives;
        (self.true_positives + self.true_negatives) as f64 / total as f64
    }

    pub fn precision(&self) -> f64 {
        let flagged = self.true_positives + self.false_positives;
        if flagged == 0 {
            0.0
        } else {
            self.true_positives as f64 / flagged as f64
        }
    }

    pub fn recall(&self) -> f64 {
        let noisy = self.true_positives + self.false_negatives;
        if noisy == 0 {
            0.0
        } else {
            self.true_positives as f64 / noisy as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

impl NoiseMask {
    pub fn new(ids: Vec<String>, flags: Vec<bool>, source: MaskSource) -> Result<Self> {
        if ids.len() != flags.len() {
            return Err(Error::LengthMismatch {
                expected: ids.len(),
                found: flags.len(),
            });
        }
        Ok(Self { ids, flags, source })
    }

    /// Mask over `ids` flagging exactly the ids in `noisy`.
    pub fn from_noisy_ids<S: AsRef<str>>(ids: &[String], noisy: &[S], source: MaskSource) -> Result<Self> {
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut flags = vec![false; ids.len()];
        for id in noisy {
            let i = index.get(id.as_ref()).ok_or_else(|| Error::UnknownId(id.as_ref().to_string()))?;
            flags[*i] = true;
        }
        Ok(Self {
            ids: ids.to_vec(),
            flags,
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn noise_ratio(&self) -> f64 {
        if self.flags.is_empty() {
            return 0.0;
        }
        self.flags.iter().filter(|&&f| f).count() as f64 / self.flags.len() as f64
    }

    pub fn noisy_ids(&self) -> Vec<String> {
        self.ids
            .iter()
            .zip(&self.flags)
            .filter(|(_, &f)| f)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn noisy_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// Compares against `truth`, matching samples by id.
    pub fn scores(&self, truth: &NoiseMask) -> Result<DetectionScores> {
        if truth.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: truth.len(),
                found: self.len(),
            });
        }
        let index: HashMap<&str, bool> = truth.ids.iter().map(String::as_str).zip(truth.flags.iter().copied()).collect();
        let mut s = DetectionScores {
            true_positives: 0,
            false_positives: 0,
            true_negatives: 0,
            false_negatives: 0,
        };
        for (id, &flag) in self.ids.iter().zip(&self.flags) {
            let actual = *index.get(id.as_str()).ok_or_else(|| Error::UnknownId(id.clone()))?;
            match (flag, actual) {
                (true, true) => s.true_positives += 1,
                (true, false) => s.false_positives += 1,
                (false, false) => s.true_negatives += 1,
                (false, true) => s.false_negatives += 1,
            }
        }
        Ok(s)
    }
}

/// Writes `id,noisy` with noisy in {0,1}.
pub fn save_mask(mask: &NoiseMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["id", "noisy"])?;
    for (id, &f) in mask.ids.iter().zip(&mask.flags) {
        w.write_record([id.as_str(), if f { "1" } else { "0" }])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_mask(path: impl AsRef<Path>, source: MaskSource) -> Result<NoiseMask> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let headers = r.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "id" || &headers[1] != "noisy" {
        return Err(Error::Schema(format!("{}: expected header `id,noisy`", path.display())));
    }
    let mut ids = Vec::new();
    let mut flags = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        ids.push(rec[0].to_string());
        flags.push(match rec[1].trim() {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::MalformedRow {
                    line,
                    message: format!("noisy flag `{other}` is not 0 or 1"),
                })
            }
        });
    }
    NoiseMask::new(ids, flags, source)
}
