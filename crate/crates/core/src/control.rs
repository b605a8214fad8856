//! Interruption, checkpointing and progress for long run loops.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::dataset::{Dataset, Labels};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Side channels of a run loop. The default runs to completion silently.
#[derive(Debug, Clone, Default)]
pub struct RunControl {
    /// Checked between batches; when set, the loop checkpoints and stops.
    pub stop: Option<Arc<AtomicBool>>,
    /// Written periodically and on interruption; resumed from when present.
    pub checkpoint: Option<PathBuf>,
    /// Progress lines on standard error.
    pub progress: bool,
}

impl RunControl {
    pub fn stop_requested(&self) -> bool {
        self.stop.as_ref().is_some_and(|s| s.load(Ordering::SeqCst))
    }

    pub(crate) fn interrupted(&self, completed: usize) -> Error {
        match &self.checkpoint {
            Some(p) => Error::Interrupted {
                completed,
                checkpoint: p.clone(),
            },
            None => Error::InterruptedNoCheckpoint { completed },
        }
    }

    pub(crate) fn save<S: Serialize>(&self, state: &S) -> Result<()> {
        if let Some(path) = &self.checkpoint {
            write_json_atomic(path, state)?;
        }
        Ok(())
    }

    /// Loads a checkpoint if one exists and belongs to `fingerprint`.
    pub(crate) fn load<S: DeserializeOwned + HasFingerprint>(&self, fingerprint: &str) -> Result<Option<S>> {
        let Some(path) = &self.checkpoint else { return Ok(None) };
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let state: S = serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if state.fingerprint() != fingerprint {
            return Err(Error::Checkpoint(format!(
                "{} was written for a different dataset or configuration",
                path.display()
            )));
        }
        Ok(Some(state))
    }
}

pub(crate) trait HasFingerprint {
    fn fingerprint(&self) -> &str;
}

pub(crate) fn write_json_atomic<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let text = serde_json::to_string(value)?;
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// FNV-1a over a byte stream.
#[derive(Debug, Clone)]
pub struct Fnv(u64);

impl Default for Fnv {
    fn default() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
}

impl Fnv {
    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        for &x in b {
            self.0 ^= x as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
        self
    }

    pub fn finish(&self) -> String {
        format!("{:016x}", self.0)
    }
}

/// Content hash of a dataset (ids, labels, features).
pub fn dataset_fingerprint<T: Real>(data: &Dataset<T>) -> String {
    let mut h = Fnv::default();
    for id in data.ids() {
        h.bytes(id.as_bytes()).bytes(&[0]);
    }
    match data.labels() {
        Labels::Classification { values, classes } => {
            for v in values {
                h.bytes(&v.to_le_bytes());
            }
            for c in classes {
                h.bytes(c.as_bytes()).bytes(&[0]);
            }
        }
        Labels::Survival { times, events } => {
            for (t, e) in times.iter().zip(events) {
                h.bytes(&t.as_f64().to_le_bytes()).bytes(&[*e as u8]);
            }
        }
        Labels::Ordinal { grades, range } => {
            for g in grades {
                h.bytes(&g.to_le_bytes());
            }
            h.bytes(&range.min.to_le_bytes()).bytes(&range.max.to_le_bytes());
        }
    }
    for v in data.features() {
        h.bytes(&v.as_f64().to_le_bytes());
    }
    h.finish()
}

/// Fingerprint of a run: dataset content plus the serialized configuration.
pub fn run_fingerprint<T: Real, C: Serialize>(data: &Dataset<T>, config: &C) -> Result<String> {
    let mut h = Fnv::default();
    h.bytes(dataset_fingerprint(data).as_bytes());
    h.bytes(serde_json::to_string(config)?.as_bytes());
    Ok(h.finish())
}
