//! Per-sample, per-layer predictions: the only input the exit policies see.
//!
//! On disk a trace set is JSON Lines, one object per sample:
//! `{"sample_id": "...", "gold": 2, "probs": [[...], ...], "entropy": [...], "argmax": [...]}`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{argmax, normalized_entropy};
use crate::scalar::Scalar;

/// Row-sum tolerance for stored distributions.
pub const TRACE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionTrace<T> {
    pub sample_id: String,
    pub gold: usize,
    /// One distribution over the classes per exit, shallowest first.
    pub probs: Vec<Vec<T>>,
    /// Normalized entropy of each row of `probs`.
    pub entropy: Vec<T>,
    pub argmax: Vec<usize>,
}

impl<T: Scalar> PredictionTrace<T> {
    /// Builds a trace, deriving entropies and argmaxes from the distributions.
    pub fn from_probs(sample_id: impl Into<String>, gold: usize, probs: Vec<Vec<T>>) -> Result<Self> {
        let entropy = probs
            .iter()
            .map(|row| normalized_entropy(row))
            .collect::<Result<Vec<_>>>()?;
        let argmax = probs.iter().map(|row| argmax(row)).collect();
        let trace = Self {
            sample_id: sample_id.into(),
            gold,
            probs,
            entropy,
            argmax,
        };
        trace.validate()?;
        Ok(trace)
    }

    /// Number of exits (M).
    pub fn num_layers(&self) -> usize {
        self.probs.len()
    }

    /// Number of classes (|K|).
    pub fn num_classes(&self) -> usize {
        self.probs.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.probs.len();
        if m == 0 {
            return Err(Error::input("trace has no layers"));
        }
        if self.entropy.len() != m || self.argmax.len() != m {
            return Err(Error::input(format!(
                "trace has {m} distributions but {} entropies and {} argmaxes",
                self.entropy.len(),
                self.argmax.len()
            )));
        }
        let k = self.num_classes();
        if k < 2 {
            return Err(Error::input(format!("trace needs at least 2 classes, got {k}")));
        }
        if self.gold >= k {
            return Err(Error::input(format!("gold label {} outside {k} classes", self.gold)));
        }
        let tol = T::of(TRACE_TOLERANCE);
        for (layer, row) in self.probs.iter().enumerate() {
            if row.len() != k {
                return Err(Error::input(format!(
                    "layer {} has {} classes, expected {k}",
                    layer + 1,
                    row.len()
                )));
            }
            let h = normalized_entropy(row).map_err(|e| match e {
                Error::Input(msg) => Error::input(format!("layer {}: {msg}", layer + 1)),
                other => other,
            })?;
            if (h - self.entropy[layer]).abs() > tol {
                return Err(Error::input(format!(
                    "layer {}: stored entropy {} disagrees with distribution ({h})",
                    layer + 1,
                    self.entropy[layer]
                )));
            }
            if argmax(row) != self.argmax[layer] {
                return Err(Error::input(format!(
                    "layer {}: stored argmax {} disagrees with distribution",
                    layer + 1,
                    self.argmax[layer]
                )));
            }
        }
        Ok(())
    }
}

/// Checks that every trace has the same number of layers and classes and
/// returns that shape.
pub fn common_shape<T: Scalar>(traces: &[PredictionTrace<T>]) -> Result<(usize, usize)> {
    let first = traces.first().ok_or_else(|| Error::input("empty trace set"))?;
    let shape = (first.num_layers(), first.num_classes());
    for t in traces {
        if (t.num_layers(), t.num_classes()) != shape {
            return Err(Error::input(format!(
                "trace {} has shape {:?}, expected {shape:?}",
                t.sample_id,
                (t.num_layers(), t.num_classes())
            )));
        }
    }
    Ok(shape)
}

pub fn write_traces<T: Scalar + Serialize, W: Write>(mut out: W, traces: &[PredictionTrace<T>]) -> std::io::Result<()> {
    for t in traces {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_traces<T: Scalar + Serialize>(path: &Path, traces: &[PredictionTrace<T>]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_traces(BufWriter::new(file), traces).map_err(|e| Error::io(path, e))
}

/// Reads and validates a JSONL trace file. Blank lines are skipped; any
/// malformed or inconsistent line fails with its 1-based line number.
pub fn load_traces<T: Scalar + DeserializeOwned>(path: &Path) -> Result<Vec<PredictionTrace<T>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut traces = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let data_err = |msg: String| Error::Data {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let trace: PredictionTrace<T> = serde_json::from_str(&line).map_err(|e| data_err(e.to_string()))?;
        trace.validate().map_err(|e| data_err(e.to_string()))?;
        traces.push(trace);
    }
    if traces.is_empty() {
        return Err(Error::Data {
            path: path.to_path_buf(),
            line: 0,
            msg: "no traces".into(),
        });
    }
    Ok(traces)
}
