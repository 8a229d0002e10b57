use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::vocab::{tokenize, words, Vocab};
use crate::error::{Error, Result};

/// Fractions of samples assigned to train and dev; test gets the rest.
pub const SPLIT_FRACTIONS: (f64, f64) = (0.70, 0.15);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub text: String,
    pub label: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" | "validation" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::config(format!("unknown split {other:?}"))),
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

/// Labeled texts with a train/dev/test partition and a vocabulary built
/// from the training split only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub splits: Splits,
    pub num_classes: usize,
    /// Original label of each class index.
    pub label_names: Vec<String>,
    pub vocab: Vocab,
}

impl Dataset {
    /// Shuffles sample indices with `seed`, cuts 70/15/15 and builds the
    /// vocabulary from the training texts in split order.
    pub fn from_samples(samples: Vec<Sample>, label_names: Vec<String>, seed: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::input("dataset has no samples"));
        }
        let num_classes = label_names.len();
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n = samples.len();
        let n_train = (n as f64 * SPLIT_FRACTIONS.0).round() as usize;
        let n_dev = (n as f64 * SPLIT_FRACTIONS.1).round() as usize;
        let n_dev = n_dev.min(n - n_train);
        let splits = Splits {
            train: order[..n_train].to_vec(),
            dev: order[n_train..n_train + n_dev].to_vec(),
            test: order[n_train + n_dev..].to_vec(),
        };

        let mut vocab = Vocab::new();
        for &i in &splits.train {
            for w in words(&samples[i].text) {
                vocab.insert(&w);
            }
        }
        let ds = Self {
            samples,
            splits,
            num_classes,
            label_names,
            vocab,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.samples.len()];
        for &i in self
            .splits
            .train
            .iter()
            .chain(&self.splits.dev)
            .chain(&self.splits.test)
        {
            if i >= seen.len() || seen[i] {
                return Err(Error::input(format!("sample {i} missing or assigned to two splits")));
            }
            seen[i] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::input(format!("sample {i} is in no split")));
        }
        if let Some(s) = self.samples.iter().find(|s| s.label >= self.num_classes) {
            return Err(Error::input(format!(
                "label {} outside {} classes",
                s.label, self.num_classes
            )));
        }
        if self.label_names.len() != self.num_classes {
            return Err(Error::input("label names do not match class count"));
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.splits.train,
            Split::Dev => &self.splits.dev,
            Split::Test => &self.splits.test,
        }
    }

    /// Token ids and label of every sample in `split`, in split order.
    pub fn encoded(&self, split: Split, max_seq_len: usize) -> Vec<(usize, Vec<usize>, usize)> {
        self.split(split)
            .iter()
            .map(|&i| {
                let s = &self.samples[i];
                (i, tokenize(&s.text, &self.vocab, max_seq_len), s.label)
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), self)?;
        Ok(())
    }

    /// Reads a dataset cache written by [`Dataset::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let ds: Self = serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Data {
            path: path.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        ds.validate()?;
        Ok(ds)
    }
}

/// Assigns class indices to raw labels in order of first appearance.
#[derive(Default)]
struct LabelIndex {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelIndex {
    fn get(&mut self, raw: &str) -> usize {
        if let Some(&i) = self.index.get(raw) {
            return i;
        }
        self.names.push(raw.to_string());
        self.index.insert(raw.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }
}

/// Loads a headed, comma-separated UTF-8 file.
pub fn load_csv(path: &Path, text_column: &str, label_column: &str, seed: u64) -> Result<Dataset> {
    let data_err = |line: usize, msg: String| Error::Data {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers().map_err(|e| data_err(1, e.to_string()))?.clone();
    if headers.is_empty() {
        return Err(data_err(1, "empty file".into()));
    }
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| data_err(1, format!("missing column {name:?}")))
    };
    let text_idx = column(text_column)?;
    let label_idx = column(label_column)?;

    let mut labels = LabelIndex::default();
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            data_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let text = record
            .get(text_idx)
            .ok_or_else(|| data_err(line, "missing text field".into()))?;
        let label = record
            .get(label_idx)
            .ok_or_else(|| data_err(line, "missing label field".into()))?;
        samples.push(Sample {
            text: text.to_string(),
            label: labels.get(label.trim()),
        });
    }
    if samples.is_empty() {
        return Err(data_err(1, "no data rows".into()));
    }
    Dataset::from_samples(samples, labels.names, seed)
}

/// Loads JSON Lines with `"text"` and `"label"` keys; labels may be strings
/// or integers.
pub fn load_jsonl(path: &Path, seed: u64) -> Result<Dataset> {
    #[derive(Deserialize)]
    struct Row {
        text: String,
        label: serde_json::Value,
    }

    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut labels = LabelIndex::default();
    let mut samples = Vec::new();
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
        let row: Row = serde_json::from_str(&line).map_err(|e| data_err(e.to_string()))?;
        let raw = match &row.label {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Number(n) => n.to_string(),
            other => return Err(data_err(format!("unsupported label {other}"))),
        };
        samples.push(Sample {
            text: row.text,
            label: labels.get(&raw),
        });
    }
    if samples.is_empty() {
        return Err(Error::Data {
            path: path.to_path_buf(),
            line: 0,
            msg: "no data rows".into(),
        });
    }
    Dataset::from_samples(samples, labels.names, seed)
}
