//! Datasets: CSV/JSONL loaders, the synthetic generator, the tokenizer and
//! split management.

mod dataset;
mod synthetic;
mod vocab;

use std::path::Path;

pub use dataset::{load_csv, load_jsonl, Dataset, Sample, Split, Splits, SPLIT_FRACTIONS};
pub use synthetic::{generate_synthetic, noise_word, signal_word, SyntheticSpec, SAMPLE_WORDS};
pub use vocab::{tokenize, words, Vocab, PAD, PAD_TOKEN, UNK, UNK_TOKEN};

use crate::error::Result;

/// Column names used when a CSV source does not specify any.
pub const DEFAULT_TEXT_COLUMN: &str = "text";
pub const DEFAULT_LABEL_COLUMN: &str = "label";

/// Resolves a data argument:
///
/// - `synthetic:<key=value,...>` generates a corpus (see [`SyntheticSpec::parse`]);
/// - `*.jsonl` is read with [`load_jsonl`];
/// - `*.json` is a dataset cache written by [`Dataset::save`];
/// - anything else is read as CSV.
pub fn open_dataset(source: &str, seed: u64, text_column: &str, label_column: &str) -> Result<Dataset> {
    if let Some(desc) = source.strip_prefix("synthetic:") {
        return generate_synthetic(&SyntheticSpec::parse(desc, seed)?);
    }
    let path = Path::new(source);
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => load_jsonl(path, seed),
        Some("json") => Dataset::load(path),
        _ => load_csv(path, text_column, label_column, seed),
    }
}
