//! Command-line surface. A `--config` JSON file supplies defaults for any
//! flag: its keys are flag names (dashes or underscores), and flags given
//! on the command line win.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use epee::Strategy;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Parser, Serialize)]
#[command(name = "epee", version, about = "Multi-exit training and early-exit evaluation")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct Global {
    /// Seed for data generation, splits, initialization and shuffling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for default outputs and the run manifest.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// JSON file whose keys mirror command-line flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

impl Global {
    pub fn dir(&self) -> &Path {
        self.out_dir.as_deref().unwrap_or(Path::new("."))
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Train a multi-exit model.
    Train(TrainArgs),
    /// Export per-layer prediction traces for one split.
    Trace(TraceArgs),
    /// Evaluate one exit policy on a trace file.
    Eval(EvalArgs),
    /// Grid-search the hybrid policy over (tau, patience).
    Grid(GridArgs),
    /// Per-layer accuracy and mean entropy.
    Curve(CurveArgs),
    /// Check policy invariants on traces.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::Trace(_) => "trace",
            Command::Eval(_) => "eval",
            Command::Grid(_) => "grid",
            Command::Curve(_) => "curve",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// CSV, JSONL, dataset cache (.json) or `synthetic:<key=value,...>`.
    #[arg(long)]
    pub data: String,
    #[arg(long, default_value = epee::data::DEFAULT_TEXT_COLUMN)]
    pub text_column: String,
    #[arg(long, default_value = epee::data::DEFAULT_LABEL_COLUMN)]
    pub label_column: String,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// JSON model config; missing keys take defaults.
    #[arg(long)]
    pub model_config: Option<PathBuf>,
    /// JSON training config; missing keys take defaults.
    #[arg(long)]
    pub train_config: Option<PathBuf>,
    #[arg(long)]
    pub num_layers: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub num_heads: Option<usize>,
    #[arg(long)]
    pub ffn_dim: Option<usize>,
    #[arg(long)]
    pub max_seq_len: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    /// `linear-cost` or `uniform`.
    #[arg(long)]
    pub weight_scheme: Option<String>,
    /// Checkpoint path (default `<out-dir>/model.bin`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TraceArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// `train`, `dev` or `test`.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Trace file (default `<out-dir>/traces.jsonl`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub traces: PathBuf,
    #[arg(long)]
    pub strategy: Strategy,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Exit used by `budgeted` (default: the last layer).
    #[arg(long)]
    pub budget_layer: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    #[arg(long)]
    pub traces: PathBuf,
    /// Comma-separated thresholds (default 0.00, 0.05, ..., 1.00).
    #[arg(long)]
    pub tau_list: Option<String>,
    /// Comma-separated values or ranges such as `1..M` (default `1..M`).
    #[arg(long)]
    pub patience_list: Option<String>,
    /// Grid CSV (default `<out-dir>/grid.csv`); the frontier JSON is
    /// written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CurveArgs {
    #[arg(long)]
    pub traces: PathBuf,
    /// Curve CSV (default `<out-dir>/curve.csv`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct VerifyArgs {
    #[arg(long)]
    pub traces: Option<PathBuf>,
    /// Generate this many random traces instead of reading a file.
    #[arg(long)]
    pub random_traces: Option<usize>,
}

/// Appends `--key value` for every key of the `--config` file that is not
/// already on the command line.
pub fn merge_config_file(args: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let Some(path) = find_config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let Value::Object(map) =
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
    else {
        bail!("config {} must hold a JSON object", path.display());
    };

    let mut merged = args;
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" || already_given(&merged, &flag) {
            continue;
        }
        match value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => merged.push(flag.into()),
            Value::String(s) => merged.extend([flag.into(), s.into()]),
            Value::Number(n) => merged.extend([flag.into(), n.to_string().into()]),
            Value::Array(items) => {
                let joined = items
                    .iter()
                    .map(|v| match v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect::<Vec<_>>()
                    .join(",");
                merged.extend([flag.into(), joined.into()]);
            }
            Value::Object(_) => bail!("config key {key:?} must not be an object"),
        }
    }
    Ok(merged)
}

fn find_config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        let arg = arg.to_string_lossy();
        if arg == "--config" {
            return iter.next().map(PathBuf::from);
        }
        if let Some(path) = arg.strip_prefix("--config=") {
            return Some(PathBuf::from(path));
        }
    }
    None
}

fn already_given(args: &[OsString], flag: &str) -> bool {
    args.iter().any(|a| {
        let a = a.to_string_lossy();
        a == flag || a.strip_prefix(flag).is_some_and(|rest| rest.starts_with('='))
    })
}
