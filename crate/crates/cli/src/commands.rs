use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use epee::data::{open_dataset, Dataset, Split};
use epee::eval::report::{curve_csv, frontier_json, grid_csv, histogram_csv};
use epee::eval::{budgeted_curve, evaluate, grid_search, pareto_frontier};
use epee::model::{checkpoint, train, write_trace_file, ModelConfig, TrainConfig};
use epee::policy::random::{random_traces, RandomTraceSpec};
use epee::policy::verify::run_suites;
use epee::trace::{common_shape, load_traces};
use epee::{ExitPolicyConfig, Model, Strategy, Trace};
use serde::de::DeserializeOwned;

use crate::args::{CurveArgs, DataArgs, EvalArgs, Global, GridArgs, TraceArgs, TrainArgs, VerifyArgs};

/// Bad flag values or combinations that clap cannot catch on its own.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// At least one invariant suite reported a failure.
#[derive(Debug)]
pub struct VerificationFailed(pub usize);

impl fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} invariant suite(s) failed", self.0)
    }
}

impl std::error::Error for VerificationFailed {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Files read and written by a command, for the manifest.
#[derive(Default)]
pub struct Io {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl Io {
    fn read(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    fn write(&mut self, path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
        create_parent(path)?;
        fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }
}

fn create_parent(path: &Path) -> anyhow::Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
        }
        _ => Ok(()),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path, io: &mut Io) -> anyhow::Result<T> {
    io.read(path);
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn open_data(args: &DataArgs, seed: u64, io: &mut Io) -> anyhow::Result<Dataset> {
    if !args.data.starts_with("synthetic:") {
        io.read(Path::new(&args.data));
    }
    Ok(open_dataset(&args.data, seed, &args.text_column, &args.label_column)?)
}

fn read_traces(path: &Path, io: &mut Io) -> anyhow::Result<Vec<Trace>> {
    io.read(path);
    Ok(load_traces(path)?)
}

pub fn train_cmd(g: &Global, a: &TrainArgs, io: &mut Io) -> anyhow::Result<()> {
    let data = open_data(&a.data, g.seed, io)?;
    let mut mcfg: ModelConfig = match &a.model_config {
        Some(p) => read_json(p, io)?,
        None => ModelConfig::default(),
    };
    let mut tcfg: TrainConfig = match &a.train_config {
        Some(p) => read_json(p, io)?,
        None => TrainConfig::default(),
    };
    macro_rules! apply {
        ($cfg:ident, $($field:ident),+) => {
            $(if let Some(v) = a.$field { $cfg.$field = v; })+
        };
    }
    apply!(mcfg, num_layers, hidden_dim, num_heads, ffn_dim, max_seq_len);
    apply!(tcfg, epochs, batch_size, learning_rate, momentum);
    if let Some(s) = &a.weight_scheme {
        tcfg.weight_scheme = serde_json::from_value(serde_json::Value::String(s.clone()))
            .map_err(|_| usage(format!("unknown weight scheme {s:?}; expected linear-cost or uniform")))?;
    }
    // The data decides the output width and the minimum vocabulary.
    mcfg.num_classes = data.num_classes;
    mcfg.vocab_size = mcfg.vocab_size.max(data.vocab.len());
    mcfg.seed = g.seed;
    tcfg.seed = g.seed;
    log::info!("model config {mcfg:?}");
    log::info!("train config {tcfg:?}");

    let mut model = Model::new(mcfg)?;
    let report = train(&mut model, &data, &tcfg)?;

    let dir = g.dir();
    let out = a.out.clone().unwrap_or_else(|| dir.join("model.bin"));
    io.write(&out, checkpoint::to_bytes(&model))?;
    io.write(
        &dir.join("train_report.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    let cache = dir.join("dataset.json");
    io.write(&cache, serde_json::to_vec(&data)?)?;
    if let Some(last) = report.dev_accuracy.last() {
        println!(
            "trained {} epochs; final loss {:.4}; dev accuracy by exit {:?}",
            report.epoch_loss.len(),
            report.epoch_loss.last().copied().unwrap_or(f64::NAN),
            last.iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>()
        );
    }
    Ok(())
}

pub fn trace_cmd(g: &Global, a: &TraceArgs, io: &mut Io) -> anyhow::Result<()> {
    io.read(&a.model);
    let model: Model = checkpoint::load(&a.model)?;
    let data = open_data(&a.data, g.seed, io)?;
    let split: Split = a.split.parse().map_err(|e: epee::Error| usage(e.to_string()))?;
    let out = a.out.clone().unwrap_or_else(|| g.dir().join("traces.jsonl"));
    create_parent(&out)?;
    let n = write_trace_file(&model, &data, split, &out)?;
    io.outputs.push(out.clone());
    println!("wrote {n} traces to {}", out.display());
    Ok(())
}

fn policy_config(a: &EvalArgs, num_layers: usize) -> anyhow::Result<ExitPolicyConfig> {
    let need_tau = || {
        a.tau
            .ok_or_else(|| usage(format!("--tau is required for {}", a.strategy)))
    };
    let need_patience = || {
        a.patience
            .ok_or_else(|| usage(format!("--patience is required for {}", a.strategy)))
    };
    let cfg = match a.strategy {
        Strategy::Entropy => ExitPolicyConfig::entropy(need_tau()?),
        Strategy::Patience => ExitPolicyConfig::patience(need_patience()?),
        Strategy::Epee => ExitPolicyConfig::epee(need_tau()?, need_patience()?),
        Strategy::Budgeted => ExitPolicyConfig::budgeted(a.budget_layer.unwrap_or(num_layers)),
    };
    cfg.validate(num_layers).map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

pub fn eval_cmd(g: &Global, a: &EvalArgs, io: &mut Io) -> anyhow::Result<()> {
    let traces = read_traces(&a.traces, io)?;
    let (m, _) = common_shape(&traces)?;
    let cfg = policy_config(a, m)?;
    let result = evaluate(&traces, &cfg)?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    if let Some(dir) = &g.out_dir {
        io.write(&dir.join("histogram.csv"), histogram_csv(&result))?;
    }
    Ok(())
}

fn parse_tau_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| usage(format!("bad tau value {t:?}"))))
        .collect()
}

/// Comma-separated integers or inclusive ranges `a..b`; `M` stands for the
/// number of layers.
fn parse_patience_list(s: &str, m: usize) -> anyhow::Result<Vec<usize>> {
    let num = |t: &str| -> anyhow::Result<usize> {
        let t = t.trim();
        if t == "M" {
            return Ok(m);
        }
        t.parse().map_err(|_| usage(format!("bad patience value {t:?}")))
    };
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((lo, hi)) => {
                let hi = hi.strip_prefix('=').unwrap_or(hi);
                out.extend(num(lo)?..=num(hi)?);
            }
            None => out.push(num(part)?),
        }
    }
    Ok(out)
}

pub fn grid_cmd(g: &Global, a: &GridArgs, io: &mut Io) -> anyhow::Result<()> {
    let traces = read_traces(&a.traces, io)?;
    let (m, _) = common_shape(&traces)?;
    let taus = match &a.tau_list {
        Some(s) => parse_tau_list(s)?,
        None => epee::policy::verify::tau_sweep(),
    };
    let patience = parse_patience_list(a.patience_list.as_deref().unwrap_or("1..M"), m)?;
    let grid = grid_search(&traces, &taus, &patience).map_err(|e| match e {
        epee::Error::Config(msg) => usage(msg),
        other => other.into(),
    })?;
    let frontier = pareto_frontier(&grid);

    let out = a.out.clone().unwrap_or_else(|| g.dir().join("grid.csv"));
    io.write(&out, grid_csv(&grid))?;
    let frontier_path = out.with_file_name("frontier.json");
    io.write(&frontier_path, frontier_json(&frontier))?;

    println!(
        "{} cells ({} tau x {} patience); Pareto frontier:",
        grid.cells.len(),
        grid.tau_values.len(),
        grid.patience_values.len()
    );
    println!("{:>6} {:>8} {:>8} {:>8}", "tau", "patience", "speedup", "accuracy");
    for p in &frontier {
        println!(
            "{:>6.2} {:>8} {:>8.4} {:>8.4}",
            p.tau, p.patience, p.speedup, p.accuracy
        );
    }
    Ok(())
}

pub fn curve_cmd(g: &Global, a: &CurveArgs, io: &mut Io) -> anyhow::Result<()> {
    let traces = read_traces(&a.traces, io)?;
    let curve = budgeted_curve(&traces)?;
    let out = a.out.clone().unwrap_or_else(|| g.dir().join("curve.csv"));
    io.write(&out, curve_csv(&curve))?;
    for s in &curve {
        println!(
            "layer {:>2}: accuracy {:.4}, mean entropy {:.4}",
            s.layer, s.accuracy, s.mean_entropy
        );
    }
    Ok(())
}

pub fn verify_cmd(g: &Global, a: &VerifyArgs, io: &mut Io) -> anyhow::Result<()> {
    let traces: Vec<Trace> = match (&a.traces, a.random_traces) {
        (Some(path), _) => read_traces(path, io)?,
        (None, Some(n)) => random_traces(n, g.seed, RandomTraceSpec::default()),
        (None, None) => return Err(usage("one of --traces or --random-traces is required")),
    };
    if traces.is_empty() {
        return Err(usage("no traces to verify"));
    }
    let reports = run_suites(&traces, g.seed)?;
    println!("{} traces", traces.len());
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        return Err(VerificationFailed(failed).into());
    }
    Ok(())
}
