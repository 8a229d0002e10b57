//! Acceptance suite. Every criterion prints one PASS/FAIL line; the test
//! fails if any criterion does.
//!
//! Report lines go straight to the process stdout, so they show up even
//! when the test harness captures output.

use std::io::Write;
use std::time::{Duration, Instant};

use epee::data::{generate_synthetic, Dataset, Split, SyntheticSpec};
use epee::eval::report::{curve_csv, grid_csv};
use epee::eval::{budgeted_curve, evaluate, grid_search, pareto_frontier, speedup_from_histogram, speedup_ratio};
use epee::model::{checkpoint, export_traces, joint_loss_node, train, ModelConfig, TrainConfig, WeightScheme};
use epee::policy::random::{random_traces, RandomTraceSpec};
use epee::policy::verify::{run_suites, Suite, SuiteReport};
use epee::tensor::grad_check_many;
use epee::{ExitPolicyConfig, Matrix64, Model, Trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RANDOM_TRACES: usize = 10_000;
const SUITE_BUDGET: Duration = Duration::from_secs(10);
const TRAIN_BUDGET: Duration = Duration::from_secs(300);

fn report(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        report(&format!("[{}] {name}: {detail}", if passed { "PASS" } else { "FAIL" }));
        Self { name, passed, detail }
    }
}

fn suite_outcome(name: &'static str, reports: &[&SuiteReport], elapsed: Duration) -> Outcome {
    let failures: usize = reports.iter().map(|r| r.failures).sum();
    let cases: usize = reports.iter().map(|r| r.cases).sum();
    let first = reports.iter().find_map(|r| r.first_failure.clone());
    let mut detail = format!("{cases} cases, {failures} failures, {elapsed:.2?} for all suites");
    if let Some(why) = first {
        detail.push_str(&format!("; first: {why}"));
    }
    Outcome::new(name, failures == 0 && elapsed < SUITE_BUDGET, detail)
}

fn policy_criteria(out: &mut Vec<Outcome>) {
    let traces: Vec<Trace> = random_traces(RANDOM_TRACES, 2024, RandomTraceSpec::default());
    let start = Instant::now();
    let reports = run_suites(&traces, 7).expect("suites run");
    let elapsed = start.elapsed();
    let get = |s: Suite| reports.iter().find(|r| r.suite == s).expect("suite present");
    out.push(suite_outcome(
        "degeneracy-a (epee(tau, M) = entropy(tau))",
        &[get(Suite::DegeneracyEntropy)],
        elapsed,
    ));
    out.push(suite_outcome(
        "degeneracy-b (epee(0, P) = patience(P))",
        &[get(Suite::DegeneracyPatience)],
        elapsed,
    ));
    out.push(suite_outcome(
        "oracle-equivalence",
        &[get(Suite::OracleEquivalence)],
        elapsed,
    ));
    out.push(suite_outcome(
        "monotonicity (tau and patience)",
        &[get(Suite::MonotoneTau), get(Suite::MonotonePatience)],
        elapsed,
    ));
}

fn indicator_speedup(exits: &[usize], m: usize) -> f64 {
    let mut used = 0usize;
    for &e in exits {
        for layer in 1..=m {
            used += usize::from(layer <= e);
        }
    }
    1.0 - used as f64 / (exits.len() * m) as f64
}

fn speedup_criterion(out: &mut Vec<Outcome>) {
    let mut bad = Vec::new();
    for big_m in 1..=16usize {
        for m in 1..=big_m {
            let exits = vec![m; 37];
            let expected = 1.0 - m as f64 / big_m as f64;
            let got = speedup_ratio(&exits, big_m).unwrap();
            let mut hist = vec![0; big_m];
            hist[m - 1] = exits.len();
            if got != expected || speedup_from_histogram(&hist).unwrap() != expected {
                bad.push(format!("m={m}, M={big_m}: {got} vs {expected}"));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let big_m = rng.gen_range(1..=16);
        let n = rng.gen_range(1..=200);
        let exits: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=big_m)).collect();
        let got = speedup_ratio(&exits, big_m).unwrap();
        let want = indicator_speedup(&exits, big_m);
        if got != want {
            bad.push(format!("random vector M={big_m}, n={n}: {got} vs {want}"));
        }
    }
    out.push(Outcome::new(
        "speed-up exactness",
        bad.is_empty(),
        match bad.first() {
            None => "136 uniform cases and 1000 random vectors, all exact".to_string(),
            Some(first) => format!("{} mismatches, first: {first}", bad.len()),
        },
    ));
}

fn gradient_criterion(out: &mut Vec<Outcome>) {
    let cfg = ModelConfig {
        vocab_size: 12,
        num_layers: 2,
        hidden_dim: 8,
        num_heads: 2,
        ffn_dim: 16,
        num_classes: 3,
        max_seq_len: 8,
        seed: 17,
    };
    let model = Model::new(cfg).unwrap();
    let values: Vec<Matrix64> = model.params().iter().map(|p| p.value.clone()).collect();
    let tokens = [2, 5, 11, 3, 7, 4];
    let err = grad_check_many(
        |g, ids| {
            let exits = model.forward_graph(g, ids, &tokens)?;
            joint_loss_node(g, &exits, 2, WeightScheme::LinearCost)
        },
        &values,
        1e-6,
    )
    .unwrap();
    out.push(Outcome::new(
        "gradient correctness (joint loss, M=2, d=8, K=3)",
        err < 1e-4,
        format!("max relative error {err:.3e}"),
    ));
}

struct Trained {
    data: Dataset,
    model: Model,
    elapsed: Duration,
}

fn train_toy(ambiguous_fraction: f64) -> Trained {
    let data = generate_synthetic(&SyntheticSpec {
        ambiguous_fraction,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let mut model = Model::new(ModelConfig {
        vocab_size: data.vocab.len(),
        ..ModelConfig::default()
    })
    .unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    pool.install(|| train(&mut model, &data, &TrainConfig::default()))
        .unwrap();
    Trained {
        data,
        model,
        elapsed: start.elapsed(),
    }
}

fn toy_training_criterion(out: &mut Vec<Outcome>, run: &Trained) {
    let test = export_traces(&run.model, &run.data, Split::Test).unwrap();
    let accuracy = evaluate(&test, &ExitPolicyConfig::budgeted(run.model.num_layers()))
        .unwrap()
        .accuracy;
    let dev = budgeted_curve(&export_traces(&run.model, &run.data, Split::Dev).unwrap()).unwrap();
    let (first, last) = (dev[0].mean_entropy, dev[dev.len() - 1].mean_entropy);
    out.push(Outcome::new(
        "toy training (final-layer test accuracy, entropy trend, runtime)",
        accuracy >= 0.95 && last < first && run.elapsed < TRAIN_BUDGET,
        format!(
            "test accuracy {accuracy:.4}, dev entropy layer 1 {first:.4} -> layer {} {last:.4}, {:.1?} on one thread",
            dev.len(),
            run.elapsed
        ),
    ));
}

fn overthinking_criterion(out: &mut Vec<Outcome>) {
    let run = train_toy(0.3);
    let traces = export_traces(&run.model, &run.data, Split::Test).unwrap();
    let m = run.model.num_layers();
    let baseline = evaluate(&traces, &ExitPolicyConfig::budgeted(m)).unwrap().accuracy;
    let taus: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let patience: Vec<usize> = (1..=m).collect();
    let grid = grid_search(&traces, &taus, &patience).unwrap();
    let best = grid
        .cells
        .iter()
        .filter(|c| c.speedup >= 0.2 && c.accuracy >= baseline - 0.01)
        .max_by(|a, b| a.speedup.total_cmp(&b.speedup));
    let frontier = pareto_frontier(&grid).len();
    let detail = match best {
        Some(c) => format!(
            "budgeted(M) accuracy {baseline:.4}; fastest qualifying cell tau={} patience={} speedup {:.4} accuracy {:.4}; {frontier} frontier points",
            c.config.tau, c.config.patience, c.speedup, c.accuracy
        ),
        None => format!("budgeted(M) accuracy {baseline:.4}; no cell with speedup >= 0.2 within 0.01"),
    };
    out.push(Outcome::new("overthinking (ambiguous 0.3)", best.is_some(), detail));
}

/// Every artifact of a toy run as bytes: checkpoint, trace file, grid and
/// curve CSVs.
fn artifacts(run: &Trained) -> Vec<(&'static str, Vec<u8>)> {
    let traces = export_traces(&run.model, &run.data, Split::Test).unwrap();
    let mut trace_bytes = Vec::new();
    epee::trace::write_traces(&mut trace_bytes, &traces).unwrap();
    let taus = [0.0, 0.25, 0.5, 0.75, 1.0];
    let grid = grid_search(&traces, &taus, &[1, 2, 3, 6]).unwrap();
    vec![
        ("checkpoint", checkpoint::to_bytes(&run.model)),
        ("traces", trace_bytes),
        ("grid csv", grid_csv(&grid).into_bytes()),
        ("curve csv", curve_csv(&budgeted_curve(&traces).unwrap()).into_bytes()),
    ]
}

fn determinism_criterion(out: &mut Vec<Outcome>, first: &Trained) {
    let second = train_toy(0.1);
    let (a, b) = (artifacts(first), artifacts(&second));
    let differing: Vec<&str> = a.iter().zip(&b).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0).collect();
    out.push(Outcome::new(
        "determinism (checkpoint, traces, CSVs)",
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} artifacts byte-identical across two runs", a.len())
        } else {
            format!("differing: {differing:?}")
        },
    ));
}

#[test]
fn acceptance() {
    let mut out = Vec::new();
    policy_criteria(&mut out);
    speedup_criterion(&mut out);
    gradient_criterion(&mut out);
    let toy = train_toy(0.1);
    toy_training_criterion(&mut out, &toy);
    overthinking_criterion(&mut out);
    determinism_criterion(&mut out, &toy);

    let failed: Vec<String> = out
        .iter()
        .filter(|o| !o.passed)
        .map(|o| format!("{}: {}", o.name, o.detail))
        .collect();
    report(&format!("{} of {} criteria passed", out.len() - failed.len(), out.len()));
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
