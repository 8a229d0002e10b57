//! Invariant suites over a trace corpus: the two reductions of the hybrid
//! rule to its single-criterion parents, agreement with the reference
//! oracle, and monotonicity in each threshold.

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::policy::random::{random_configs, random_tau};
use crate::policy::{decide_exit, decide_exit_oracle, ExitPolicyConfig};
use crate::scalar::Scalar;
use crate::trace::PredictionTrace;

/// Thresholds swept by the tau-monotonicity suite: 0.00, 0.05, ..., 1.00.
pub fn tau_sweep() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// EPEE(tau, M) exits where Entropy(tau) does.
    DegeneracyEntropy,
    /// EPEE(0, P) is Patience(P) in every field.
    DegeneracyPatience,
    /// Engine and reference oracle agree field for field.
    OracleEquivalence,
    /// Exit layer never grows as tau grows.
    MonotoneTau,
    /// Exit layer never shrinks as patience grows.
    MonotonePatience,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::DegeneracyEntropy,
        Suite::DegeneracyPatience,
        Suite::OracleEquivalence,
        Suite::MonotoneTau,
        Suite::MonotonePatience,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::DegeneracyEntropy => "degeneracy-entropy",
            Suite::DegeneracyPatience => "degeneracy-patience",
            Suite::OracleEquivalence => "oracle-equivalence",
            Suite::MonotoneTau => "monotone-tau",
            Suite::MonotonePatience => "monotone-patience",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub cases: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<22} {:<4} {:>9} cases {:>6} failures",
            self.suite.name(),
            if self.passed() { "PASS" } else { "FAIL" },
            self.cases,
            self.failures
        )?;
        if let Some(why) = &self.first_failure {
            write!(f, "  first: {why}")?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct Tally {
    cases: usize,
    failures: usize,
    first: Option<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.first.is_none() {
                self.first = Some(describe());
            }
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.cases += other.cases;
        self.failures += other.failures;
        if self.first.is_none() {
            self.first = other.first;
        }
        self
    }
}

/// Runs every suite over `traces`. Random thresholds are drawn from a
/// per-trace stream of `seed`, so the result does not depend on scheduling.
/// Errors only if a trace cannot be evaluated at all.
pub fn run_suites<T: Scalar>(traces: &[PredictionTrace<T>], seed: u64) -> Result<Vec<SuiteReport>> {
    let per_trace = traces
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            check_trace(t, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut totals: Vec<Tally> = Suite::ALL.iter().map(|_| Tally::default()).collect();
    for tallies in per_trace {
        totals = totals.into_iter().zip(tallies).map(|(a, b)| a.merge(b)).collect();
    }
    Ok(Suite::ALL
        .iter()
        .zip(totals)
        .map(|(&suite, t)| SuiteReport {
            suite,
            cases: t.cases,
            failures: t.failures,
            first_failure: t.first,
        })
        .collect())
}

fn check_trace<T: Scalar>(trace: &PredictionTrace<T>, rng: &mut ChaCha8Rng) -> Result<Vec<Tally>> {
    let m = trace.num_layers();
    let id = &trace.sample_id;
    let mut tallies: Vec<Tally> = Suite::ALL.iter().map(|_| Tally::default()).collect();

    let tau = random_tau(rng, trace);
    let hybrid = decide_exit(trace, &ExitPolicyConfig::epee(tau, m))?;
    let entropy = decide_exit(trace, &ExitPolicyConfig::entropy(tau))?;
    tallies[0].check(
        hybrid.exit_layer == entropy.exit_layer && hybrid.predicted_class == entropy.predicted_class,
        || format!("trace {id}, tau {tau}: {hybrid:?} vs {entropy:?}"),
    );

    let patience = rng.gen_range(1..=m);
    let hybrid = decide_exit(trace, &ExitPolicyConfig::epee(0.0, patience))?;
    let plain = decide_exit(trace, &ExitPolicyConfig::patience(patience))?;
    tallies[1].check(hybrid == plain, || {
        format!("trace {id}, patience {patience}: {hybrid:?} vs {plain:?}")
    });

    for cfg in random_configs(rng, trace) {
        let fast = decide_exit(trace, &cfg)?;
        let slow = decide_exit_oracle(trace, &cfg)?;
        tallies[2].check(fast == slow, || format!("trace {id}, {cfg:?}: {fast:?} vs {slow:?}"));
    }

    let patience = rng.gen_range(1..=m);
    let mut last = usize::MAX;
    for tau in tau_sweep() {
        let layer = decide_exit(trace, &ExitPolicyConfig::epee(tau, patience))?.exit_layer;
        tallies[3].check(layer <= last, || {
            format!("trace {id}, patience {patience}: exit rose to {layer} at tau {tau}")
        });
        last = layer;
    }

    let tau = random_tau(rng, trace);
    let mut last = 0;
    for patience in 1..=m {
        let layer = decide_exit(trace, &ExitPolicyConfig::epee(tau, patience))?.exit_layer;
        tallies[4].check(layer >= last, || {
            format!("trace {id}, tau {tau}: exit fell to {layer} at patience {patience}")
        });
        last = layer;
    }

    Ok(tallies)
}
