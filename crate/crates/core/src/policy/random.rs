//! Random trace corpora for property checks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::policy::ExitPolicyConfig;
use crate::scalar::Scalar;
use crate::trace::PredictionTrace;

/// Shape ranges for [`random_traces`], inclusive.
#[derive(Clone, Copy, Debug)]
pub struct RandomTraceSpec {
    pub layers: (usize, usize),
    pub classes: (usize, usize),
}

impl Default for RandomTraceSpec {
    fn default() -> Self {
        Self {
            layers: (2, 12),
            classes: (2, 8),
        }
    }
}

/// Generates `n` valid traces with varied depth and width.
///
/// Rows mix one-hot, exactly uniform and softmax-of-random-logits
/// distributions. A "sticky" class that only occasionally changes between
/// layers keeps argmax runs long enough for the patience rule to matter.
pub fn random_traces<T: Scalar>(n: usize, seed: u64, spec: RandomTraceSpec) -> Vec<PredictionTrace<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| random_trace(&mut rng, i, spec)).collect()
}

fn random_trace<T: Scalar>(rng: &mut ChaCha8Rng, id: usize, spec: RandomTraceSpec) -> PredictionTrace<T> {
    let m = rng.gen_range(spec.layers.0..=spec.layers.1);
    let k = rng.gen_range(spec.classes.0..=spec.classes.1);
    let switch_prob = rng.gen_range(0.0..0.6);
    let mut sticky = rng.gen_range(0..k);
    let mut probs = Vec::with_capacity(m);
    for _ in 0..m {
        if rng.gen_bool(switch_prob) {
            sticky = rng.gen_range(0..k);
        }
        let kind: f64 = rng.gen();
        let row: Vec<f64> = if kind < 0.1 {
            let mut r = vec![0.0; k];
            r[sticky] = 1.0;
            r
        } else if kind < 0.2 {
            vec![1.0 / k as f64; k]
        } else {
            let temperature = rng.gen_range(0.0..6.0);
            let boost = rng.gen_range(0.0..4.0);
            let mut logits: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0) * temperature).collect();
            logits[sticky] += boost;
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            exps.iter().map(|e| e / z).collect()
        };
        probs.push(row.into_iter().map(T::of).collect());
    }
    let gold = rng.gen_range(0..k);
    PredictionTrace::from_probs(id.to_string(), gold, probs).expect("generated rows are distributions")
}

/// Draws an entropy threshold: mostly uniform in `[0, 1]`, with extra mass
/// on the endpoints and on the trace's own entropies (the strict-inequality
/// boundary).
pub fn random_tau<T: Scalar>(rng: &mut impl Rng, trace: &PredictionTrace<T>) -> f64 {
    let u: f64 = rng.gen();
    if u < 0.1 {
        0.0
    } else if u < 0.2 {
        1.0
    } else if u < 0.3 {
        trace.entropy[rng.gen_range(0..trace.num_layers())].as_f64()
    } else {
        rng.gen_range(0.0..=1.0)
    }
}

/// One random configuration of each strategy for `trace`.
pub fn random_configs<T: Scalar>(rng: &mut impl Rng, trace: &PredictionTrace<T>) -> [ExitPolicyConfig; 4] {
    let m = trace.num_layers();
    [
        ExitPolicyConfig::entropy(random_tau(rng, trace)),
        ExitPolicyConfig::patience(rng.gen_range(1..=m)),
        ExitPolicyConfig::epee(random_tau(rng, trace), rng.gen_range(1..=m)),
        ExitPolicyConfig::budgeted(rng.gen_range(1..=m)),
    ]
}
