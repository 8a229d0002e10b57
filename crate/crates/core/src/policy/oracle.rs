//! Reference implementation of the exit rules, written independently of
//! [`decide_exit`](super::decide_exit): it recomputes entropies and argmaxes
//! from the raw distributions (in the trace's own precision, so thresholds
//! placed exactly on a cached entropy compare the same way), tabulates the patience counter for every
//! layer up front and then scans for the first layer that satisfies a rule.
//! Used to cross-check the main engine.

use crate::error::{Error, Result};
use crate::policy::{ExitOutcome, ExitPolicyConfig, Strategy, Trigger};
use crate::scalar::Scalar;
use crate::trace::PredictionTrace;

pub fn decide_exit_oracle<T: Scalar>(trace: &PredictionTrace<T>, cfg: &ExitPolicyConfig) -> Result<ExitOutcome> {
    let probs = &trace.probs;
    let m = probs.len();
    if m == 0 {
        return Err(Error::input("oracle: empty trace"));
    }
    if cfg.tau < 0.0 || cfg.tau > 1.0 {
        return Err(Error::input("oracle: tau out of range"));
    }
    if cfg.patience == 0 || cfg.patience > m || cfg.budget_layer == 0 || cfg.budget_layer > m {
        return Err(Error::input(format!("oracle: config does not fit {m} layers")));
    }

    let mut top = vec![0usize; m];
    let mut ent = vec![0.0f64; m];
    let zero = T::zero();
    for i in 0..m {
        let k = probs[i].len();
        if k < 2 {
            return Err(Error::input("oracle: fewer than two classes"));
        }
        let mut best = 0;
        let mut h = zero;
        for j in 0..k {
            if probs[i][j] > probs[i][best] {
                best = j;
            }
            if probs[i][j] > zero {
                h -= probs[i][j] * probs[i][j].ln();
            }
        }
        top[i] = best;
        let h = h / T::of_usize(k).ln();
        ent[i] = h.max(zero).min(T::one()).as_f64();
    }

    let outcome = |layer: usize, why: Trigger| ExitOutcome {
        exit_layer: layer,
        predicted_class: top[layer - 1],
        layers_used: layer,
        triggered_by: why,
    };

    if cfg.strategy == Strategy::Budgeted {
        return Ok(outcome(cfg.budget_layer, Trigger::Budget));
    }

    let mut counters = vec![1usize; m];
    for i in 1..m {
        if top[i] == top[i - 1] {
            counters[i] = counters[i - 1] + 1;
        }
    }

    let entropy_on = cfg.strategy == Strategy::Entropy || cfg.strategy == Strategy::Epee;
    let patience_on = cfg.strategy == Strategy::Patience || cfg.strategy == Strategy::Epee;
    for i in 0..m {
        if entropy_on && ent[i] < cfg.tau {
            return Ok(outcome(i + 1, Trigger::EntropyRule));
        }
        if patience_on && counters[i] == cfg.patience {
            return Ok(outcome(i + 1, Trigger::PatienceRule));
        }
    }
    Ok(outcome(m, Trigger::FinalLayerFallback))
}
