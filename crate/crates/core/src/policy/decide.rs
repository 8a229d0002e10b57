use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{patience_update, ExitPolicyConfig, Strategy};
use crate::scalar::Scalar;
use crate::trace::PredictionTrace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    EntropyRule,
    PatienceRule,
    FinalLayerFallback,
    Budget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExitOutcome {
    /// 1-based exit layer.
    pub exit_layer: usize,
    pub predicted_class: usize,
    /// Transformer blocks executed; always equal to `exit_layer`.
    pub layers_used: usize,
    pub triggered_by: Trigger,
}

impl ExitOutcome {
    fn at<T>(trace: &PredictionTrace<T>, layer: usize, triggered_by: Trigger) -> Self {
        Self {
            exit_layer: layer,
            predicted_class: trace.argmax[layer - 1],
            layers_used: layer,
            triggered_by,
        }
    }
}

/// Walks the exits of one trace in order and returns where it leaves the
/// network.
///
/// At each layer the patience counter is first advanced with that layer's
/// argmax, then the entropy rule (`H < tau`, strict) and the patience rule
/// (`counter >= patience`) are tested. When both fire at the same layer the
/// outcome is attributed to the entropy rule. If nothing fires the last
/// layer answers. Reads the cached `entropy` and `argmax` of the trace.
pub fn decide_exit<T: Scalar>(trace: &PredictionTrace<T>, cfg: &ExitPolicyConfig) -> Result<ExitOutcome> {
    let m = trace.num_layers();
    if m == 0 || trace.entropy.len() != m || trace.argmax.len() != m {
        return Err(Error::input(format!(
            "trace {} is malformed for exit decisions",
            trace.sample_id
        )));
    }
    cfg.validate(m)
        .map_err(|e| Error::input(format!("trace {} has {m} layers: {e}", trace.sample_id)))?;

    if cfg.strategy == Strategy::Budgeted {
        return Ok(ExitOutcome::at(trace, cfg.budget_layer, Trigger::Budget));
    }

    let use_entropy = cfg.strategy.uses_entropy();
    let use_patience = cfg.strategy.uses_patience();
    let mut counter = 0;
    let mut prev = None;
    for layer in 1..=m {
        let cur = trace.argmax[layer - 1];
        counter = patience_update(counter, prev, cur);
        prev = Some(cur);

        if use_entropy && trace.entropy[layer - 1].as_f64() < cfg.tau {
            return Ok(ExitOutcome::at(trace, layer, Trigger::EntropyRule));
        }
        if use_patience && counter >= cfg.patience {
            // Increments are by one and we stop the first time the threshold is met.
            debug_assert_eq!(counter, cfg.patience);
            return Ok(ExitOutcome::at(trace, layer, Trigger::PatienceRule));
        }
    }
    Ok(ExitOutcome::at(trace, m, Trigger::FinalLayerFallback))
}
