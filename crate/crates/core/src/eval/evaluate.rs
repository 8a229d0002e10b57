use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::{accuracy, macro_f1, speedup_ratio};
use crate::policy::{decide_exit, ExitPolicyConfig};
use crate::scalar::Scalar;
use crate::trace::{common_shape, PredictionTrace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub config: ExitPolicyConfig,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub speedup: f64,
    /// Number of samples leaving at each layer; index 0 is layer 1.
    pub exit_histogram: Vec<usize>,
    pub n_samples: usize,
}

/// Applies one exit policy to every trace and scores the outcome.
pub fn evaluate<T: Scalar>(traces: &[PredictionTrace<T>], cfg: &ExitPolicyConfig) -> Result<EvalResult> {
    let (m, k) = common_shape(traces)?;
    cfg.validate(m).map_err(|e| Error::input(e.to_string()))?;
    let outcomes = traces
        .par_iter()
        .map(|t| decide_exit(t, cfg))
        .collect::<Result<Vec<_>>>()?;

    let predicted: Vec<usize> = outcomes.iter().map(|o| o.predicted_class).collect();
    let gold: Vec<usize> = traces.iter().map(|t| t.gold).collect();
    let exits: Vec<usize> = outcomes.iter().map(|o| o.exit_layer).collect();
    let mut exit_histogram = vec![0; m];
    for &e in &exits {
        exit_histogram[e - 1] += 1;
    }
    Ok(EvalResult {
        config: *cfg,
        accuracy: accuracy(&predicted, &gold),
        macro_f1: macro_f1(&predicted, &gold, k),
        speedup: speedup_ratio(&exits, m)?,
        exit_histogram,
        n_samples: traces.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerStat {
    pub layer: usize,
    pub accuracy: f64,
    pub mean_entropy: f64,
}

/// Accuracy and mean normalized entropy of every exit used on its own.
pub fn budgeted_curve<T: Scalar>(traces: &[PredictionTrace<T>]) -> Result<Vec<LayerStat>> {
    let (m, _) = common_shape(traces)?;
    let n = traces.len() as f64;
    Ok((0..m)
        .map(|l| {
            let hits = traces.iter().filter(|t| t.argmax[l] == t.gold).count();
            let entropy: f64 = traces.iter().map(|t| t.entropy[l].as_f64()).sum();
            LayerStat {
                layer: l + 1,
                accuracy: hits as f64 / n,
                mean_entropy: entropy / n,
            }
        })
        .collect())
}
