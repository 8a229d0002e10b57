use crate::error::{Error, Result};
use crate::model::WeightScheme;
use crate::scalar::Scalar;
use crate::tensor::{Graph, NodeId, LOG_CLAMP_FLOOR};
use crate::trace::PredictionTrace;

/// Weighted average of the per-exit cross-entropies of one sample,
/// `Σ w_m·CE_m / Σ w_m`, built on the graph so it can be differentiated.
/// `exits` are the `1 x |K|` probability nodes, shallowest first.
pub fn joint_loss_node<T: Scalar>(
    g: &mut Graph<T>,
    exits: &[NodeId],
    label: usize,
    scheme: WeightScheme,
) -> Result<NodeId> {
    if exits.is_empty() {
        return Err(Error::input("joint loss over zero exits"));
    }
    let weights: Vec<T> = scheme.weights(exits.len());
    let total: T = weights.iter().copied().sum();
    let mut acc: Option<NodeId> = None;
    for (&exit, &w) in exits.iter().zip(&weights) {
        let ce = g.cross_entropy(exit, 0, label)?;
        let term = g.scale(ce, w / total)?;
        acc = Some(match acc {
            None => term,
            Some(prev) => g.add(prev, term)?,
        });
    }
    Ok(acc.expect("at least one exit"))
}

/// Batch mean of the weighted per-exit cross-entropy, evaluated directly on
/// stored distributions.
pub fn joint_loss<T: Scalar>(traces: &[PredictionTrace<T>], scheme: WeightScheme) -> Result<T> {
    if traces.is_empty() {
        return Err(Error::input("joint loss of an empty batch"));
    }
    let floor = T::of(LOG_CLAMP_FLOOR);
    let mut sum = T::zero();
    for t in traces {
        if t.gold >= t.num_classes() {
            return Err(Error::input(format!("gold label {} out of range", t.gold)));
        }
        let weights: Vec<T> = scheme.weights(t.num_layers());
        let total: T = weights.iter().copied().sum();
        let weighted: T = t
            .probs
            .iter()
            .zip(&weights)
            .map(|(row, &w)| w * -(row[t.gold].max(floor)).ln())
            .sum();
        sum += weighted / total;
    }
    Ok(sum / T::of_usize(traces.len()))
}
