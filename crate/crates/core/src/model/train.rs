use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::model::{joint_loss_node, MultiExitModel, TrainConfig};
use crate::policy::argmax;
use crate::scalar::Scalar;
use crate::tensor::{Graph, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean joint training loss of each epoch.
    pub epoch_loss: Vec<f64>,
    /// Dev accuracy of every exit after each epoch (`[epoch][layer]`).
    pub dev_accuracy: Vec<Vec<f64>>,
}

/// Accuracy of each exit's argmax on `split`.
pub fn per_layer_accuracy<T: Scalar>(model: &MultiExitModel<T>, data: &Dataset, split: Split) -> Result<Vec<f64>> {
    let encoded = data.encoded(split, model.config().max_seq_len);
    if encoded.is_empty() {
        return Ok(Vec::new());
    }
    let hits = encoded
        .par_iter()
        .map(|(_, tokens, label)| {
            let dists = model.exit_distributions(tokens)?;
            Ok(dists
                .iter()
                .map(|d| usize::from(argmax(d) == *label))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let m = model.num_layers();
    let n = encoded.len() as f64;
    Ok((0..m)
        .map(|l| hits.iter().map(|h| h[l]).sum::<usize>() as f64 / n)
        .collect())
}

/// Mini-batch SGD with momentum on the joint exit loss. Every sample in a
/// batch is run on its own (sequences keep their own length); the batch
/// gradient is the mean over samples. Deterministic for a fixed seed.
pub fn train<T: Scalar>(model: &mut MultiExitModel<T>, data: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let mcfg = model.config().clone();
    if data.num_classes != mcfg.num_classes {
        return Err(Error::config(format!(
            "dataset has {} classes, model has {}",
            data.num_classes, mcfg.num_classes
        )));
    }
    if data.vocab.len() > mcfg.vocab_size {
        return Err(Error::config(format!(
            "dataset vocabulary ({}) larger than model vocab_size ({})",
            data.vocab.len(),
            mcfg.vocab_size
        )));
    }
    let train_set = data.encoded(Split::Train, mcfg.max_seq_len);
    if train_set.is_empty() {
        return Err(Error::input("training split is empty"));
    }

    let lr = T::of(cfg.learning_rate);
    let momentum = T::of(cfg.momentum);
    let mut velocity: Vec<Matrix<T>> = model
        .params()
        .iter()
        .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut report = TrainReport {
        epoch_loss: Vec::with_capacity(cfg.epochs),
        dev_accuracy: Vec::with_capacity(cfg.epochs),
    };

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            let diverged = |e: Error| match e {
                Error::NonFinite { .. } => Error::Divergence {
                    epoch: epoch + 1,
                    step,
                    loss: f64::NAN,
                },
                other => other,
            };
            let mut g = Graph::new();
            let params = model.bind(&mut g)?;
            let mut total = None;
            for &i in batch {
                let (_, tokens, label) = &train_set[i];
                let exits = model.forward_graph(&mut g, &params, tokens).map_err(diverged)?;
                let loss = joint_loss_node(&mut g, &exits, *label, cfg.weight_scheme).map_err(diverged)?;
                total = Some(match total {
                    None => loss,
                    Some(prev) => g.add(prev, loss).map_err(diverged)?,
                });
            }
            let total = total.expect("non-empty batch");
            let mean = g.scale(total, T::one() / T::of_usize(batch.len())).map_err(diverged)?;
            let loss = g.value(mean).item().as_f64();
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch: epoch + 1,
                    step,
                    loss,
                });
            }
            g.backward(mean).map_err(diverged)?;

            for ((p, v), &id) in model.params_mut().iter_mut().zip(&mut velocity).zip(&params) {
                let grad = g.grad(id).expect("parameter gradient");
                for ((w, vel), &d) in p.value.data_mut().iter_mut().zip(v.data_mut()).zip(grad.data()) {
                    *vel = momentum * *vel + d;
                    *w -= lr * *vel;
                }
                if !p.value.is_finite() {
                    return Err(Error::Divergence {
                        epoch: epoch + 1,
                        step,
                        loss: f64::NAN,
                    });
                }
            }
            epoch_loss += loss * batch.len() as f64;
        }
        let epoch_loss = epoch_loss / train_set.len() as f64;
        let dev = per_layer_accuracy(model, data, Split::Dev)?;
        log::info!(
            "epoch {}: loss {epoch_loss:.4}, dev accuracy by exit [{}]",
            epoch + 1,
            dev.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>().join(", ")
        );
        report.epoch_loss.push(epoch_loss);
        report.dev_accuracy.push(dev);
    }
    Ok(report)
}
