//! Finite-difference checks of every graph op and of the full joint loss.

use epee::model::{joint_loss_node, ModelConfig, WeightScheme};
use epee::tensor::{grad_check, grad_check_many, Graph, NodeId};
use epee::{Matrix64, Model, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-6;
const TOL: f64 = 1e-6;

/// Random matrix whose entries stay at least 0.05 away from zero, so ReLU
/// kinks are never inside the finite-difference stencil.
fn away_from_zero(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix64 {
    let data = (0..r * c)
        .map(|_| {
            let x: f64 = rng.gen_range(0.05..1.0);
            if rng.gen_bool(0.5) {
                x
            } else {
                -x
            }
        })
        .collect();
    Matrix64::from_vec(r, c, data).unwrap()
}

/// Reduces any node to a scalar through a fixed random weighting, so every
/// output entry contributes a distinct gradient.
fn weighted_sum(g: &mut Graph<f64>, x: NodeId, seed: u64) -> Result<NodeId> {
    let (r, c) = g.value(x).shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = g.leaf(away_from_zero(&mut rng, r, c))?;
    let prod = g.mul(x, w)?;
    g.sum(prod)
}

fn check_unary(name: &str, shape: (usize, usize), op: impl Fn(&mut Graph<f64>, NodeId) -> Result<NodeId>) {
    let mut rng = ChaCha8Rng::seed_from_u64(name.len() as u64);
    for trial in 0..5 {
        let x = away_from_zero(&mut rng, shape.0, shape.1);
        let err = grad_check(
            |g, id| {
                let y = op(g, id)?;
                weighted_sum(g, y, trial)
            },
            &x,
            EPS,
        )
        .unwrap();
        assert!(err < TOL, "{name}: relative error {err}");
    }
}

fn check_binary(
    name: &str,
    a: (usize, usize),
    b: (usize, usize),
    op: impl Fn(&mut Graph<f64>, NodeId, NodeId) -> Result<NodeId>,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(100 + name.len() as u64);
    for trial in 0..5 {
        let params = [away_from_zero(&mut rng, a.0, a.1), away_from_zero(&mut rng, b.0, b.1)];
        let err = grad_check_many(
            |g, ids| {
                let y = op(g, ids[0], ids[1])?;
                weighted_sum(g, y, trial)
            },
            &params,
            EPS,
        )
        .unwrap();
        assert!(err < TOL, "{name}: relative error {err}");
    }
}

#[test]
fn matmul() {
    check_binary("matmul", (3, 4), (4, 2), |g, a, b| g.matmul(a, b));
}

#[test]
fn add_and_mul() {
    check_binary("add", (3, 4), (3, 4), |g, a, b| g.add(a, b));
    check_binary("mul", (3, 4), (3, 4), |g, a, b| g.mul(a, b));
}

#[test]
fn row_broadcasts() {
    check_binary("add_row", (3, 4), (1, 4), |g, a, b| g.add_row(a, b));
    check_binary("mul_row", (3, 4), (1, 4), |g, a, b| g.mul_row(a, b));
}

#[test]
fn scale_and_transpose() {
    check_unary("scale", (2, 5), |g, x| g.scale(x, -1.7));
    check_unary("transpose", (2, 5), |g, x| g.transpose(x));
}

#[test]
fn relu() {
    check_unary("relu", (4, 4), |g, x| g.relu(x));
}

#[test]
fn softmax_rows() {
    check_unary("softmax", (3, 5), |g, x| g.softmax_rows(x));
}

#[test]
fn layer_norm_rows() {
    check_unary("layer_norm", (3, 6), |g, x| g.layer_norm_rows(x, 1e-5));
}

#[test]
fn slice_and_concat() {
    check_unary("slice", (3, 6), |g, x| g.slice_cols(x, 2, 3));
    check_unary("concat", (3, 6), |g, x| {
        let a = g.slice_cols(x, 0, 2)?;
        let b = g.slice_cols(x, 2, 4)?;
        g.concat_cols(&[b, a])
    });
}

#[test]
fn gather_rows_with_repeats() {
    check_unary("gather", (5, 3), |g, x| g.gather_rows(x, &[4, 0, 4, 2]));
}

#[test]
fn cross_entropy() {
    check_unary("cross_entropy", (2, 4), |g, x| {
        let p = g.softmax_rows(x)?;
        let a = g.cross_entropy(p, 0, 3)?;
        let b = g.cross_entropy(p, 1, 1)?;
        g.add(a, b)
    });
}

#[test]
fn sum() {
    check_unary("sum", (3, 3), |g, x| g.sum(x));
}

fn tiny_config() -> ModelConfig {
    ModelConfig {
        vocab_size: 10,
        num_layers: 2,
        hidden_dim: 8,
        num_heads: 2,
        ffn_dim: 16,
        num_classes: 3,
        max_seq_len: 6,
        seed: 5,
    }
}

/// Largest relative error of the joint-loss gradient over all parameters.
fn joint_loss_error(scheme: WeightScheme) -> f64 {
    let model = Model::new(tiny_config()).unwrap();
    let values: Vec<Matrix64> = model.params().iter().map(|p| p.value.clone()).collect();
    let tokens = [3, 7, 2, 9, 4];
    grad_check_many(
        |g, ids| {
            let exits = model.forward_graph(g, ids, &tokens)?;
            joint_loss_node(g, &exits, 1, scheme)
        },
        &values,
        EPS,
    )
    .unwrap()
}

#[test]
fn joint_loss_matches_finite_differences() {
    for scheme in [WeightScheme::LinearCost, WeightScheme::Uniform] {
        let err = joint_loss_error(scheme);
        assert!(err < 1e-4, "{scheme:?}: {err}");
    }
}
