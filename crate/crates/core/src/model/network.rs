use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::PAD;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::scalar::Scalar;
use crate::tensor::{Graph, Matrix, NodeId};
use crate::trace::PredictionTrace;

/// Weights are drawn from `U(-INIT_RANGE, INIT_RANGE)`.
pub const INIT_RANGE: f64 = 0.05;
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Parameter matrices per transformer block.
const BLOCK_PARAMS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    Uniform,
    Zeros,
    Ones,
}

/// Declared name, shape and initializer of one parameter matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: (usize, usize),
    pub init: Init,
}

/// Named parameter matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub value: Matrix<T>,
}

/// Transformer encoder with a linear + softmax classifier after every block.
///
/// Blocks are post-norm: `x = LN(x + MHA(x))`, `x = LN(x + FFN(x))` with a
/// ReLU feed-forward. Exit `m` reads only the first-position hidden state of
/// block `m`. Trailing `[PAD]` positions are dropped before the encoder, so
/// padding never takes part in attention.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiExitModel<T> {
    config: ModelConfig,
    params: Vec<Param<T>>,
}

/// All parameters in declaration order.
pub fn param_layout(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let spec = |name: String, shape, init| ParamSpec { name, shape, init };
    let d = cfg.hidden_dim;
    let f = cfg.ffn_dim;
    let mut out = vec![
        spec("token_embedding".into(), (cfg.vocab_size, d), Init::Uniform),
        spec("position_embedding".into(), (cfg.max_seq_len, d), Init::Uniform),
    ];
    for l in 0..cfg.num_layers {
        let blocks = [
            ("attn.wq", (d, d), Init::Uniform),
            ("attn.bq", (1, d), Init::Zeros),
            ("attn.wk", (d, d), Init::Uniform),
            ("attn.bk", (1, d), Init::Zeros),
            ("attn.wv", (d, d), Init::Uniform),
            ("attn.bv", (1, d), Init::Zeros),
            ("attn.wo", (d, d), Init::Uniform),
            ("attn.bo", (1, d), Init::Zeros),
            ("ln1.gain", (1, d), Init::Ones),
            ("ln1.bias", (1, d), Init::Zeros),
            ("ffn.w1", (d, f), Init::Uniform),
            ("ffn.b1", (1, f), Init::Zeros),
            ("ffn.w2", (f, d), Init::Uniform),
            ("ffn.b2", (1, d), Init::Zeros),
            ("ln2.gain", (1, d), Init::Ones),
            ("ln2.bias", (1, d), Init::Zeros),
        ];
        debug_assert_eq!(blocks.len(), BLOCK_PARAMS);
        out.extend(
            blocks
                .into_iter()
                .map(|(n, shape, init)| spec(format!("block{l}.{n}"), shape, init)),
        );
    }
    for m in 0..cfg.num_layers {
        out.push(spec(format!("exit{m}.weight"), (d, cfg.num_classes), Init::Uniform));
        out.push(spec(format!("exit{m}.bias"), (1, cfg.num_classes), Init::Zeros));
    }
    out
}

fn block_base(layer: usize) -> usize {
    2 + layer * BLOCK_PARAMS
}

impl<T: Scalar> MultiExitModel<T> {
    /// Fresh model: weights `U(-0.05, 0.05)` from `config.seed`, biases zero,
    /// layer-norm gains one.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = param_layout(&config)
            .into_iter()
            .map(
                |ParamSpec {
                     name,
                     shape: (r, c),
                     init,
                 }| {
                    let value = match init {
                        Init::Ones => Matrix::filled(r, c, T::one()),
                        Init::Zeros => Matrix::zeros(r, c),
                        Init::Uniform => {
                            let data = (0..r * c)
                                .map(|_| T::of(rng.gen_range(-INIT_RANGE..INIT_RANGE)))
                                .collect();
                            Matrix::from_vec(r, c, data).expect("layout shape")
                        }
                    };
                    Param { name, value }
                },
            )
            .collect();
        Ok(Self { config, params })
    }

    /// Rebuilds a model from stored parameters, checking names and shapes.
    pub fn from_params(config: ModelConfig, values: Vec<Matrix<T>>) -> Result<Self> {
        config.validate()?;
        let layout = param_layout(&config);
        if layout.len() != values.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter matrices, found {}",
                layout.len(),
                values.len()
            )));
        }
        let params = layout
            .into_iter()
            .zip(values)
            .map(|(ParamSpec { name, shape, .. }, value)| {
                if value.shape() != shape {
                    return Err(Error::Checkpoint(format!(
                        "{name}: expected shape {shape:?}, found {:?}",
                        value.shape()
                    )));
                }
                if !value.is_finite() {
                    return Err(Error::Checkpoint(format!("{name} holds non-finite values")));
                }
                Ok(Param { name, value })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn num_layers(&self) -> usize {
        self.config.num_layers
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    /// Sets every exit classifier's weights and biases to zero, which makes
    /// every exit predict the uniform distribution.
    pub fn zero_exit_heads(&mut self) {
        let start = block_base(self.config.num_layers);
        for p in &mut self.params[start..] {
            let (r, c) = p.value.shape();
            p.value = Matrix::zeros(r, c);
        }
    }

    /// Checks token ids and strips trailing padding (keeping one position).
    pub fn prepare_tokens<'a>(&self, tokens: &'a [usize]) -> Result<&'a [usize]> {
        if tokens.is_empty() {
            return Err(Error::input("empty token sequence"));
        }
        if tokens.len() > self.config.max_seq_len {
            return Err(Error::input(format!(
                "sequence of {} tokens exceeds max_seq_len {}",
                tokens.len(),
                self.config.max_seq_len
            )));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t >= self.config.vocab_size) {
            return Err(Error::input(format!(
                "token id {bad} outside vocabulary of {}",
                self.config.vocab_size
            )));
        }
        let len = tokens.iter().rposition(|&t| t != PAD).map_or(1, |i| i + 1);
        Ok(&tokens[..len])
    }

    /// Puts every parameter on `g` as a leaf, in declaration order.
    pub fn bind(&self, g: &mut Graph<T>) -> Result<Vec<NodeId>> {
        self.params.iter().map(|p| g.leaf(p.value.clone())).collect()
    }

    /// Builds the forward pass on `g` and returns one `1 x |K|` probability
    /// node per exit, shallowest first. `params` comes from [`Self::bind`].
    pub fn forward_graph(&self, g: &mut Graph<T>, params: &[NodeId], tokens: &[usize]) -> Result<Vec<NodeId>> {
        let cfg = &self.config;
        let tokens = self.prepare_tokens(tokens)?;
        let positions: Vec<usize> = (0..tokens.len()).collect();

        let tok = g.gather_rows(params[0], tokens)?;
        let pos = g.gather_rows(params[1], &positions)?;
        let mut x = g.add(tok, pos)?;

        let eps = T::of(LAYER_NORM_EPS);
        let dh = cfg.head_dim();
        let attn_scale = T::one() / T::of_usize(dh).sqrt();
        let head_base = block_base(cfg.num_layers);
        let mut exits = Vec::with_capacity(cfg.num_layers);

        for layer in 0..cfg.num_layers {
            let p = &params[block_base(layer)..block_base(layer + 1)];
            let linear = |g: &mut Graph<T>, input, w, b| -> Result<NodeId> {
                let h = g.matmul(input, w)?;
                g.add_row(h, b)
            };

            let q = linear(g, x, p[0], p[1])?;
            let k = linear(g, x, p[2], p[3])?;
            let v = linear(g, x, p[4], p[5])?;
            let mut heads = Vec::with_capacity(cfg.num_heads);
            for h in 0..cfg.num_heads {
                let qh = g.slice_cols(q, h * dh, dh)?;
                let kh = g.slice_cols(k, h * dh, dh)?;
                let vh = g.slice_cols(v, h * dh, dh)?;
                let kt = g.transpose(kh)?;
                let scores = g.matmul(qh, kt)?;
                let scores = g.scale(scores, attn_scale)?;
                let weights = g.softmax_rows(scores)?;
                heads.push(g.matmul(weights, vh)?);
            }
            let attn = g.concat_cols(&heads)?;
            let attn = linear(g, attn, p[6], p[7])?;
            let res = g.add(x, attn)?;
            let norm = g.layer_norm_rows(res, eps)?;
            let norm = g.mul_row(norm, p[8])?;
            x = g.add_row(norm, p[9])?;

            let hidden = linear(g, x, p[10], p[11])?;
            let hidden = g.relu(hidden)?;
            let ffn = linear(g, hidden, p[12], p[13])?;
            let res = g.add(x, ffn)?;
            let norm = g.layer_norm_rows(res, eps)?;
            let norm = g.mul_row(norm, p[14])?;
            x = g.add_row(norm, p[15])?;

            let pooled = g.gather_rows(x, &[0])?;
            let logits = g.matmul(pooled, params[head_base + 2 * layer])?;
            let logits = g.add_row(logits, params[head_base + 2 * layer + 1])?;
            exits.push(g.softmax_rows(logits)?);
        }
        Ok(exits)
    }

    /// Class distribution at every exit for one sequence.
    pub fn exit_distributions(&self, tokens: &[usize]) -> Result<Vec<Vec<T>>> {
        let mut g = Graph::new();
        let params = self.bind(&mut g)?;
        let exits = self.forward_graph(&mut g, &params, tokens)?;
        Ok(exits.iter().map(|&e| g.value(e).data().to_vec()).collect())
    }

    /// Runs one sequence through every block and records the prediction of
    /// each exit.
    pub fn forward_all_exits(
        &self,
        sample_id: impl Into<String>,
        tokens: &[usize],
        gold: usize,
    ) -> Result<PredictionTrace<T>> {
        if gold >= self.config.num_classes {
            return Err(Error::input(format!(
                "gold label {gold} outside {} classes",
                self.config.num_classes
            )));
        }
        let probs = self.exit_distributions(tokens)?;
        PredictionTrace::from_probs(sample_id, gold, probs)
    }
}
