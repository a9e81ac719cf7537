//! Decoder-only transformer: learned positions, pre-norm blocks, GELU MLP.
//!
//! The same kernels back two forward paths. [`LanguageModel::forward_graph`]
//! records a padded batch on a [`Graph`] for training; [`DecodeState`] runs
//! one sequence incrementally with a key/value cache for scoring and decoding.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::numerics::kernels::{self, gemm};
use crate::numerics::{Graph, ParameterStore, Tensor, Var};
use crate::seed;

use super::config::TransformerConfig;
use super::vocab::{TokenSequence, PAD};

const INIT_STD: f64 = 0.02;

fn block(i: usize, part: &str) -> String {
    format!("h{i:02}.{part}")
}

/// Expected `(name, shape)` of every parameter for `config`.
pub fn parameter_layout(config: &TransformerConfig) -> Vec<(String, Vec<usize>)> {
    let d = config.d_model;
    let v = config.vocab_size;
    let mut layout = vec![
        ("tok_emb".to_string(), vec![v, d]),
        ("pos_emb".to_string(), vec![config.context_len, d]),
        ("ln_f.gain".to_string(), vec![d]),
        ("ln_f.bias".to_string(), vec![d]),
        ("lm_head.w".to_string(), vec![d, v]),
    ];
    for i in 0..config.n_layers {
        layout.extend([
            (block(i, "ln1.gain"), vec![d]),
            (block(i, "ln1.bias"), vec![d]),
            (block(i, "attn.qkv.w"), vec![d, 3 * d]),
            (block(i, "attn.qkv.b"), vec![3 * d]),
            (block(i, "attn.proj.w"), vec![d, d]),
            (block(i, "attn.proj.b"), vec![d]),
            (block(i, "ln2.gain"), vec![d]),
            (block(i, "ln2.bias"), vec![d]),
            (block(i, "mlp.fc.w"), vec![d, 4 * d]),
            (block(i, "mlp.fc.b"), vec![4 * d]),
            (block(i, "mlp.proj.w"), vec![4 * d, d]),
            (block(i, "mlp.proj.b"), vec![d]),
        ]);
    }
    layout.sort();
    layout
}

/// A transformer configuration together with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LanguageModel {
    config: TransformerConfig,
    params: ParameterStore,
}

impl LanguageModel {
    /// Randomly initialised model, seeded by `config.seed`.
    pub fn new(config: TransformerConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng_for(config.seed, &[seed::tag("init")]);
        let residual_std = INIT_STD / (2.0 * config.n_layers as f64).sqrt();
        let mut params = ParameterStore::new();
        for (name, shape) in parameter_layout(&config) {
            let n: usize = shape.iter().product();
            let values: Vec<f64> = if name.ends_with(".gain") {
                vec![1.0; n]
            } else if name.ends_with(".b") || name.ends_with(".bias") {
                vec![0.0; n]
            } else {
                let std = if name.ends_with("proj.w") {
                    residual_std
                } else {
                    INIT_STD
                };
                let normal = Normal::new(0.0, std).expect("positive std");
                (0..n).map(|_| normal.sample(&mut rng)).collect()
            };
            params.insert(name, Tensor::new(shape, values)?)?;
        }
        Ok(LanguageModel { config, params })
    }

    /// Assemble a model from stored parameters, checking names and shapes.
    pub fn from_parts(config: TransformerConfig, params: ParameterStore) -> Result<Self> {
        config.validate()?;
        let layout = parameter_layout(&config);
        if layout.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                layout.len(),
                params.len()
            )));
        }
        for (name, shape) in &layout {
            match params.get(name) {
                Some(t) if t.shape() == shape.as_slice() => {}
                Some(t) => {
                    return Err(Error::Checkpoint(format!(
                        "parameter `{name}` has shape {:?}, expected {shape:?}",
                        t.shape()
                    )))
                }
                None => return Err(Error::Checkpoint(format!("missing parameter `{name}`"))),
            }
        }
        Ok(LanguageModel { config, params })
    }

    pub fn config(&self) -> &TransformerConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterStore {
        &mut self.params
    }

    fn p(&self, name: &str) -> &[f64] {
        self.params.expect(name).values()
    }

    /// Record the forward pass of a right-padded batch on `graph`.
    ///
    /// Returns the logits node (`[batch·seq_len × vocab]`) and the leaf node
    /// of every parameter, in name order.
    pub fn forward_graph(
        &self,
        graph: &mut Graph,
        ids: &[usize],
        seq_len: usize,
    ) -> Result<(Var, Vec<(String, Var)>)> {
        let cfg = &self.config;
        if seq_len == 0 || seq_len > cfg.context_len || ids.len() % seq_len != 0 {
            return Err(Error::ContextOverflow {
                needed: seq_len,
                context_len: cfg.context_len,
            });
        }
        let leaves: Vec<(String, Var)> = self
            .params
            .iter()
            .map(|(name, t)| (name.clone(), graph.input(t.clone())))
            .collect();
        let var = |name: &str| -> Var {
            leaves
                .binary_search_by(|(n, _)| n.as_str().cmp(name))
                .map(|i| leaves[i].1)
                .expect("parameter present")
        };
        let positions: Vec<usize> = (0..ids.len()).map(|i| i % seq_len).collect();
        let tok = graph.embed(var("tok_emb"), ids)?;
        let pos = graph.embed(var("pos_emb"), &positions)?;
        let mut x = graph.add(tok, pos)?;
        for i in 0..cfg.n_layers {
            let h = graph.layer_norm(x, var(&block(i, "ln1.gain")), var(&block(i, "ln1.bias")))?;
            let qkv = graph.matmul(h, var(&block(i, "attn.qkv.w")))?;
            let qkv = graph.add_bias(qkv, var(&block(i, "attn.qkv.b")))?;
            let a = graph.causal_attention(qkv, cfg.n_heads, seq_len)?;
            let o = graph.matmul(a, var(&block(i, "attn.proj.w")))?;
            let o = graph.add_bias(o, var(&block(i, "attn.proj.b")))?;
            x = graph.add(x, o)?;
            let h = graph.layer_norm(x, var(&block(i, "ln2.gain")), var(&block(i, "ln2.bias")))?;
            let f = graph.matmul(h, var(&block(i, "mlp.fc.w")))?;
            let f = graph.add_bias(f, var(&block(i, "mlp.fc.b")))?;
            let f = graph.gelu(f)?;
            let m = graph.matmul(f, var(&block(i, "mlp.proj.w")))?;
            let m = graph.add_bias(m, var(&block(i, "mlp.proj.b")))?;
            x = graph.add(x, m)?;
        }
        let x = graph.layer_norm(x, var("ln_f.gain"), var("ln_f.bias"))?;
        let logits = graph.matmul(x, var("lm_head.w"))?;
        Ok((logits, leaves))
    }

    /// Mean-of-sequence-means next-token loss over a batch, recorded on a
    /// fresh graph. PAD positions carry no weight.
    pub fn batch_loss_graph(
        &self,
        batch: &[&TokenSequence],
    ) -> Result<(Graph, Var, Vec<(String, Var)>)> {
        if batch.is_empty() {
            return Err(Error::Empty("training batch"));
        }
        let seq_len = batch.iter().map(|s| s.len()).max().unwrap_or(0);
        if seq_len > self.config.context_len {
            return Err(Error::ContextOverflow {
                needed: seq_len,
                context_len: self.config.context_len,
            });
        }
        let mut ids = Vec::with_capacity(batch.len() * seq_len);
        let mut targets = Vec::with_capacity(batch.len() * seq_len);
        let mut weights = Vec::with_capacity(batch.len() * seq_len);
        let per_seq = 1.0 / batch.len() as f64;
        for seq in batch {
            let n = seq.len();
            if n < 2 {
                return Err(Error::SequenceTooShort(n));
            }
            let w = per_seq / (n - 1) as f64;
            for t in 0..seq_len {
                ids.push(if t < n { seq.ids()[t] as usize } else { PAD as usize });
                if t + 1 < n {
                    targets.push(seq.ids()[t + 1] as usize);
                    weights.push(w);
                } else {
                    targets.push(0);
                    weights.push(0.0);
                }
            }
        }
        let mut graph = Graph::new();
        let (logits, leaves) = self.forward_graph(&mut graph, &ids, seq_len)?;
        let loss = graph.cross_entropy(logits, &targets, &weights)?;
        Ok((graph, loss, leaves))
    }

    /// Logits for every position of `ids` (`[len × vocab]`).
    pub fn logits(&self, ids: &[u32]) -> Result<Vec<f64>> {
        let mut state = DecodeState::new(self);
        state.feed(ids)
    }
}

/// Incremental forward pass over one sequence with a key/value cache.
pub struct DecodeState<'m> {
    model: &'m LanguageModel,
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    len: usize,
}

impl<'m> DecodeState<'m> {
    pub fn new(model: &'m LanguageModel) -> Self {
        let layers = model.config.n_layers;
        DecodeState {
            model,
            keys: vec![Vec::new(); layers],
            values: vec![Vec::new(); layers],
            len: 0,
        }
    }

    /// Number of tokens consumed so far.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Consume `ids` at the next positions; returns their logits
    /// (`[ids.len() × vocab]`).
    pub fn feed(&mut self, ids: &[u32]) -> Result<Vec<f64>> {
        let m = self.model;
        let cfg = &m.config;
        let (d, v, n) = (cfg.d_model, cfg.vocab_size, ids.len());
        let start = self.len;
        if start + n > cfg.context_len {
            return Err(Error::ContextOverflow {
                needed: start + n,
                context_len: cfg.context_len,
            });
        }
        let tok = m.p("tok_emb");
        let pos = m.p("pos_emb");
        let mut x = vec![0.0; n * d];
        for (i, &id) in ids.iter().enumerate() {
            let id = id as usize;
            if id >= v {
                return Err(Error::TargetOutOfRange { id, classes: v });
            }
            let p = start + i;
            for j in 0..d {
                x[i * d + j] = tok[id * d + j] + pos[p * d + j];
            }
        }
        let mut h = vec![0.0; n * d];
        let mut qkv = vec![0.0; n * 3 * d];
        let mut att = vec![0.0; n * d];
        let mut proj = vec![0.0; n * d];
        let mut fc = vec![0.0; n * 4 * d];
        for layer in 0..cfg.n_layers {
            let name = |part: &str| block(layer, part);
            kernels::layer_norm(&x, m.p(&name("ln1.gain")), m.p(&name("ln1.bias")), &mut h);
            gemm(n, d, 3 * d, &h, m.p(&name("attn.qkv.w")), &mut qkv, false);
            kernels::add_bias(&mut qkv, m.p(&name("attn.qkv.b")));
            let (keys, values) = (&mut self.keys[layer], &mut self.values[layer]);
            for row in qkv.chunks_exact(3 * d) {
                keys.extend_from_slice(&row[d..2 * d]);
                values.extend_from_slice(&row[2 * d..]);
            }
            kernels::causal_attention(
                &qkv, keys, values, 3 * d, d, d, cfg.n_heads, start, n, &mut att, None,
            );
            gemm(n, d, d, &att, m.p(&name("attn.proj.w")), &mut proj, false);
            kernels::add_bias(&mut proj, m.p(&name("attn.proj.b")));
            for (a, b) in x.iter_mut().zip(&proj) {
                *a += b;
            }
            kernels::layer_norm(&x, m.p(&name("ln2.gain")), m.p(&name("ln2.bias")), &mut h);
            gemm(n, d, 4 * d, &h, m.p(&name("mlp.fc.w")), &mut fc, false);
            kernels::add_bias(&mut fc, m.p(&name("mlp.fc.b")));
            for f in fc.iter_mut() {
                *f = kernels::gelu(*f);
            }
            gemm(n, 4 * d, d, &fc, m.p(&name("mlp.proj.w")), &mut proj, false);
            kernels::add_bias(&mut proj, m.p(&name("mlp.proj.b")));
            for (a, b) in x.iter_mut().zip(&proj) {
                *a += b;
            }
        }
        kernels::layer_norm(&x, m.p("ln_f.gain"), m.p("ln_f.bias"), &mut h);
        let mut logits = vec![0.0; n * v];
        gemm(n, d, v, &h, m.p("lm_head.w"), &mut logits, false);
        self.len += n;
        Ok(logits)
    }
}
