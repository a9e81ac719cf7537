use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stimuli::Corpus;

use super::checkpoint::Checkpoint;
use super::vocab::{tokenize, TokenSequence, BOS, EOS};

impl Checkpoint {
    /// One Adam update on the mean of per-sequence mean losses of `batch`.
    /// Returns the loss before the update.
    pub fn train_step(&mut self, batch: &[TokenSequence], lr: f64) -> Result<f64> {
        self.train_step_indexed(batch, lr, 0)
    }

    fn train_step_indexed(&mut self, batch: &[TokenSequence], lr: f64, index: usize) -> Result<f64> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be non-negative, got {lr}")));
        }
        let refs: Vec<&TokenSequence> = batch.iter().collect();
        let (mut graph, loss, leaves) = self.model.batch_loss_graph(&refs)?;
        let value = graph.value(loss).values()[0];
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss(index));
        }
        graph.backward(loss)?;
        let params = self.model.params_mut();
        for (name, var) in leaves {
            if let Some(grad) = graph.take_grad(var) {
                params.get_mut(&name).expect("leaf of a parameter").set_grad(grad)?;
            }
        }
        let result = self.optimizer.step(params, lr);
        params.clear_grads();
        result?;
        self.step += 1;
        Ok(value)
    }

    /// One optimizer step per batch, in order. Returns the pre-update loss of
    /// each batch.
    pub fn train_steps(&mut self, batches: &[Vec<TokenSequence>], lr: f64) -> Result<Vec<f64>> {
        batches
            .iter()
            .enumerate()
            .map(|(i, b)| self.train_step_indexed(b, lr, i))
            .collect()
    }
}

/// Settings for from-scratch training on a sentence corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainConfig {
    /// Tokens to consume, counted as `steps · batch_size · context_len`.
    pub token_budget: u64,
    pub batch_size: usize,
    pub lr: f64,
    /// Log the training loss every this many steps (and at the last step).
    pub log_interval: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            token_budget: 2_000_000,
            batch_size: 16,
            lr: 1e-3,
            log_interval: 50,
        }
    }
}

impl PretrainConfig {
    pub fn steps(&self, context_len: usize) -> u64 {
        let per_step = (self.batch_size * context_len) as u64;
        self.token_budget.div_ceil(per_step)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossLogEntry {
    pub step: u64,
    pub loss: f64,
}

/// Write `step<TAB>loss` lines.
pub fn write_loss_log(path: impl AsRef<Path>, log: &[LossLogEntry]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for e in log {
        writeln!(out, "{}\t{}", e.step, e.loss)?;
    }
    std::fs::write(path, out).map_err(|e| Error::file(path, e))
}

/// Pack whole sentences (`BOS … EOS`) into chunks of at most `context_len`
/// tokens. A sentence never straddles two chunks; over-long sentences are
/// truncated and occupy a chunk of their own.
pub fn pack_chunks(texts: impl IntoIterator<Item = impl AsRef<[u8]>>, context_len: usize) -> Vec<TokenSequence> {
    let mut chunks = Vec::new();
    let mut current: Vec<u32> = Vec::with_capacity(context_len);
    for text in texts {
        let seq = tokenize(text.as_ref(), context_len);
        if current.len() + seq.len() > context_len && !current.is_empty() {
            chunks.push(TokenSequence::from_ids(std::mem::take(&mut current)));
        }
        current.extend_from_slice(seq.ids());
    }
    if current.len() >= 2 {
        chunks.push(TokenSequence::from_ids(current));
    }
    debug_assert!(chunks.iter().all(|c| c.ids()[0] == BOS || c.ids().contains(&EOS)));
    chunks
}

/// Train `checkpoint` on packed chunks of `corpus` until the token budget is
/// used up. Each batch draws `batch_size` chunks uniformly (with replacement)
/// from the checkpoint's generator, so a reloaded checkpoint continues with
/// exactly the batches it would have seen.
pub fn pretrain(
    checkpoint: &mut Checkpoint,
    corpus: &Corpus,
    cfg: &PretrainConfig,
    mut on_log: impl FnMut(LossLogEntry),
) -> Result<Vec<LossLogEntry>> {
    if cfg.token_budget == 0 {
        return Err(Error::Config("token_budget must be positive".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let context_len = checkpoint.config().context_len;
    let chunks = pack_chunks(corpus.items().iter().map(|i| i.text.as_bytes()), context_len);
    if chunks.len() < cfg.batch_size {
        return Err(Error::InsufficientCorpus {
            required: cfg.batch_size,
            available: chunks.len(),
        });
    }
    let steps = cfg.steps(context_len);
    let interval = cfg.log_interval.max(1);
    let mut log = Vec::new();
    for s in 0..steps {
        let batch: Vec<TokenSequence> = (0..cfg.batch_size)
            .map(|_| chunks[checkpoint.rng.random_range(0..chunks.len())].clone())
            .collect();
        let loss = checkpoint
            .train_step(&batch, cfg.lr)
            .map_err(|e| match e {
                Error::NonFiniteLoss(_) => Error::NonFiniteLoss(s as usize),
                other => other,
            })?;
        if (s + 1) % interval == 0 || s + 1 == steps || s == 0 {
            let entry = LossLogEntry {
                step: checkpoint.step,
                loss,
            };
            on_log(entry);
            log.push(entry);
        }
    }
    Ok(log)
}
