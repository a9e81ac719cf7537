use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::kernels::log_sum_exp;

use super::transformer::{DecodeState, LanguageModel};
use super::vocab::TokenSequence;

/// Next-token loss of one sequence, in nats.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceLoss {
    /// Mean over the predicted tokens.
    pub mean: f64,
    /// Sum over the predicted tokens.
    pub sum: f64,
    /// Number of predicted tokens (`len − 1`).
    pub tokens: usize,
}

/// Loss of tokens `2..n` given their causal prefixes.
pub fn sequence_loss(model: &LanguageModel, seq: &TokenSequence) -> Result<SequenceLoss> {
    let ids = seq.ids();
    if ids.len() < 2 {
        return Err(Error::SequenceTooShort(ids.len()));
    }
    let v = model.config().vocab_size;
    let logits = model.logits(&ids[..ids.len() - 1])?;
    let mut sum = 0.0;
    for (row, &target) in logits.chunks_exact(v).zip(&ids[1..]) {
        sum += log_sum_exp(row) - row[target as usize];
    }
    let tokens = ids.len() - 1;
    Ok(SequenceLoss {
        mean: sum / tokens as f64,
        sum,
        tokens,
    })
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Append `n_new` greedily chosen tokens to `prompt`.
pub fn greedy_decode(
    model: &LanguageModel,
    prompt: &TokenSequence,
    n_new: usize,
) -> Result<TokenSequence> {
    let context_len = model.config().context_len;
    if prompt.len() + n_new > context_len {
        return Err(Error::ContextOverflow {
            needed: prompt.len() + n_new,
            context_len,
        });
    }
    let mut out = prompt.prefix(prompt.len());
    if n_new == 0 {
        return Ok(out);
    }
    if prompt.is_empty() {
        return Err(Error::Empty("decoding prompt"));
    }
    let v = model.config().vocab_size;
    let mut state = DecodeState::new(model);
    let logits = state.feed(prompt.ids())?;
    let mut next = argmax(&logits[logits.len() - v..]) as u32;
    out.push(next);
    for _ in 1..n_new {
        let logits = state.feed(&[next])?;
        next = argmax(&logits) as u32;
        out.push(next);
    }
    Ok(out)
}
