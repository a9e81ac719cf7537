//! Shared setup for the examples: synthetic resources and a small model.
//!
//! Set `MEMLAB_CHECKPOINT` to reuse a checkpoint (for instance one written by
//! the `pretrain` example) instead of training a small model on the spot.

#![allow(dead_code)]

use memlab::model::{pretrain, Checkpoint, PretrainConfig, TransformerConfig, VOCAB_SIZE};
use memlab::stimuli::synth::{self, SynthSizes, SyntheticResources};
use memlab::stimuli::TrialResources;

pub fn resources() -> SyntheticResources {
    let sizes = SynthSizes { pretrain: 6000, pool: 2000, interference: 1000, paraphrases: 200 };
    synth::generate(sizes, 1).expect("grammar has room for these sizes")
}

pub fn trial_resources(r: &SyntheticResources) -> TrialResources<'_> {
    TrialResources {
        sentences: Some(&r.pool),
        paraphrases: Some(&r.paraphrases),
        lexicon: Some(&r.lexicon),
        vocabulary: Some(&r.vocabulary),
        ..Default::default()
    }
}

pub fn small_config(seed: u64) -> TransformerConfig {
    TransformerConfig { n_layers: 2, d_model: 32, n_heads: 4, context_len: 128, vocab_size: VOCAB_SIZE, seed }
}

/// The checkpoint named by `MEMLAB_CHECKPOINT`, or a small model pretrained
/// for 150 steps on `r.pretrain`.
pub fn model(r: &SyntheticResources) -> Checkpoint {
    if let Ok(path) = std::env::var("MEMLAB_CHECKPOINT") {
        return Checkpoint::load(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    }
    let mut ck = Checkpoint::new(small_config(7)).expect("valid config");
    let cfg = PretrainConfig { token_budget: 150 * 16 * 128, batch_size: 16, lr: 3e-3, log_interval: 50 };
    pretrain(&mut ck, &r.pretrain, &cfg, |e| eprintln!("pretrain step {:>4}  loss {:.3}", e.step, e.loss))
        .expect("pretraining");
    ck
}
