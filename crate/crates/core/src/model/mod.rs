//! The from-scratch language model.

mod check;
mod checkpoint;
mod config;
mod inference;
mod train;
mod transformer;
mod vocab;

pub use check::{gradient_check, GRADCHECK_FLOOR};
pub use checkpoint::{Checkpoint, FORMAT_VERSION, MAGIC};
pub use config::TransformerConfig;
pub use inference::{argmax, greedy_decode, sequence_loss, SequenceLoss};
pub use train::{pack_chunks, pretrain, write_loss_log, LossLogEntry, PretrainConfig};
pub use transformer::{parameter_layout, DecodeState, LanguageModel};
pub use vocab::{detokenize, detokenize_ids, tokenize, TokenSequence, BOS, EOS, PAD, VOCAB_SIZE};

#[cfg(test)]
mod tests;
