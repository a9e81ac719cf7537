//! A desk-scale laboratory for few-shot memory in causal language models.
//!
//! The crate trains a small byte-level transformer from scratch, exposes it to
//! study items one to three times, and measures what it retains:
//!
//! * **recognition**: is the loss on a studied item lower than on a foil?
//! * **recall**: prompted with the first half of a studied sentence, does greedy
//!   decoding reproduce the second half (scored with Rouge-L)?
//! * **retention**: how do both measures decay while training continues on
//!   unrelated interference sentences?
//!
//! Module map:
//!
//! | module | contents |
//! |---|---|
//! | [`numerics`] | tensors, tape-based reverse-mode autodiff, Adam |
//! | [`model`] | byte tokenizer, transformer, training, greedy decoding, checkpoints |
//! | [`stimuli`] | corpora, foil generators, trial construction, synthetic fixtures |
//! | [`scoring`] | recognition decision rule, LCS and Rouge-L |
//! | [`protocol`] | study phase, probes, retention, sweeps, replication |
//! | [`results`] | run records, CSV tables, SVG figures |
//! | [`cli`] | the `memlab` command line |

pub mod cli;
pub mod error;
pub mod model;
pub mod numerics;
pub mod protocol;
pub mod results;
pub mod scoring;
pub mod seed;
pub mod stimuli;

pub use error::{Error, Result};

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
