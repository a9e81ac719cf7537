use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{tokenize, Checkpoint, TokenSequence};
use crate::seed;
use crate::stimuli::{Corpus, StimulusItem};

/// Training settings for the study phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyPhaseConfig {
    /// Epochs over the study set, 1 to 3.
    pub exposures: u8,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Start from zeroed Adam moments instead of those saved with the checkpoint.
    #[serde(default = "yes")]
    pub reset_optimizer: bool,
}

fn yes() -> bool {
    true
}

impl StudyPhaseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.exposures) {
            return Err(Error::Config(format!("exposures must be 1, 2 or 3, got {}", self.exposures)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("study lr must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("study batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Bookkeeping from one study phase.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub steps: u64,
    /// Ids of study items found verbatim in the pretraining corpus.
    pub contaminated: Vec<String>,
    /// Mean training loss of each epoch (pre-update batch losses).
    pub epoch_losses: Vec<f64>,
}

/// Flag every study item whose text occurs verbatim in `corpus`.
pub fn contamination_scan(items: &[StimulusItem], corpus: &Corpus) -> Vec<bool> {
    let texts: HashSet<&str> = corpus.text_set();
    items.iter().map(|i| texts.contains(i.text.as_str())).collect()
}

/// Batches of epoch `epoch` (zero-based): the items in an order shuffled
/// by `(seed, epoch)`, cut into runs of `batch_size` with a short final batch.
pub fn epoch_batches(items: &[TokenSequence], batch_size: usize, seed_value: u64, epoch: usize) -> Vec<Vec<TokenSequence>> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut seed::rng_for(seed_value, &[seed::tag("epoch"), epoch as u64]));
    order
        .chunks(batch_size)
        .map(|c| c.iter().map(|&i| items[i].clone()).collect())
        .collect()
}

/// Train a copy of `base` on `items` for `cfg.exposures` epochs, calling `after_epoch(epoch, checkpoint)` after each epoch
/// (epochs counted from 1). `base` is left untouched.
pub fn run_study_epochs(
    base: &Checkpoint,
    items: &[StimulusItem],
    cfg: &StudyPhaseConfig,
    pretrain_corpus: Option<&Corpus>,
    mut after_epoch: impl FnMut(u8, &Checkpoint) -> Result<()>,
) -> Result<(Checkpoint, StudyReport)> {
    cfg.validate()?;
    if items.is_empty() {
        return Err(Error::Empty("study set"));
    }
    let mut report = StudyReport::default();
    if let Some(corpus) = pretrain_corpus {
        let flags = contamination_scan(items, corpus);
        report.contaminated = items
            .iter()
            .zip(flags)
            .filter(|(_, f)| *f)
            .map(|(i, _)| i.id.clone())
            .collect();
        if !report.contaminated.is_empty() {
            log::warn!(
                "{} study items occur verbatim in the pretraining corpus",
                report.contaminated.len()
            );
        }
    }
    let context_len = base.config().context_len;
    let seqs: Vec<TokenSequence> = items.iter().map(|i| tokenize(i.text.as_bytes(), context_len)).collect();
    let mut ck = base.clone();
    if cfg.reset_optimizer {
        ck.reset_optimizer();
    }
    let start = ck.step;
    for epoch in 0..cfg.exposures {
        let batches = epoch_batches(&seqs, cfg.batch_size, cfg.seed, epoch as usize);
        let losses = ck.train_steps(&batches, cfg.lr)?;
        report.epoch_losses.push(losses.iter().sum::<f64>() / losses.len() as f64);
        after_epoch(epoch + 1, &ck)?;
    }
    report.steps = ck.step - start;
    Ok((ck, report))
}

/// Train a copy of `base` on the study items. See [`run_study_epochs`].
pub fn run_study_phase(
    base: &Checkpoint,
    items: &[StimulusItem],
    cfg: &StudyPhaseConfig,
    pretrain_corpus: Option<&Corpus>,
) -> Result<(Checkpoint, StudyReport)> {
    run_study_epochs(base, items, cfg, pretrain_corpus, |_, _| Ok(()))
}
