use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{greedy_decode, sequence_loss, tokenize, LanguageModel, TokenSequence, BOS};
use crate::scoring::{mean_rouge_l, recognition_accuracy, recognition_trial, RecallOutcome, RecognitionOutcome};
use crate::stimuli::{StimulusItem, TrialPair};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecognitionProbe {
    pub outcomes: Vec<RecognitionOutcome>,
    pub accuracy: f64,
}

impl RecognitionProbe {
    pub fn mean_study_loss(&self) -> f64 {
        mean(self.outcomes.iter().map(|o| o.loss_study_mean))
    }

    pub fn mean_foil_loss(&self) -> f64 {
        mean(self.outcomes.iter().map(|o| o.loss_foil_mean))
    }
}

pub(crate) fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallProbe {
    pub outcomes: Vec<RecallOutcome>,
    /// `None` when every item was skipped.
    pub mean_rouge_l: Option<f64>,
    pub perfect_ids: Vec<String>,
    /// Items whose tokenization was cut at the context length.
    pub skipped_truncated: usize,
}

/// Score every trial by comparing per-token losses. The model is only read.
pub fn probe_recognition(model: &LanguageModel, trials: &[TrialPair]) -> Result<RecognitionProbe> {
    let context_len = model.config().context_len;
    let outcomes = trials
        .par_iter()
        .map(|t| {
            let s = sequence_loss(model, &tokenize(t.study.text.as_bytes(), context_len))?;
            let f = sequence_loss(model, &tokenize(t.foil.text.as_bytes(), context_len))?;
            Ok(RecognitionOutcome {
                trial_id: t.id.clone(),
                loss_study_mean: s.mean,
                loss_foil_mean: f.mean,
                loss_study_sum: s.sum,
                loss_foil_sum: f.sum,
                correct: recognition_trial(s.mean, f.mean)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let accuracy = recognition_accuracy(&outcomes)?;
    Ok(RecognitionProbe { outcomes, accuracy })
}

/// Recall of one sequence of content tokens: prompt with `BOS` and the first
/// `⌊n/2⌋` tokens, greedily generate the remaining `n − ⌊n/2⌋`.
pub fn recall_one(model: &LanguageModel, id: &str, content: &[u32]) -> Result<RecallOutcome> {
    let n = content.len();
    let half = n / 2;
    let mut prompt = Vec::with_capacity(half + 1);
    prompt.push(BOS);
    prompt.extend_from_slice(&content[..half]);
    let out = greedy_decode(model, &TokenSequence::from_ids(prompt), n - half)?;
    let hypothesis = out.ids()[1..].to_vec();
    RecallOutcome::new(id, half, content.to_vec(), hypothesis)
}

/// Cued recall for every item that fits the context window.
pub fn probe_recall(model: &LanguageModel, items: &[StimulusItem]) -> Result<RecallProbe> {
    let context_len = model.config().context_len;
    let seqs: Vec<(&StimulusItem, TokenSequence)> = items
        .iter()
        .map(|i| (i, tokenize(i.text.as_bytes(), context_len)))
        .collect();
    let skipped_truncated = seqs.iter().filter(|(_, s)| s.truncated()).count();
    let outcomes = seqs
        .par_iter()
        .filter(|(_, s)| !s.truncated() && !s.content().is_empty())
        .map(|(item, s)| recall_one(model, &item.id, &s.content()))
        .collect::<Result<Vec<_>>>()?;
    let perfect_ids = outcomes.iter().filter(|o| o.perfect).map(|o| o.sentence_id.clone()).collect();
    Ok(RecallProbe {
        mean_rouge_l: mean_rouge_l(&outcomes).ok(),
        outcomes,
        perfect_ids,
        skipped_truncated,
    })
}
