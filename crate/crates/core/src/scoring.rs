//! Recognition decisions and Rouge-L recall scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One two-alternative recognition trial. `correct` uses the per-token mean
/// losses; the summed losses are kept so the alternative rule can be audited.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecognitionOutcome {
    pub trial_id: String,
    pub loss_study_mean: f64,
    pub loss_foil_mean: f64,
    pub loss_study_sum: f64,
    pub loss_foil_sum: f64,
    pub correct: bool,
}

/// One cued-recall trial over token ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallOutcome {
    pub sentence_id: String,
    pub prompt_token_count: usize,
    pub reference: Vec<u32>,
    /// Prompt followed by the generated completion.
    pub hypothesis: Vec<u32>,
    pub rouge_l: f64,
    pub perfect: bool,
    pub longest_common_substring: usize,
}

impl RecallOutcome {
    pub fn new(sentence_id: impl Into<String>, prompt_token_count: usize, reference: Vec<u32>, hypothesis: Vec<u32>) -> Result<Self> {
        let rouge = rouge_l(&reference, &hypothesis)?;
        Ok(RecallOutcome {
            sentence_id: sentence_id.into(),
            prompt_token_count,
            longest_common_substring: longest_common_substring(&reference, &hypothesis),
            reference,
            hypothesis,
            rouge_l: rouge,
            perfect: rouge == 1.0,
        })
    }
}

/// Correct iff the study item has strictly lower loss. Ties are incorrect.
pub fn recognition_trial(loss_study: f64, loss_foil: f64) -> Result<bool> {
    if !loss_study.is_finite() || !loss_foil.is_finite() {
        return Err(Error::NonFinite("recognition loss"));
    }
    Ok(loss_study < loss_foil)
}

pub fn recognition_accuracy(outcomes: &[RecognitionOutcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::Empty("recognition outcomes"));
    }
    let correct = outcomes.iter().filter(|o| o.correct).count();
    Ok(correct as f64 / outcomes.len() as f64)
}

/// Longest common subsequence length, O(|a|·|b|) time and O(|b|) space.
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// Length of the longest contiguous run shared by `a` and `b`.
pub fn longest_common_substring<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    let mut best = 0;
    for x in a {
        for j in (0..b.len()).rev() {
            row[j + 1] = if *x == b[j] { row[j] + 1 } else { 0 };
            best = best.max(row[j + 1]);
        }
    }
    best
}

/// `lcs(reference, hypothesis) / |reference|`.
pub fn rouge_l<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::Empty("rouge-l reference"));
    }
    Ok(lcs_length(reference, hypothesis) as f64 / reference.len() as f64)
}

pub fn mean_rouge_l(outcomes: &[RecallOutcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::Empty("recall outcomes"));
    }
    Ok(outcomes.iter().map(|o| o.rouge_l).sum::<f64>() / outcomes.len() as f64)
}
