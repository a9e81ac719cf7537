use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{tokenize, Checkpoint, LanguageModel, TokenSequence};
use crate::seed;
use crate::stimuli::{Corpus, StimulusItem, StimulusKind, TrialSet};

use super::probe::{probe_recall, probe_recognition};

/// Interference-update counts at which to probe.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct ProbeSchedule(Vec<u64>);

impl ProbeSchedule {
    /// Steps must be strictly increasing and start at 0.
    pub fn new(steps: Vec<u64>) -> Result<Self> {
        if steps.first() != Some(&0) {
            return Err(Error::Config("probe schedule must start with step 0".into()));
        }
        if steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("probe schedule must be strictly increasing".into()));
        }
        Ok(ProbeSchedule(steps))
    }

    pub fn steps(&self) -> &[u64] {
        &self.0
    }

    pub fn max_step(&self) -> u64 {
        *self.0.last().expect("schedule is non-empty")
    }
}

impl Default for ProbeSchedule {
    fn default() -> Self {
        ProbeSchedule(vec![0, 1, 3, 10, 30, 100, 300, 1000, 3000, 10000])
    }
}

impl TryFrom<Vec<u64>> for ProbeSchedule {
    type Error = Error;

    fn try_from(v: Vec<u64>) -> Result<Self> {
        ProbeSchedule::new(v)
    }
}

impl From<ProbeSchedule> for Vec<u64> {
    fn from(s: ProbeSchedule) -> Self {
        s.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetentionConfig {
    pub schedule: ProbeSchedule,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Interference continues the study run, so the moments are kept unless this is set.
    #[serde(default)]
    pub reset_optimizer: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub study_mean: f64,
    pub foil_mean: f64,
}

/// Memory probes at one interference step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetentionPoint {
    pub step: u64,
    pub recognition: BTreeMap<u8, f64>,
    pub recall: BTreeMap<StimulusKind, f64>,
    pub losses: BTreeMap<u8, LossSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetentionSeries {
    pub points: Vec<RetentionPoint>,
    /// Times the interference corpus was exhausted and reshuffled.
    pub wraps: u64,
}

impl RetentionSeries {
    pub fn at(&self, step: u64) -> Option<&RetentionPoint> {
        self.points.iter().find(|p| p.step == step)
    }
}

/// Study items of all sets grouped by kind, de-duplicated by text.
pub fn study_items_by_kind(sets: &[TrialSet]) -> BTreeMap<StimulusKind, Vec<StimulusItem>> {
    let mut seen = HashSet::new();
    let mut out: BTreeMap<StimulusKind, Vec<StimulusItem>> = BTreeMap::new();
    for t in sets.iter().flat_map(|s| &s.trials) {
        if seen.insert(t.study.text.clone()) {
            out.entry(t.study.kind).or_default().push(t.study.clone());
        }
    }
    out
}

/// All six-way recognition probes and per-kind recall on `model`.
pub fn probe_point(model: &LanguageModel, sets: &[TrialSet], step: u64) -> Result<RetentionPoint> {
    let mut recognition = BTreeMap::new();
    let mut losses = BTreeMap::new();
    for set in sets {
        let r = probe_recognition(model, &set.trials)?;
        losses.insert(
            set.experiment,
            LossSummary {
                study_mean: r.mean_study_loss(),
                foil_mean: r.mean_foil_loss(),
            },
        );
        recognition.insert(set.experiment, r.accuracy);
    }
    let mut recall = BTreeMap::new();
    for (kind, items) in study_items_by_kind(sets) {
        if let Some(m) = probe_recall(model, &items)?.mean_rouge_l {
            recall.insert(kind, m);
        }
    }
    Ok(RetentionPoint {
        step,
        recognition,
        recall,
        losses,
    })
}

/// Keep training `studied` on interference sentences, one batch per
/// update, and probe at each scheduled step. The input checkpoint is not
/// modified.
pub fn run_retention(
    studied: &Checkpoint,
    sets: &[TrialSet],
    interference: &Corpus,
    cfg: &RetentionConfig,
) -> Result<RetentionSeries> {
    if !(cfg.lr >= 0.0 && cfg.lr.is_finite()) {
        return Err(Error::Config(format!("retention lr must be non-negative, got {}", cfg.lr)));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("retention batch_size must be at least 1".into()));
    }
    let studied_texts: HashSet<&str> = sets
        .iter()
        .flat_map(|s| &s.trials)
        .map(|t| t.study.text.as_str())
        .collect();
    let overlap = interference.texts().filter(|t| studied_texts.contains(t)).count();
    if overlap > 0 {
        return Err(Error::Config(format!(
            "interference corpus contains {overlap} studied texts"
        )));
    }
    let context_len = studied.config().context_len;
    let seqs: Vec<TokenSequence> = interference
        .unique_items()
        .into_iter()
        .map(|i| tokenize(i.text.as_bytes(), context_len))
        .filter(|s| s.len() >= 2)
        .collect();
    if seqs.is_empty() && cfg.schedule.max_step() > 0 {
        return Err(Error::Empty("interference corpus"));
    }

    let mut ck = studied.clone();
    if cfg.reset_optimizer {
        ck.reset_optimizer();
    }
    let mut points = Vec::with_capacity(cfg.schedule.steps().len());
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut pass = 0u64;
    let mut wraps = 0;
    let mut step = 0u64;
    for &target in cfg.schedule.steps() {
        while step < target {
            let mut batch = Vec::with_capacity(cfg.batch_size);
            while batch.len() < cfg.batch_size {
                if cursor == order.len() {
                    if pass > 0 {
                        wraps += 1;
                        log::info!("interference corpus exhausted at update {step}; reshuffling");
                    }
                    order = (0..seqs.len()).collect();
                    order.shuffle(&mut seed::rng_for(cfg.seed, &[seed::tag("interference"), pass]));
                    pass += 1;
                    cursor = 0;
                }
                batch.push(seqs[order[cursor]].clone());
                cursor += 1;
            }
            ck.train_step(&batch, cfg.lr)?;
            step += 1;
        }
        points.push(probe_point(&ck.model, sets, step)?);
    }
    Ok(RetentionSeries { points, wraps })
}
