use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::Checkpoint;
use crate::seed;
use crate::stimuli::{Corpus, TrialSet};

use super::probe::{probe_recall, probe_recognition, RecallProbe, RecognitionProbe};
use super::study::{run_study_epochs, StudyPhaseConfig, StudyReport};

/// Probe results after a given number of exposures (0 = before study).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExposureProbe {
    pub exposures: u8,
    pub recognition: RecognitionProbe,
    pub recall: RecallProbe,
}

/// One experiment studied from a base checkpoint, probed before study and
/// after every exposure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRun {
    pub experiment: u8,
    pub study_seed: u64,
    pub trials: TrialSet,
    pub study: StudyReport,
    pub probes: Vec<ExposureProbe>,
}

impl ExperimentRun {
    pub fn at(&self, exposures: u8) -> Option<&ExposureProbe> {
        self.probes.iter().find(|p| p.exposures == exposures)
    }
}

/// Study one trial set for `cfg.exposures` epochs. Because epoch `k` only
/// depends on `(cfg.seed, k)`, the probe after epoch `e` is identical to an
/// independent run with `exposures = e`.
pub fn run_experiment(
    base: &Checkpoint,
    trials: &TrialSet,
    cfg: &StudyPhaseConfig,
    pretrain_corpus: Option<&Corpus>,
) -> Result<ExperimentRun> {
    let study_items = trials.study_set(cfg.seed).items;
    let probe = |exposures: u8, ck: &Checkpoint| -> Result<ExposureProbe> {
        Ok(ExposureProbe {
            exposures,
            recognition: probe_recognition(&ck.model, &trials.trials)?,
            recall: probe_recall(&ck.model, &study_items)?,
        })
    };
    let mut probes = vec![probe(0, base)?];
    let (_, study) = run_study_epochs(base, &study_items, cfg, pretrain_corpus, |e, ck| {
        probes.push(probe(e, ck)?);
        Ok(())
    })?;
    Ok(ExperimentRun {
        experiment: trials.experiment,
        study_seed: cfg.seed,
        trials: trials.clone(),
        study,
        probes,
    })
}

/// Run every trial set independently from the same base checkpoint. Each
/// experiment gets its own study seed derived from `cfg.seed`.
pub fn run_experiments(
    base: &Checkpoint,
    sets: &[TrialSet],
    cfg: &StudyPhaseConfig,
    pretrain_corpus: Option<&Corpus>,
) -> Result<Vec<ExperimentRun>> {
    sets.iter()
        .map(|set| {
            let cfg = StudyPhaseConfig {
                seed: seed::derive(cfg.seed, &[seed::tag("study"), set.experiment as u64]),
                ..cfg.clone()
            };
            run_experiment(base, set, &cfg, pretrain_corpus)
        })
        .collect()
}
