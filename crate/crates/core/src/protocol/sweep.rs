use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Checkpoint;
use crate::seed;
use crate::stimuli::TrialSet;

use super::probe::{probe_recall, probe_recognition};
use super::study::{run_study_phase, StudyPhaseConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    RecognitionAccuracy,
    MeanRougeL,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub lrs: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub metric: SelectionMetric,
    /// See [`StudyPhaseConfig::reset_optimizer`].
    pub reset_optimizer: bool,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            lrs: (0..7).map(|i| 10f64.powf(-5.0 + 0.5 * i as f64)).collect(),
            batch_sizes: vec![8, 16, 32, 64],
            metric: SelectionMetric::RecognitionAccuracy,
            reset_optimizer: true,
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.lrs.is_empty() || self.batch_sizes.is_empty() {
            return Err(Error::Config("sweep grid must have at least one lr and one batch size".into()));
        }
        if let Some(lr) = self.lrs.iter().find(|lr| !(**lr > 0.0 && lr.is_finite())) {
            return Err(Error::Config(format!("sweep lr must be positive, got {lr}")));
        }
        if self.batch_sizes.contains(&0) {
            return Err(Error::Config("sweep batch sizes must be at least 1".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<(f64, usize)> {
        self.lrs
            .iter()
            .flat_map(|&lr| self.batch_sizes.iter().map(move |&b| (lr, b)))
            .collect()
    }
}

/// Result of one `(lr, batch)` grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub lr: f64,
    pub batch_size: usize,
    /// Selection metric per experiment.
    pub per_experiment: BTreeMap<u8, f64>,
    /// Mean of `per_experiment`; `None` when the cell failed.
    pub metric: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub exposures: u8,
    pub metric: SelectionMetric,
    pub cells: Vec<SweepCell>,
    /// Index of the best cell by the mean metric.
    pub best: Option<usize>,
    pub best_per_experiment: BTreeMap<u8, usize>,
}

impl SweepResult {
    pub fn best_cell(&self) -> Option<&SweepCell> {
        self.best.map(|i| &self.cells[i])
    }
}

/// Argmax over `(index, metric, lr, batch)`; ties go to the lower lr and
/// then to the smaller batch.
fn argmax(cands: impl Iterator<Item = (usize, f64, f64, usize)>) -> Option<usize> {
    cands
        .filter(|c| c.1.is_finite())
        .fold(None::<(usize, f64, f64, usize)>, |best, c| match best {
            None => Some(c),
            Some(b) => {
                let better = c.1 > b.1 || (c.1 == b.1 && (c.2 < b.2 || (c.2 == b.2 && c.3 < b.3)));
                Some(if better { c } else { b })
            }
        })
        .map(|c| c.0)
}

pub fn select_best(cells: &[SweepCell]) -> Option<usize> {
    argmax(cells.iter().enumerate().filter_map(|(i, c)| c.metric.map(|m| (i, m, c.lr, c.batch_size))))
}

fn run_cell(
    base: &Checkpoint,
    sets: &[TrialSet],
    lr: f64,
    batch_size: usize,
    exposures: u8,
    grid: &SweepGrid,
    seed_value: u64,
) -> Result<BTreeMap<u8, f64>> {
    let mut out = BTreeMap::new();
    for set in sets {
        let cfg = StudyPhaseConfig {
            exposures,
            lr,
            batch_size,
            seed: seed::derive(seed_value, &[seed::tag("study"), set.experiment as u64]),
            reset_optimizer: grid.reset_optimizer,
        };
        let items = set.study_set(cfg.seed).items;
        let (ck, _) = run_study_phase(base, &items, &cfg, None)?;
        let value = match grid.metric {
            SelectionMetric::RecognitionAccuracy => probe_recognition(&ck.model, &set.trials)?.accuracy,
            SelectionMetric::MeanRougeL => probe_recall(&ck.model, &items)?
                .mean_rouge_l
                .ok_or(Error::Empty("recall outcomes"))?,
        };
        out.insert(set.experiment, value);
    }
    Ok(out)
}

/// Study and probe every grid cell independently from `base`. A failing
/// cell is recorded with its error and the sweep continues. Every cell uses
/// the same study seeds, so cells differ only in their hyperparameters.
pub fn run_sweep(
    base: &Checkpoint,
    sets: &[TrialSet],
    grid: &SweepGrid,
    exposures: u8,
    seed_value: u64,
) -> Result<SweepResult> {
    grid.validate()?;
    if sets.is_empty() {
        return Err(Error::Empty("sweep trial sets"));
    }
    let cells: Vec<SweepCell> = grid
        .cells()
        .into_par_iter()
        .map(|(lr, batch_size)| match run_cell(base, sets, lr, batch_size, exposures, grid, seed_value) {
            Ok(per_experiment) => {
                let metric = per_experiment.values().sum::<f64>() / per_experiment.len() as f64;
                SweepCell {
                    lr,
                    batch_size,
                    per_experiment,
                    metric: Some(metric),
                    error: None,
                }
            }
            Err(e) => {
                log::warn!("sweep cell lr={lr} batch={batch_size} failed: {e}");
                SweepCell {
                    lr,
                    batch_size,
                    per_experiment: BTreeMap::new(),
                    metric: None,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect();
    let best = select_best(&cells);
    let best_per_experiment = sets
        .iter()
        .filter_map(|s| {
            let e = s.experiment;
            argmax(cells.iter().enumerate().filter_map(|(i, c)| {
                c.per_experiment.get(&e).map(|&m| (i, m, c.lr, c.batch_size))
            }))
            .map(|i| (e, i))
        })
        .collect();
    Ok(SweepResult {
        exposures,
        metric: grid.metric,
        cells,
        best,
        best_per_experiment,
    })
}
