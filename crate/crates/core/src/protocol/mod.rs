//! Experiment orchestration: study phases, memory probes, retention under
//! interference, hyperparameter sweeps and replication.
//!
//! Parallel work (trials within a probe, sweep cells, replications) runs on
//! the current rayon pool; use [`with_workers`] to bound it. Every result is
//! independent of the number of workers.

mod experiment;
mod probe;
mod replicate;
mod retention;
mod study;
mod sweep;

pub use experiment::{run_experiment, run_experiments, ExperimentRun, ExposureProbe};
pub use probe::{probe_recall, probe_recognition, recall_one, RecallProbe, RecognitionProbe};
pub use replicate::{replicate, replication_seed, DEFAULT_REPLICATIONS};
pub use retention::{
    probe_point, run_retention, study_items_by_kind, LossSummary, ProbeSchedule, RetentionConfig,
    RetentionPoint, RetentionSeries,
};
pub use study::{
    contamination_scan, epoch_batches, run_study_epochs, run_study_phase, StudyPhaseConfig, StudyReport,
};
pub use sweep::{run_sweep, select_best, SelectionMetric, SweepCell, SweepGrid, SweepResult};

use crate::error::{Error, Result};

/// Run `f` on a dedicated pool of `workers` threads (`0` = rayon default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}
