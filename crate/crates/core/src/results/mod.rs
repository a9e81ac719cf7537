//! Run records, tables and figures.
//!
//! Every figure is written next to a CSV twin holding exactly the plotted
//! numbers. Output bytes depend only on the input values, never on their
//! order or on the time of the run.

mod aggregate;
mod figures;
mod record;
mod svg;

pub use aggregate::{mean_stderr, AggregateSummary};
pub use figures::{
    emit_loss_histograms, emit_perfect_recall_analysis, emit_recognition_summary, emit_retention_curves,
    freedman_diaconis_edges, loss_sets, read_retention_csv, study_losses_by_id, GroupStats, Histogram,
    LossSets, PerfectRecallAnalysis, RecognitionRow, RetentionRow,
};
pub use record::{config_hash, read_record, read_records, run_id, write_record, Environment, ProbeOutput, RunRecord, SCHEMA_VERSION};

#[cfg(test)]
mod tests;
