//! Replicate a study run with derived seeds, then aggregate recognition
//! accuracy into the summary table and figure.
//!
//! ```text
//! cargo run --release --example replicate_report -- [out_dir]
//! ```

mod common;

use memlab::protocol::{replicate, run_experiments, StudyPhaseConfig};
use memlab::results::{emit_recognition_summary, RunRecord};
use memlab::stimuli::build_trial_sets;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "replicate-example".into());
    let r = common::resources();
    let ck = common::model(&r);
    let res = common::trial_resources(&r);
    let records = replicate(3, 42, |_, seed| {
        let sets = build_trial_sets(&[1, 5], &res, 20, seed)?;
        let cfg = StudyPhaseConfig { exposures: 3, lr: 1e-3, batch_size: 1, seed, reset_optimizer: true };
        let mut record = RunRecord::new("replicate", seed, serde_json::Value::Null, 1);
        record.experiments = run_experiments(&ck, &sets, &cfg, None)?;
        Ok(record)
    })?;
    let records: Vec<RunRecord> = records.into_iter().map(|(_, r)| r).collect();
    for row in emit_recognition_summary(&records, &out, None)? {
        println!(
            "experiment {}  {} exposures  mean {:.3} ± {:.3}  (n = {})",
            row.experiment,
            row.exposures,
            row.mean.unwrap_or(f64::NAN),
            row.stderr.unwrap_or(f64::NAN),
            row.n
        );
    }
    println!("wrote {out}/recognition_summary.csv and .svg");
    Ok(())
}
