//! Study, then keep training on unrelated sentences and watch recognition
//! and recall decay. Writes retention.csv and retention.svg.
//!
//! ```text
//! cargo run --release --example retention_curve -- [out_dir]
//! ```

mod common;

use memlab::protocol::{run_retention, run_study_phase, ProbeSchedule, RetentionConfig, StudyPhaseConfig};
use memlab::results::emit_retention_curves;
use memlab::stimuli::{build_trial_sets, StimulusItem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "retention-example".into());
    let r = common::resources();
    let ck = common::model(&r);
    let sets = build_trial_sets(&[1, 4, 5], &common::trial_resources(&r), 20, 6)?;
    let union: Vec<StimulusItem> = sets.iter().flat_map(|s| s.trials.iter().map(|t| t.study.clone())).collect();
    let study = StudyPhaseConfig { exposures: 3, lr: 1e-3, batch_size: 1, seed: 1, reset_optimizer: true };
    let (studied, _) = run_study_phase(&ck, &union, &study, None)?;
    let cfg = RetentionConfig {
        schedule: ProbeSchedule::new(vec![0, 1, 3, 10, 30, 100])?,
        lr: 1e-3,
        batch_size: 1,
        seed: 2,
        reset_optimizer: false,
    };
    let series = run_retention(&studied, &sets, &r.interference, &cfg)?;
    for p in &series.points {
        let rec: Vec<String> = p.recognition.iter().map(|(e, v)| format!("e{e} {v:.2}")).collect();
        let recall: Vec<String> = p.recall.iter().map(|(k, v)| format!("{k} {v:.3}")).collect();
        println!("step {:>4}  {}  |  {}", p.step, rec.join("  "), recall.join("  "));
    }
    let rows = emit_retention_curves(&[series], &out)?;
    println!("{} rows written to {out}/retention.csv", rows.len());
    Ok(())
}
