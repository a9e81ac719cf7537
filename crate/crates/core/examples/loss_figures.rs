//! Loss histograms before and after one exposure, and the loss profile of
//! perfectly recalled sentences.
//!
//! ```text
//! cargo run --release --example loss_figures -- [out_dir]
//! ```

mod common;

use memlab::protocol::{run_experiment, StudyPhaseConfig};
use memlab::results::{emit_loss_histograms, emit_perfect_recall_analysis, loss_sets, study_losses_by_id};
use memlab::stimuli::build_trials;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "figures-example".into());
    let r = common::resources();
    let ck = common::model(&r);
    let set = build_trials(1, &common::trial_resources(&r), 40, 8)?;
    let cfg = StudyPhaseConfig { exposures: 3, lr: 1e-3, batch_size: 1, seed: 3, reset_optimizer: true };
    let run = run_experiment(&ck, &set, &cfg, None)?;
    let (before, after) = (run.at(0).expect("probe 0"), run.at(1).expect("probe 1"));
    let h = emit_loss_histograms(&loss_sets(&before.recognition), &loss_sets(&after.recognition), 1, &out)?;
    println!("histogram with {} bins", h.edges.len() - 1);
    let last = run.at(3).expect("probe 3");
    let analysis = emit_perfect_recall_analysis(
        &last.recall.outcomes,
        &study_losses_by_id(&run, 0),
        &study_losses_by_id(&run, 3),
        "e1",
        &out,
    )?;
    println!(
        "perfect recall: {} sentences (mean pre-study loss {:.3}), others {} ({:.3})",
        analysis.perfect.n,
        analysis.perfect.mean_pre_loss.unwrap_or(f64::NAN),
        analysis.other.n,
        analysis.other.mean_pre_loss.unwrap_or(f64::NAN)
    );
    Ok(())
}
