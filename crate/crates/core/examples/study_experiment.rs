//! Study an experiment's items for three exposures and probe recognition and
//! recall after each one.
//!
//! ```text
//! cargo run --release --example study_experiment -- [experiment] [lr] [batch]
//! ```

mod common;

use memlab::protocol::{run_experiment, StudyPhaseConfig};
use memlab::stimuli::build_trials;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let e: u8 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let lr: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1e-3);
    let batch_size: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let r = common::resources();
    let ck = common::model(&r);
    let set = build_trials(e, &common::trial_resources(&r), 40, 5)?;
    let cfg = StudyPhaseConfig { exposures: 3, lr, batch_size, seed: 9, reset_optimizer: true };
    let run = run_experiment(&ck, &set, &cfg, Some(&r.pretrain))?;
    println!("experiment {e}, {} trials, lr {lr:e}, batch {batch_size}", set.trials.len());
    for p in &run.probes {
        println!(
            "  {} exposures: recognition {:.3}  study loss {:.3}  foil loss {:.3}  recall {:.3}",
            p.exposures,
            p.recognition.accuracy,
            p.recognition.mean_study_loss(),
            p.recognition.mean_foil_loss(),
            p.recall.mean_rouge_l.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
