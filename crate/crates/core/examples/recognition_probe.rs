//! Two-alternative recognition on an unstudied model: natural sentence pairs
//! sit near chance, while random word sequences lose to natural sentences.

mod common;

use memlab::protocol::probe_recognition;
use memlab::stimuli::build_trials;

fn main() -> memlab::error::Result<()> {
    let r = common::resources();
    let ck = common::model(&r);
    let res = common::trial_resources(&r);
    for e in [1, 4, 5] {
        let set = build_trials(e, &res, 200, 3)?;
        let p = probe_recognition(&ck.model, &set.trials)?;
        println!(
            "experiment {e}: accuracy {:.3} over {} trials (mean loss study {:.3}, foil {:.3})",
            p.accuracy,
            p.outcomes.len(),
            p.mean_study_loss(),
            p.mean_foil_loss()
        );
    }
    Ok(())
}
