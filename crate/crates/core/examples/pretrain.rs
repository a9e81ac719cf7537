//! Pretrain the desk-sized model on the synthetic corpus and save it.
//!
//! ```text
//! cargo run --release --example pretrain -- desk.ckpt [steps]
//! MEMLAB_CHECKPOINT=desk.ckpt cargo run --release --example study_experiment
//! ```
//!
//! Running it again on an existing file resumes to the requested step count.

use memlab::model::{pretrain, write_loss_log, Checkpoint, PretrainConfig, TransformerConfig, VOCAB_SIZE};
use memlab::stimuli::synth::{generate, SynthSizes};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "desk.ckpt".into());
    let steps: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(600);
    let config = TransformerConfig { n_layers: 2, d_model: 64, n_heads: 4, context_len: 128, vocab_size: VOCAB_SIZE, seed: 1 };
    let r = generate(SynthSizes::default(), 1)?;
    let mut ck = match Checkpoint::load(&path) {
        Ok(ck) => ck,
        Err(_) => Checkpoint::new(config)?,
    };
    let per_step = 16 * 128;
    let remaining = steps.saturating_sub(ck.step);
    let cfg = PretrainConfig { token_budget: remaining * per_step, batch_size: 16, lr: 3e-3, log_interval: 50 };
    let log = if remaining > 0 {
        pretrain(&mut ck, &r.pretrain, &cfg, |e| println!("step {:>5}  loss {:.4}", e.step, e.loss))?
    } else {
        Vec::new()
    };
    ck.save(&path)?;
    write_loss_log(format!("{path}.loss.tsv"), &log)?;
    println!("{path}: step {}", ck.step);
    Ok(())
}
