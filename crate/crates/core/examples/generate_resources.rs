//! Write a complete synthetic resource set (pretraining corpus, sentence
//! pool, interference corpus, paraphrases, synonym lexicon, vocabulary) in
//! the on-disk formats the CLI reads.
//!
//! ```text
//! cargo run --release --example generate_resources -- data/synthetic [seed]
//! ```

use memlab::stimuli::synth::{generate, SynthSizes};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().unwrap_or_else(|| "synthetic".into());
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let r = generate(SynthSizes::default(), seed)?;
    r.write(&dir)?;
    println!(
        "{dir}: {} pretraining, {} pool, {} interference sentences, {} paraphrase pairs, {} synonym groups, {} words",
        r.pretrain.len(),
        r.pool.len(),
        r.interference.len(),
        r.paraphrases.len(),
        r.lexicon.len(),
        r.vocabulary.len()
    );
    Ok(())
}
