//! Build a run specification in code, save it, and ask the CLI for a dry-run
//! plan. The printed TOML is a complete, editable spec file.

use memlab::cli::{self, RunSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("memlab-run-spec-example");
    std::fs::create_dir_all(&dir)?;
    memlab::stimuli::synth::generate(memlab::stimuli::synth::SynthSizes::default(), 1)?.write(&dir)?;
    let mut spec = RunSpec::default();
    spec.seed = 7;
    spec.study.experiments = vec![1, 5];
    spec.resources.sentences = Some("pool.json".into());
    spec.resources.vocabulary = Some("vocabulary.txt".into());
    spec.resources.pretrain_corpus = Some("pretrain.json".into());
    let text = spec.to_toml();
    println!("{text}");
    let path = dir.join("run.toml");
    std::fs::write(&path, text)?;
    let status = cli::main(["memlab", "--dry-run", "--spec", path.to_str().unwrap(), "study"]);
    println!("exit status {status}");
    Ok(())
}
