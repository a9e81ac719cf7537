use std::path::Path;
use std::process::{Command, Output};

use memlab::stimuli::synth::{generate, SynthSizes};

fn memlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memlab"))
        .args(args)
        .current_dir(cwd)
        .env_remove("MEMLAB_OUT")
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

const TINY_SPEC: &str = r#"seed = 3
[model]
n_layers = 1
d_model = 8
n_heads = 2
context_len = 96
[resources]
sentences = "pool.json"
paraphrases = "paraphrases.json"
lexicon = "synonyms.tsv"
vocabulary = "vocabulary.txt"
pretrain_corpus = "pretrain.json"
interference = "interference.json"
[pretrain]
token_budget = 12288
batch_size = 8
lr = 0.003
log_interval = 4
[study]
experiments = [1, 5]
n_items = 6
exposures = 2
lr = 0.001
batch_size = 2
[retention]
schedule = [0, 1, 3]
[replicate]
reps = 2
"#;

fn tiny_workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let sizes = SynthSizes { pretrain: 300, pool: 200, interference: 50, paraphrases: 20 };
    generate(sizes, 4).unwrap().write(dir.path()).unwrap();
    std::fs::write(dir.path().join("run.toml"), TINY_SPEC).unwrap();
    dir
}

#[test]
fn missing_spec_is_a_configuration_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = memlab(&["--spec", "nowhere/run.toml", "study"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("nowhere/run.toml"), "{}", text(&out.stderr));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(memlab(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(memlab(&["probe", "smell"], dir.path()).status.code(), Some(1));
    assert_eq!(memlab(&["--seed", "x", "study"], dir.path()).status.code(), Some(1));
    assert_eq!(memlab(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn unknown_spec_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[study]\nexposure = 2\n").unwrap();
    let out = memlab(&["--spec", "bad.toml", "--dry-run", "study"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("bad.toml"));
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = memlab(&["selftest"], dir.path());
    let stdout = text(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}{}", text(&out.stderr));
    for check in ["PASS gradients", "PASS lcs", "PASS determinism"] {
        assert!(stdout.contains(check), "{stdout}");
    }
}

#[test]
fn dry_run_prints_seeds_and_plan_without_writing() {
    let dir = tiny_workspace();
    let out = memlab(&["--spec", "run.toml", "--dry-run", "--seed", "11", "sweep"], dir.path());
    let stdout = text(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(stdout.contains("seed master = 11"), "{stdout}");
    assert!(stdout.contains("seed study = "), "{stdout}");
    assert!(stdout.contains("sweep: 28 cells"), "{stdout}");
    assert!(!dir.path().join("runs").exists());
}

#[test]
fn output_root_comes_from_flag_then_environment() {
    let dir = tiny_workspace();
    let out = Command::new(env!("CARGO_BIN_EXE_memlab"))
        .args(["--spec", "run.toml", "--dry-run", "study"])
        .current_dir(dir.path())
        .env("MEMLAB_OUT", "from-env")
        .output()
        .unwrap();
    assert!(text(&out.stdout).contains("output: from-env"), "{}", text(&out.stdout));
    let out = Command::new(env!("CARGO_BIN_EXE_memlab"))
        .args(["--spec", "run.toml", "--dry-run", "--out", "from-flag", "study"])
        .current_dir(dir.path())
        .env("MEMLAB_OUT", "from-env")
        .output()
        .unwrap();
    assert!(text(&out.stdout).contains("output: from-flag"), "{}", text(&out.stdout));
}

#[test]
fn study_without_a_checkpoint_is_a_configuration_error() {
    let dir = tiny_workspace();
    let out = memlab(&["--spec", "run.toml", "study"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("memlab pretrain"), "{}", text(&out.stderr));
}

#[test]
fn corrupt_checkpoint_is_a_runtime_error() {
    let dir = tiny_workspace();
    std::fs::create_dir_all(dir.path().join("runs/pretrain")).unwrap();
    std::fs::write(dir.path().join("runs/pretrain/model.ckpt"), b"MLAB garbage").unwrap();
    let out = memlab(&["--spec", "run.toml", "probe", "recognition"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", text(&out.stderr));
}

#[test]
fn pretrain_study_replicate_retention_report_end_to_end() {
    let dir = tiny_workspace();
    let root = dir.path();
    let ok = |args: &[&str]| {
        let out = memlab(args, root);
        assert_eq!(out.status.code(), Some(0), "memlab {args:?}: {}", text(&out.stderr));
        text(&out.stdout)
    };
    let stdout = ok(&["--spec", "run.toml", "pretrain"]);
    assert!(stdout.contains("record "), "{stdout}");
    assert!(root.join("runs/pretrain/model.ckpt").exists());
    let log = std::fs::read_to_string(root.join(format!("runs/pretrain/loss-{:016x}.tsv", 3))).unwrap();
    assert!(log.lines().all(|l| l.split('\t').count() == 2), "{log}");

    ok(&["--spec", "run.toml", "probe", "recall"]);
    let stdout = ok(&["--spec", "run.toml", "study"]);
    assert!(stdout.contains("experiment 5: recognition"), "{stdout}");
    ok(&["--spec", "run.toml", "replicate"]);
    assert!(root.join("runs/replicate/summary-0000000000000003.csv").exists());
    ok(&["--spec", "run.toml", "retention"]);
    ok(&["--spec", "run.toml", "report"]);
    for f in ["recognition_summary.csv", "recognition_summary.svg", "retention.csv", "retention.svg"] {
        assert!(root.join("runs/figures").join(f).exists(), "{f} missing");
    }
    let records = memlab::results::read_records(root.join("runs")).unwrap();
    assert!(records.iter().any(|r| r.command == "study"));
    assert_eq!(records.iter().filter(|r| r.command == "replicate").count(), 2);
}

#[test]
fn shipped_specs_are_valid() {
    for name in ["desk.toml", "paper_grid.toml"] {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name);
        let spec = memlab::cli::RunSpec::load(&path).unwrap();
        spec.validate().unwrap();
        assert!(spec.resources.sentences.unwrap().ends_with("synthetic/pool.json"));
    }
}

#[test]
fn repeated_runs_write_identical_records_wherever_they_go() {
    let dir = tiny_workspace();
    let root = dir.path();
    let spec = std::fs::read_to_string(root.join("run.toml")).unwrap().replace("[model]\n", "[model]\ncheckpoint = \"ck.bin\"\n");
    std::fs::write(root.join("run.toml"), spec).unwrap();
    assert_eq!(memlab(&["--spec", "run.toml", "--out", "first", "pretrain"], root).status.code(), Some(0));
    let study = |out: &str| {
        let o = memlab(&["--spec", "run.toml", "--out", out, "study"], root);
        assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
        let path = text(&o.stdout).lines().find_map(|l| l.strip_prefix("record ").map(str::to_string)).unwrap();
        (Path::new(&path).file_name().unwrap().to_owned(), std::fs::read(root.join(path)).unwrap())
    };
    assert_eq!(study("a"), study("b"));
}
