//! The `memlab` command line.
//!
//! ```text
//! memlab [--spec PATH] [--seed N] [--out DIR] [--workers N] [--dry-run] <command>
//! ```
//!
//! Commands: `pretrain`, `study`, `probe recognition|recall`, `retention`,
//! `sweep`, `replicate`, `report`, `selftest`. Flags override the spec file;
//! `MEMLAB_OUT` sets the output root when neither the flag nor the spec does.
//! Exit status is 0 on success, 1 for configuration errors (including bad
//! usage) and 2 for runtime failures.

mod commands;
pub mod selftest;
mod spec;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};

pub use commands::{
    derived_seeds, experiment_metrics, pretrain_cmd, probe_cmd, replicate_cmd, report_cmd, retention_cmd,
    retention_record, study_cmd, study_record, sweep_cmd, sweep_record, Inputs, Outcome, ProbeKind,
};
pub use selftest::{selftest, SelfTestReport};
pub use spec::{ModelSpec, ReplicateSpec, ReportSpec, ResourceSpec, RetentionSpec, RunSpec, StudySpec};

#[derive(Debug, Parser)]
#[command(name = "memlab", version, about = "Few-shot recognition, recall and retention in a small language model")]
pub struct Args {
    /// Run specification (TOML). Defaults are used for anything it omits.
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Master seed; overrides the spec.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output root; overrides the spec and MEMLAB_OUT.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for probes, sweeps and replications.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Validate the spec and print the plan without training.
    #[arg(long, global = true)]
    pub dry_run: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the model from scratch on the pretraining corpus.
    Pretrain,
    /// Study each experiment's items and probe after every exposure.
    Study,
    /// Probe the checkpoint without studying.
    Probe {
        #[arg(value_enum)]
        kind: ProbeArg,
    },
    /// Study, then train on interference sentences and probe on a schedule.
    Retention,
    /// Grid search over study lr and batch size.
    Sweep,
    /// Repeat the study run with fresh samples and aggregate.
    Replicate {
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Tables and figures from existing run records.
    Report {
        /// Directory of records (default: the output root).
        #[arg(long)]
        records: Option<PathBuf>,
        /// Human accuracy reference line for the recognition figure.
        #[arg(long)]
        human: Option<f64>,
    },
    /// Gradient, LCS and determinism checks.
    Selftest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProbeArg {
    Recognition,
    Recall,
}

/// Load the spec and apply flag and environment overrides.
pub fn resolve_spec(args: &Args) -> Result<RunSpec> {
    let mut spec = match &args.spec {
        Some(p) => RunSpec::load(p)?,
        None => RunSpec::default(),
    };
    if spec.out.is_none() {
        spec.out = std::env::var_os("MEMLAB_OUT").map(PathBuf::from);
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(o) = &args.out {
        spec.out = Some(o.clone());
    }
    if let Some(w) = args.workers {
        spec.workers = w;
    }
    match &args.command {
        Command::Replicate { reps: Some(r) } => spec.replicate.reps = *r,
        Command::Report { records, human } => {
            if records.is_some() {
                spec.report.records = records.clone();
            }
            if human.is_some() {
                spec.report.human_reference = *human;
            }
        }
        _ => {}
    }
    spec.validate()?;
    Ok(spec)
}

fn plan(args: &Args, spec: &RunSpec) -> Vec<String> {
    let s = &spec.study;
    let mut lines = vec![
        format!("command: {}", command_name(&args.command)),
        format!("output: {}", spec.out_dir().display()),
        format!("checkpoint: {}", spec.checkpoint_path().display()),
        format!(
            "model: {} layers, d_model {}, {} heads, context {}",
            spec.model.n_layers, spec.model.d_model, spec.model.n_heads, spec.model.context_len
        ),
    ];
    match &args.command {
        Command::Pretrain => lines.push(format!(
            "pretrain: {} steps of {} sequences at lr {}",
            spec.pretrain.steps(spec.model.context_len),
            spec.pretrain.batch_size,
            spec.pretrain.lr
        )),
        Command::Sweep => lines.push(format!(
            "sweep: {} cells x experiments {:?}, {} items, {} exposures",
            spec.sweep.cells().len(),
            s.experiments,
            s.n_items,
            s.exposures
        )),
        Command::Retention => lines.push(format!(
            "retention: study {:?} then probe at {:?}",
            s.experiments,
            spec.retention.schedule.steps()
        )),
        Command::Replicate { .. } => lines.push(format!(
            "replicate: {} x study of {:?}, {} items, {} exposures",
            spec.replicate.reps, s.experiments, s.n_items, s.exposures
        )),
        Command::Report { .. } | Command::Selftest => {}
        Command::Study | Command::Probe { .. } => lines.push(format!(
            "experiments {:?}, {} items, {} exposures at lr {} batch {}",
            s.experiments, s.n_items, s.exposures, s.lr, s.batch_size
        )),
    }
    lines
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Pretrain => "pretrain",
        Command::Study => "study",
        Command::Probe { .. } => "probe",
        Command::Retention => "retention",
        Command::Sweep => "sweep",
        Command::Replicate { .. } => "replicate",
        Command::Report { .. } => "report",
        Command::Selftest => "selftest",
    }
}

/// Execute parsed arguments.
pub fn run(args: &Args) -> Result<Outcome> {
    let spec = resolve_spec(args)?;
    if args.dry_run {
        if !matches!(args.command, Command::Report { .. } | Command::Selftest) {
            Inputs::load(&spec)?;
        }
        return Ok(Outcome {
            seeds: derived_seeds(spec.seed),
            summary: plan(args, &spec),
            ..Default::default()
        });
    }
    match &args.command {
        Command::Pretrain => pretrain_cmd(&spec),
        Command::Study => study_cmd(&spec),
        Command::Probe { kind } => probe_cmd(
            &spec,
            match kind {
                ProbeArg::Recognition => ProbeKind::Recognition,
                ProbeArg::Recall => ProbeKind::Recall,
            },
        ),
        Command::Retention => retention_cmd(&spec),
        Command::Sweep => sweep_cmd(&spec),
        Command::Replicate { .. } => replicate_cmd(&spec),
        Command::Report { .. } => report_cmd(&spec),
        Command::Selftest => {
            let report = selftest(spec.seed)?;
            let ok = report.passed();
            let outcome = Outcome {
                seeds: derived_seeds(spec.seed),
                summary: report.lines(),
                ..Default::default()
            };
            if ok {
                Ok(outcome)
            } else {
                for l in &outcome.summary {
                    eprintln!("{l}");
                }
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                Err(Error::SelfTest(failed.join(", ")))
            }
        }
    }
}

/// Entry point: parse `argv`, run, print, and return the exit status.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match run(&args) {
        Ok(outcome) => {
            for (name, s) in &outcome.seeds {
                println!("seed {name} = {s}");
            }
            for line in &outcome.summary {
                println!("{line}");
            }
            for p in &outcome.artifacts {
                println!("wrote {}", p.display());
            }
            for p in &outcome.records {
                println!("record {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                1
            } else {
                2
            }
        }
    }
}
