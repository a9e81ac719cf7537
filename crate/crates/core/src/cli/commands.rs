//! Subcommand implementations. Each takes a resolved [`RunSpec`] and
//! returns what it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{pretrain, write_loss_log, Checkpoint};
use crate::protocol::{
    probe_recall, probe_recognition, replicate as replicate_runs, run_experiments, run_retention, run_study_phase,
    run_sweep, with_workers, ExperimentRun, RetentionConfig,
};
use crate::results::{
    emit_loss_histograms, emit_perfect_recall_analysis, emit_recognition_summary, emit_retention_curves, loss_sets,
    read_records, study_losses_by_id, write_record, AggregateSummary, RunRecord,
};
use crate::seed;
use crate::stimuli::{
    build_trial_sets, load_sentences, load_vocabulary, Corpus, ParaphrasePairs, StimulusItem, SynonymLexicon,
    TrialResources, TrialSet,
};

use super::spec::RunSpec;

/// Files written and seeds used by a command.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub seeds: BTreeMap<String, u64>,
    pub records: Vec<PathBuf>,
    pub artifacts: Vec<PathBuf>,
    pub summary: Vec<String>,
}

/// Seeds of every stochastic stage, derived from the spec seed.
pub fn derived_seeds(master: u64) -> BTreeMap<String, u64> {
    ["model", "trials", "study", "sweep", "retention"]
        .into_iter()
        .map(|s| (s.to_string(), seed::derive(master, &[seed::tag(s)])))
        .chain([("master".to_string(), master)])
        .collect()
}

/// Input resources named by the spec, with their checksums.
#[derive(Clone, Debug, Default)]
pub struct Inputs {
    pub sentences: Option<Corpus>,
    pub paraphrases: Option<ParaphrasePairs>,
    pub lexicon: Option<SynonymLexicon>,
    pub vocabulary: Option<Vec<String>>,
    pub pretrain_corpus: Option<Corpus>,
    pub interference: Option<Corpus>,
    pub checksums: BTreeMap<String, String>,
}

fn file_checksum(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    Ok(crate::hex(&Sha256::digest(bytes)))
}

impl Inputs {
    pub fn load(spec: &RunSpec) -> Result<Self> {
        let r = &spec.resources;
        let mut inputs = Inputs::default();
        let mut sum = |name: &str, p: &Path| -> Result<()> {
            inputs.checksums.insert(name.to_string(), file_checksum(p)?);
            Ok(())
        };
        if let Some(p) = &r.sentences {
            sum("sentences", p)?;
        }
        if let Some(p) = &r.paraphrases {
            sum("paraphrases", p)?;
        }
        if let Some(p) = &r.lexicon {
            sum("lexicon", p)?;
        }
        if let Some(p) = &r.vocabulary {
            sum("vocabulary", p)?;
        }
        if let Some(p) = &r.pretrain_corpus {
            sum("pretrain_corpus", p)?;
        }
        if let Some(p) = &r.interference {
            sum("interference", p)?;
        }
        inputs.sentences = r.sentences.as_ref().map(load_sentences).transpose()?;
        inputs.paraphrases = r.paraphrases.as_ref().map(ParaphrasePairs::load).transpose()?;
        inputs.lexicon = r.lexicon.as_ref().map(SynonymLexicon::load).transpose()?;
        inputs.vocabulary = r.vocabulary.as_ref().map(load_vocabulary).transpose()?;
        inputs.pretrain_corpus = r.pretrain_corpus.as_ref().map(load_sentences).transpose()?;
        inputs.interference = r.interference.as_ref().map(load_sentences).transpose()?;
        Ok(inputs)
    }

    pub fn trial_resources(&self, spec: &RunSpec) -> TrialResources<'_> {
        TrialResources {
            sentences: self.sentences.as_ref(),
            paraphrases: self.paraphrases.as_ref(),
            lexicon: self.lexicon.as_ref(),
            vocabulary: self.vocabulary.as_deref(),
            random_words_len: spec.study.random_words_len,
        }
    }

    /// Trial sets for the spec's experiments with disjoint sentence pools.
    pub fn trial_sets(&self, spec: &RunSpec, seed_value: u64) -> Result<Vec<TrialSet>> {
        let seeds = derived_seeds(seed_value);
        build_trial_sets(&spec.study.experiments, &self.trial_resources(spec), spec.study.n_items, seeds["trials"])
    }
}

fn load_checkpoint(spec: &RunSpec) -> Result<(Checkpoint, String)> {
    let path = spec.checkpoint_path();
    if !path.exists() {
        return Err(Error::Config(format!(
            "checkpoint {} does not exist (run `memlab pretrain` first or set model.checkpoint)",
            path.display()
        )));
    }
    let ck = Checkpoint::load(&path)?;
    Ok((ck, file_checksum(&path)?))
}

fn new_record(command: &str, spec: &RunSpec, inputs: &Inputs) -> Result<RunRecord> {
    // Where a run is written is not part of what was run.
    let config = serde_json::to_value(RunSpec { out: None, ..spec.clone() })?;
    let mut record = RunRecord::new(command, spec.seed, config, spec.workers);
    record.seeds = derived_seeds(spec.seed);
    record.checksums = inputs.checksums.clone();
    Ok(record)
}

/// Headline metrics of a set of experiment runs.
pub fn experiment_metrics(runs: &[ExperimentRun]) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    for run in runs {
        let e = run.experiment;
        for p in &run.probes {
            let x = p.exposures;
            m.insert(format!("recognition.e{e}.x{x}"), p.recognition.accuracy);
            m.insert(format!("loss_study.e{e}.x{x}"), p.recognition.mean_study_loss());
            m.insert(format!("loss_foil.e{e}.x{x}"), p.recognition.mean_foil_loss());
            if let Some(r) = p.recall.mean_rouge_l {
                m.insert(format!("recall.e{e}.x{x}"), r);
            }
            m.insert(format!("perfect_recall.e{e}.x{x}"), p.recall.perfect_ids.len() as f64);
        }
    }
    m
}

fn finish(command: &str, spec: &RunSpec, record: &RunRecord) -> Result<Outcome> {
    let path = write_record(record, spec.out_dir().join(command))?;
    Ok(Outcome {
        seeds: record.seeds.clone(),
        records: vec![path],
        ..Default::default()
    })
}

pub fn pretrain_cmd(spec: &RunSpec) -> Result<Outcome> {
    let inputs = Inputs::load(spec)?;
    let corpus = inputs.pretrain_corpus.as_ref().ok_or_else(|| {
        Error::Config("pretrain needs resources.pretrain_corpus".into())
    })?;
    let path = spec.checkpoint_path();
    let seeds = derived_seeds(spec.seed);
    let config = spec.model.config(seeds["model"]);
    let mut ck = if path.exists() {
        let ck = Checkpoint::load(&path)?;
        if *ck.config() != config {
            return Err(Error::Config(format!(
                "existing checkpoint {} has a different model configuration",
                path.display()
            )));
        }
        ck
    } else {
        Checkpoint::new(config.clone())?
    };
    let total = spec.pretrain.steps(config.context_len);
    let per_step = (spec.pretrain.batch_size * config.context_len) as u64;
    let mut log = Vec::new();
    if ck.step < total {
        let cfg = crate::model::PretrainConfig {
            token_budget: (total - ck.step) * per_step,
            ..spec.pretrain.clone()
        };
        log = with_workers(spec.workers, || {
            pretrain(&mut ck, corpus, &cfg, |e| log::info!("step {} loss {:.4}", e.step, e.loss))
        })??;
    }
    ck.save(&path)?;
    let dir = spec.out_dir().join("pretrain");
    let log_path = dir.join(format!("loss-{:016x}.tsv", spec.seed));
    std::fs::create_dir_all(&dir).map_err(|e| Error::file(&dir, e))?;
    write_loss_log(&log_path, &log)?;
    let mut record = new_record("pretrain", spec, &inputs)?;
    record.checksums.insert("checkpoint".into(), file_checksum(&path)?);
    record.metrics.insert("steps".into(), ck.step as f64);
    if let Some(last) = log.last() {
        record.metrics.insert("final_loss".into(), last.loss);
    }
    let mut out = finish("pretrain", spec, &record)?;
    out.artifacts = vec![path, log_path];
    out.summary.push(format!("trained to step {}", ck.step));
    Ok(out)
}

/// Study every experiment from the spec's checkpoint and probe after each
/// exposure.
pub fn study_record(spec: &RunSpec, ck: &Checkpoint, ck_sum: &str, inputs: &Inputs) -> Result<RunRecord> {
    let sets = inputs.trial_sets(spec, spec.seed)?;
    let seeds = derived_seeds(spec.seed);
    let runs = run_experiments(ck, &sets, &spec.study.phase(seeds["study"]), inputs.pretrain_corpus.as_ref())?;
    let mut record = new_record("study", spec, inputs)?;
    record.checksums.insert("checkpoint".into(), ck_sum.to_string());
    record.metrics = experiment_metrics(&runs);
    for set in &sets {
        record.metrics.insert(format!("dropped.e{}", set.experiment), set.dropped as f64);
    }
    record.experiments = runs;
    Ok(record)
}

pub fn study_cmd(spec: &RunSpec) -> Result<Outcome> {
    let inputs = Inputs::load(spec)?;
    let (ck, sum) = load_checkpoint(spec)?;
    let record = with_workers(spec.workers, || study_record(spec, &ck, &sum, &inputs))??;
    let mut out = finish("study", spec, &record)?;
    for e in &spec.study.experiments {
        let x = spec.study.exposures;
        if let Some(a) = record.metrics.get(&format!("recognition.e{e}.x{x}")) {
            out.summary.push(format!("experiment {e}: recognition {a:.3} after {x} exposures"));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeKind {
    Recognition,
    Recall,
}

pub fn probe_cmd(spec: &RunSpec, kind: ProbeKind) -> Result<Outcome> {
    let inputs = Inputs::load(spec)?;
    let (ck, sum) = load_checkpoint(spec)?;
    let sets = inputs.trial_sets(spec, spec.seed)?;
    let mut record = new_record(
        match kind {
            ProbeKind::Recognition => "probe-recognition",
            ProbeKind::Recall => "probe-recall",
        },
        spec,
        &inputs,
    )?;
    record.checksums.insert("checkpoint".into(), sum);
    let mut summary = Vec::new();
    with_workers(spec.workers, || -> Result<()> {
        for set in &sets {
            let e = set.experiment;
            match kind {
                ProbeKind::Recognition => {
                    let p = probe_recognition(&ck.model, &set.trials)?;
                    summary.push(format!("experiment {e}: recognition {:.3}", p.accuracy));
                    record.metrics.insert(format!("recognition.e{e}.x0"), p.accuracy);
                    record.probes.push(crate::results::ProbeOutput {
                        experiment: e,
                        recognition: Some(p),
                        recall: None,
                    });
                }
                ProbeKind::Recall => {
                    let p = probe_recall(&ck.model, &set.study_set(0).items)?;
                    if let Some(m) = p.mean_rouge_l {
                        summary.push(format!("experiment {e}: mean rouge-l {m:.3}"));
                        record.metrics.insert(format!("recall.e{e}.x0"), m);
                    }
                    record.probes.push(crate::results::ProbeOutput {
                        experiment: e,
                        recognition: None,
                        recall: Some(p),
                    });
                }
            }
        }
        Ok(())
    })??;
    let command = record.command.clone();
    let mut out = finish(&command, spec, &record)?;
    out.summary = summary;
    Ok(out)
}

/// Study the union of all experiments' study sets, then train on the
/// interference corpus and probe on the schedule.
pub fn retention_record(spec: &RunSpec, ck: &Checkpoint, ck_sum: &str, inputs: &Inputs) -> Result<RunRecord> {
    let interference = inputs
        .interference
        .as_ref()
        .ok_or_else(|| Error::Config("retention needs resources.interference".into()))?;
    let sets = inputs.trial_sets(spec, spec.seed)?;
    let seeds = derived_seeds(spec.seed);
    let union: Vec<StimulusItem> = sets.iter().flat_map(|s| s.trials.iter().map(|t| t.study.clone())).collect();
    let (studied, _) = run_study_phase(ck, &union, &spec.study.phase(seeds["study"]), inputs.pretrain_corpus.as_ref())?;
    let cfg = RetentionConfig {
        schedule: spec.retention.schedule.clone(),
        lr: spec.retention.lr.unwrap_or(spec.study.lr),
        batch_size: spec.retention.batch_size.unwrap_or(spec.study.batch_size),
        seed: seeds["retention"],
        reset_optimizer: false,
    };
    let series = run_retention(&studied, &sets, interference, &cfg)?;
    let mut record = new_record("retention", spec, inputs)?;
    record.checksums.insert("checkpoint".into(), ck_sum.to_string());
    for p in &series.points {
        for (e, v) in &p.recognition {
            record.metrics.insert(format!("retention.recognition.e{e}.s{}", p.step), *v);
        }
        for (k, v) in &p.recall {
            record.metrics.insert(format!("retention.recall.{k}.s{}", p.step), *v);
        }
    }
    record.retention = Some(series);
    Ok(record)
}

pub fn retention_cmd(spec: &RunSpec) -> Result<Outcome> {
    let inputs = Inputs::load(spec)?;
    let (ck, sum) = load_checkpoint(spec)?;
    let record = with_workers(spec.workers, || retention_record(spec, &ck, &sum, &inputs))??;
    let mut out = finish("retention", spec, &record)?;
    if let Some(s) = &record.retention {
        out.summary.push(format!("{} probe points, corpus wrapped {} times", s.points.len(), s.wraps));
    }
    Ok(out)
}

pub fn sweep_record(spec: &RunSpec, ck: &Checkpoint, ck_sum: &str, inputs: &Inputs) -> Result<RunRecord> {
    let sets = inputs.trial_sets(spec, spec.seed)?;
    let seeds = derived_seeds(spec.seed);
    let result = run_sweep(ck, &sets, &spec.sweep, spec.study.exposures, seeds["sweep"])?;
    let mut record = new_record("sweep", spec, inputs)?;
    record.checksums.insert("checkpoint".into(), ck_sum.to_string());
    for c in &result.cells {
        if let Some(m) = c.metric {
            record.metrics.insert(format!("cell.lr{:e}.b{}", c.lr, c.batch_size), m);
        }
    }
    if let Some(best) = result.best_cell() {
        record.metrics.insert("best.lr".into(), best.lr);
        record.metrics.insert("best.batch_size".into(), best.batch_size as f64);
        record.metrics.insert("best.metric".into(), best.metric.unwrap_or(f64::NAN));
    }
    record.sweep = Some(result);
    Ok(record)
}

pub fn sweep_cmd(spec: &RunSpec) -> Result<Outcome> {
    let inputs = Inputs::load(spec)?;
    let (ck, sum) = load_checkpoint(spec)?;
    let record = with_workers(spec.workers, || sweep_record(spec, &ck, &sum, &inputs))??;
    let mut out = finish("sweep", spec, &record)?;
    let sweep = record.sweep.as_ref().expect("set above");
    let failed = sweep.cells.iter().filter(|c| c.error.is_some()).count();
    out.summary.push(format!("{} cells, {failed} failed", sweep.cells.len()));
    if let Some(b) = sweep.best_cell() {
        out.summary.push(format!(
            "best: lr {:e}, batch {}, metric {:.3}",
            b.lr,
            b.batch_size,
            b.metric.unwrap_or(f64::NAN)
        ));
    }
    Ok(out)
}

/// Run the study command once per replication with derived seeds and
/// aggregate every metric as mean ± standard error.
pub fn replicate_cmd(spec: &RunSpec) -> Result<Outcome> {
    let inputs = Inputs::load(spec)?;
    let (ck, sum) = load_checkpoint(spec)?;
    let reps = with_workers(spec.workers, || {
        replicate_runs(spec.replicate.reps, spec.seed, |_, rep_seed| {
            let rep_spec = RunSpec {
                seed: rep_seed,
                ..spec.clone()
            };
            let mut record = study_record(&rep_spec, &ck, &sum, &inputs)?;
            record.command = "replicate".into();
            record.id = crate::results::run_id("replicate", rep_seed, &record.config);
            record.seeds.insert("replication_master".into(), spec.seed);
            Ok(record)
        })
    })??;
    let dir = spec.out_dir().join("replicate");
    let mut out = Outcome {
        seeds: derived_seeds(spec.seed),
        ..Default::default()
    };
    for (s, r) in &reps {
        out.seeds.insert(format!("replication_{s:016x}"), *s);
        out.records.push(write_record(r, &dir)?);
    }
    let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (_, r) in &reps {
        for (k, v) in &r.metrics {
            values.entry(k.as_str()).or_default().push(*v);
        }
    }
    let aggregates = values
        .into_iter()
        .filter(|(_, v)| v.len() == reps.len())
        .map(|(k, v)| AggregateSummary::new(k, v))
        .collect::<Result<Vec<_>>>()?;
    let summary_path = dir.join(format!("summary-{:016x}.csv", spec.seed));
    write_aggregates(&summary_path, &aggregates)?;
    for a in aggregates.iter().filter(|a| a.metric.starts_with("recognition.") && !a.metric.ends_with(".x0")) {
        out.summary.push(format!("{} = {:.3} ± {:.3}", a.metric, a.mean, a.stderr));
    }
    out.artifacts.push(summary_path);
    Ok(out)
}

fn write_aggregates(path: &Path, aggregates: &[AggregateSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    w.write_record(["metric", "n", "mean", "stderr", "values"])?;
    for a in aggregates {
        let vals: Vec<String> = a.values.iter().map(f64::to_string).collect();
        w.write_record([
            a.metric.clone(),
            a.values.len().to_string(),
            a.mean.to_string(),
            a.stderr.to_string(),
            vals.join(";"),
        ])?;
    }
    w.flush().map_err(|e| Error::file(path, e))
}

/// Figures and tables from every record under the records directory.
pub fn report_cmd(spec: &RunSpec) -> Result<Outcome> {
    let source = spec.report.records.clone().unwrap_or_else(|| spec.out_dir());
    let records = read_records(&source)?;
    if records.is_empty() {
        return Err(Error::Config(format!("no run records under {}", source.display())));
    }
    let fig = spec.out_dir().join("figures");
    let mut out = Outcome {
        seeds: derived_seeds(spec.seed),
        ..Default::default()
    };
    let with_experiments: Vec<RunRecord> = records.iter().filter(|r| !r.experiments.is_empty()).cloned().collect();
    if !with_experiments.is_empty() {
        emit_recognition_summary(&with_experiments, &fig, spec.report.human_reference)?;
        out.artifacts.push(fig.join("recognition_summary.csv"));
        let x = spec.report.histogram_exposures;
        let mut by_exp: BTreeMap<u8, (crate::results::LossSets, crate::results::LossSets)> = BTreeMap::new();
        for run in with_experiments.iter().flat_map(|r| &r.experiments) {
            if let (Some(pre), Some(post)) = (run.at(0), run.at(x)) {
                let entry = by_exp.entry(run.experiment).or_default();
                let (a, b) = (loss_sets(&pre.recognition), loss_sets(&post.recognition));
                entry.0.study.extend(a.study);
                entry.0.foil.extend(a.foil);
                entry.1.study.extend(b.study);
                entry.1.foil.extend(b.foil);
            }
        }
        for (e, (pre, post)) in &by_exp {
            emit_loss_histograms(pre, post, *e, &fig)?;
            out.artifacts.push(fig.join(format!("loss_histograms_e{e}.csv")));
        }
        let mut recall = Vec::new();
        let (mut pre, mut post) = (BTreeMap::new(), BTreeMap::new());
        for run in with_experiments.iter().flat_map(|r| &r.experiments).filter(|r| r.experiment == 1) {
            let last = run.probes.iter().map(|p| p.exposures).max().unwrap_or(0);
            if let Some(p) = run.at(last).filter(|_| last > 0) {
                let tag = format!("{:016x}", run.study_seed);
                for o in &p.recall.outcomes {
                    let mut o = o.clone();
                    o.sentence_id = format!("{tag}/{}", o.sentence_id);
                    recall.push(o);
                }
                pre.extend(study_losses_by_id(run, 0).into_iter().map(|(k, v)| (format!("{tag}/{k}"), v)));
                post.extend(study_losses_by_id(run, last).into_iter().map(|(k, v)| (format!("{tag}/{k}"), v)));
            }
        }
        if !recall.is_empty() {
            let a = emit_perfect_recall_analysis(&recall, &pre, &post, "e1", &fig)?;
            out.summary.push(format!("{} perfectly recalled of {}", a.perfect.n, a.perfect.n + a.other.n));
            out.artifacts.push(fig.join("perfect_recall_e1.csv"));
        }
    }
    let series: Vec<_> = records.iter().filter_map(|r| r.retention.clone()).collect();
    if !series.is_empty() {
        emit_retention_curves(&series, &fig)?;
        out.artifacts.push(fig.join("retention.csv"));
    }
    out.summary.push(format!("{} records read from {}", records.len(), source.display()));
    Ok(out)
}
