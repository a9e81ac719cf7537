use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PretrainConfig, TransformerConfig, VOCAB_SIZE};
use crate::protocol::{ProbeSchedule, StudyPhaseConfig, SweepGrid, DEFAULT_REPLICATIONS};
use crate::stimuli::{experiment_kinds, RANDOM_WORDS_LEN};

/// The run specification file. Every field has a default; unknown keys are
/// rejected. Relative paths are resolved against the file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    pub seed: u64,
    /// Output root. Unset means `MEMLAB_OUT`, then `runs`.
    pub out: Option<PathBuf>,
    pub workers: usize,
    pub model: ModelSpec,
    pub resources: ResourceSpec,
    pub pretrain: PretrainConfig,
    pub study: StudySpec,
    pub sweep: SweepGrid,
    pub retention: RetentionSpec,
    pub replicate: ReplicateSpec,
    pub report: ReportSpec,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            seed: 0,
            out: None,
            workers: 1,
            model: ModelSpec::default(),
            resources: ResourceSpec::default(),
            pretrain: PretrainConfig::default(),
            study: StudySpec::default(),
            sweep: SweepGrid::default(),
            retention: RetentionSpec::default(),
            replicate: ReplicateSpec::default(),
            report: ReportSpec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    /// Checkpoint to read (and, for `pretrain`, to write).
    pub checkpoint: Option<PathBuf>,
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub context_len: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            checkpoint: None,
            n_layers: 2,
            d_model: 64,
            n_heads: 4,
            context_len: 128,
        }
    }
}

impl ModelSpec {
    pub fn config(&self, seed: u64) -> TransformerConfig {
        TransformerConfig {
            n_layers: self.n_layers,
            d_model: self.d_model,
            n_heads: self.n_heads,
            context_len: self.context_len,
            vocab_size: VOCAB_SIZE,
            seed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResourceSpec {
    /// Sentence pool for study items and foils.
    pub sentences: Option<PathBuf>,
    pub paraphrases: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub vocabulary: Option<PathBuf>,
    pub pretrain_corpus: Option<PathBuf>,
    pub interference: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySpec {
    pub experiments: Vec<u8>,
    /// Study items (and trials) per experiment.
    pub n_items: usize,
    pub exposures: u8,
    pub lr: f64,
    pub batch_size: usize,
    pub random_words_len: usize,
    /// Zero the Adam moments carried in the checkpoint before studying.
    pub reset_optimizer: bool,
}

impl Default for StudySpec {
    fn default() -> Self {
        StudySpec {
            experiments: vec![1, 2, 3, 4, 5, 6],
            n_items: 60,
            exposures: 3,
            lr: 3e-3,
            batch_size: 8,
            random_words_len: RANDOM_WORDS_LEN,
            reset_optimizer: true,
        }
    }
}

impl StudySpec {
    pub fn phase(&self, seed: u64) -> StudyPhaseConfig {
        StudyPhaseConfig {
            exposures: self.exposures,
            lr: self.lr,
            batch_size: self.batch_size,
            seed,
            reset_optimizer: self.reset_optimizer,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetentionSpec {
    pub schedule: ProbeSchedule,
    /// Defaults to the study lr.
    pub lr: Option<f64>,
    /// Defaults to the study batch size.
    pub batch_size: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplicateSpec {
    pub reps: usize,
}

impl Default for ReplicateSpec {
    fn default() -> Self {
        ReplicateSpec {
            reps: DEFAULT_REPLICATIONS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSpec {
    /// Directory of run records; defaults to the output directory.
    pub records: Option<PathBuf>,
    /// Optional human accuracy drawn across the recognition figure.
    pub human_reference: Option<f64>,
    /// Exposure count whose losses are compared with the unstudied ones.
    pub histogram_exposures: u8,
}

impl Default for ReportSpec {
    fn default() -> Self {
        ReportSpec {
            records: None,
            human_reference: None,
            histogram_exposures: 1,
        }
    }
}

impl RunSpec {
    /// Parse a spec file and resolve its relative paths.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut spec = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::parse(path, m),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        spec.resolve_paths(base);
        Ok(spec)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec is always representable")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let r = &mut self.resources;
        for p in [
            &mut self.out,
            &mut r.sentences,
            &mut r.paraphrases,
            &mut r.lexicon,
            &mut r.vocabulary,
            &mut r.pretrain_corpus,
            &mut r.interference,
            &mut self.model.checkpoint,
            &mut self.report.records,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.config(self.seed).validate()?;
        if self.study.experiments.is_empty() {
            return Err(Error::Config("study.experiments is empty".into()));
        }
        for &e in &self.study.experiments {
            experiment_kinds(e)?;
        }
        if self.study.n_items == 0 {
            return Err(Error::Config("study.n_items must be positive".into()));
        }
        self.study.phase(self.seed).validate()?;
        self.sweep.validate()?;
        if self.replicate.reps < 2 {
            return Err(Error::Config("replicate.reps must be at least 2".into()));
        }
        if self.pretrain.token_budget == 0 || self.pretrain.batch_size == 0 {
            return Err(Error::Config("pretrain token_budget and batch_size must be positive".into()));
        }
        Ok(())
    }

    /// The checkpoint path, falling back to `<out>/pretrain/model.ckpt`.
    pub fn checkpoint_path(&self) -> PathBuf {
        self.model
            .checkpoint
            .clone()
            .unwrap_or_else(|| self.out_dir().join("pretrain").join("model.ckpt"))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("runs"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_all_defaults() {
        assert_eq!(RunSpec::parse("").unwrap(), RunSpec::default());
        RunSpec::default().validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunSpec::parse("sede = 3").is_err());
        assert!(RunSpec::parse("[study]\nexposure = 2").is_err());
    }

    #[test]
    fn serialized_spec_parses_back() {
        let mut s = RunSpec::default();
        s.seed = 9;
        s.study.experiments = vec![1, 5];
        s.report.human_reference = Some(0.9);
        assert_eq!(RunSpec::parse(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let bad = RunSpec::parse("[study]\nexperiments = [7]").unwrap();
        assert!(bad.validate().unwrap_err().is_config());
        let bad = RunSpec::parse("[retention]\nschedule = [1, 2]");
        assert!(bad.is_err());
    }

    #[test]
    fn relative_paths_follow_the_spec_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "[resources]\nsentences = \"data/s.json\"").unwrap();
        let s = RunSpec::load(&p).unwrap();
        assert_eq!(s.resources.sentences.unwrap(), dir.path().join("data/s.json"));
        assert_eq!(s.out, None);
        std::fs::write(&p, "out = \"results\"").unwrap();
        let s = RunSpec::load(&p).unwrap();
        assert_eq!(s.out_dir(), dir.path().join("results"));
    }
}
