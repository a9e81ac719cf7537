use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::protocol::{ExperimentRun, RecallProbe, RecognitionProbe, RetentionSeries, SweepResult};

/// Version of the on-disk record layout. Bump on any incompatible change.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Environment {
    pub build: String,
    pub threads: usize,
}

impl Environment {
    pub fn current(threads: usize) -> Self {
        Environment {
            build: format!("memlab {}", env!("CARGO_PKG_VERSION")),
            threads,
        }
    }
}

/// A stand-alone probe of an unstudied checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutput {
    pub experiment: u8,
    pub recognition: Option<RecognitionProbe>,
    pub recall: Option<RecallProbe>,
}

/// Everything needed to audit and reproduce one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub id: String,
    pub command: String,
    /// Wall-clock time of the run. Left empty by default so that repeated
    /// runs produce identical files.
    pub timestamp: Option<String>,
    /// The fully resolved run specification.
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub seed_hash: String,
    /// SHA-256 of every input file or corpus, by role.
    pub checksums: BTreeMap<String, String>,
    pub experiments: Vec<ExperimentRun>,
    pub probes: Vec<ProbeOutput>,
    pub sweep: Option<SweepResult>,
    pub retention: Option<RetentionSeries>,
    /// Headline numbers, e.g. `recognition.e1.x3`.
    pub metrics: BTreeMap<String, f64>,
    pub environment: Environment,
}

/// Hex SHA-256 of the canonical JSON form of `config`.
pub fn config_hash(config: &serde_json::Value) -> String {
    let canonical = serde_json::to_vec(config).expect("JSON values always serialize");
    crate::hex(&Sha256::digest(canonical))
}

/// `command-seed-hash`, unique for any distinct `(seed, config)` pair.
pub fn run_id(command: &str, seed: u64, config: &serde_json::Value) -> String {
    format!("{command}-{seed:016x}-{}", &config_hash(config)[..16])
}

impl RunRecord {
    pub fn new(command: &str, seed: u64, config: serde_json::Value, threads: usize) -> Self {
        let mut seeds = BTreeMap::new();
        seeds.insert("master".to_string(), seed);
        RunRecord {
            schema_version: SCHEMA_VERSION,
            id: run_id(command, seed, &config),
            command: command.to_string(),
            timestamp: None,
            config,
            seeds,
            seed_hash: crate::seed::SEED_HASH.to_string(),
            checksums: BTreeMap::new(),
            experiments: Vec::new(),
            probes: Vec::new(),
            sweep: None,
            retention: None,
            metrics: BTreeMap::new(),
            environment: Environment::current(threads),
        }
    }

    pub fn experiment(&self, e: u8) -> Option<&ExperimentRun> {
        self.experiments.iter().find(|r| r.experiment == e)
    }
}

/// Write `record` to `dir/<id>.json` and return the path.
pub fn write_record(record: &RunRecord, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let path = dir.join(format!("{}.json", record.id));
    let mut json = serde_json::to_string_pretty(record)?;
    json.push('\n');
    std::fs::write(&path, json).map_err(|e| Error::file(&path, e))?;
    Ok(path)
}

pub fn read_record(path: impl AsRef<Path>) -> Result<RunRecord> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::parse(path, "missing schema_version"))?;
    if found != SCHEMA_VERSION as u64 {
        return Err(Error::SchemaVersion {
            found,
            expected: SCHEMA_VERSION as u64,
        });
    }
    serde_json::from_value(value).map_err(|e| Error::parse(path, e.to_string()))
}

/// Every record (`*.json` with a `schema_version`) below `dir`, sorted by path.
pub fn read_records(dir: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let mut paths = Vec::new();
    collect_json(dir.as_ref(), &mut paths)?;
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        match read_record(&p) {
            Ok(r) => out.push(r),
            Err(Error::Parse { message, .. }) if message == "missing schema_version" => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn collect_json(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::file(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::file(dir, e))?.path();
        if path.is_dir() {
            collect_json(&path, out)?;
        } else if path.extension().is_some_and(|x| x == "json") {
            out.push(path);
        }
    }
    Ok(())
}
