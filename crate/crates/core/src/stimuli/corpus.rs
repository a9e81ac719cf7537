use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Which generator produced a stimulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StimulusKind {
    NormalSentence,
    Paraphrase,
    SynonymSubstitute,
    RandomWords,
    RandomString,
}

impl StimulusKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StimulusKind::NormalSentence => "normal_sentence",
            StimulusKind::Paraphrase => "paraphrase",
            StimulusKind::SynonymSubstitute => "synonym_substitute",
            StimulusKind::RandomWords => "random_words",
            StimulusKind::RandomString => "random_string",
        }
    }
}

impl fmt::Display for StimulusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusItem {
    pub id: String,
    pub text: String,
    pub kind: StimulusKind,
}

impl StimulusItem {
    pub fn new(id: impl Into<String>, text: impl Into<String>, kind: StimulusKind) -> Self {
        StimulusItem {
            id: id.into(),
            text: text.into(),
            kind,
        }
    }
}

/// An ordered pool of stimuli with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    items: Vec<StimulusItem>,
    pub source: String,
    pub checksum: String,
}

impl Corpus {
    /// Build a corpus of normal sentences from in-memory texts. Empty texts
    /// are skipped; the checksum covers the retained texts.
    pub fn from_texts(
        source: impl Into<String>,
        texts: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        let source = source.into();
        let texts: Vec<String> = texts
            .into_iter()
            .map(Into::into)
            .filter(|t| !t.is_empty())
            .collect();
        let mut hasher = Sha256::new();
        for t in &texts {
            hasher.update((t.len() as u64).to_le_bytes());
            hasher.update(t.as_bytes());
        }
        let checksum = crate::hex(&hasher.finalize());
        let prefix = id_prefix(&source);
        let items = texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| StimulusItem::new(format!("{prefix}-{i:05}"), t, StimulusKind::NormalSentence))
            .collect();
        Corpus {
            items,
            source,
            checksum,
        }
    }

    pub fn items(&self) -> &[StimulusItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|i| i.text.as_str())
    }

    /// Number of texts occurring more than once.
    pub fn duplicate_count(&self) -> usize {
        let mut seen = HashSet::new();
        self.items.iter().filter(|i| !seen.insert(i.text.as_str())).count()
    }

    /// Items with a text not seen earlier in the corpus, in order.
    pub fn unique_items(&self) -> Vec<&StimulusItem> {
        let mut seen = HashSet::new();
        self.items.iter().filter(|i| seen.insert(i.text.as_str())).collect()
    }

    pub fn text_set(&self) -> HashSet<&str> {
        self.texts().collect()
    }
}

fn id_prefix(source: &str) -> String {
    Path::new(source)
        .file_stem()
        .and_then(|s| s.to_str())
        .filter(|s| !s.is_empty())
        .unwrap_or("item")
        .to_string()
}

/// Load a UTF-8 JSON document whose top-level value is an array of strings.
///
/// Order is preserved. Duplicates are kept and reported with a warning.
pub fn load_sentences(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    let texts: Vec<String> = serde_json::from_slice(&bytes).map_err(|e| {
        Error::parse(
            path,
            format!("line {}, column {}: {e}", e.line(), e.column()),
        )
    })?;
    if texts.is_empty() {
        return Err(Error::parse(path, "sentence array is empty"));
    }
    if let Some(i) = texts.iter().position(|t| t.is_empty()) {
        return Err(Error::parse(path, format!("sentence {i} is empty")));
    }
    let mut corpus = Corpus::from_texts(path.display().to_string(), texts);
    corpus.checksum = crate::hex(&Sha256::digest(&bytes));
    let dups = corpus.duplicate_count();
    if dups > 0 {
        log::warn!("{}: {dups} duplicate sentences retained", path.display());
    }
    Ok(corpus)
}

/// Write sentences in the format read by [`load_sentences`].
pub fn write_sentences(path: impl AsRef<Path>, texts: &[String]) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(texts)?;
    std::fs::write(path, json).map_err(|e| Error::file(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_array_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "s.json", r#"["a","b"]"#);
        let c = load_sentences(&p).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.texts().collect::<Vec<_>>(), ["a", "b"]);
        assert!(c.items().iter().all(|i| i.kind == StimulusKind::NormalSentence));
    }

    #[test]
    fn duplicates_are_retained() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "s.json", r#"["a","b","a"]"#);
        let c = load_sentences(&p).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.duplicate_count(), 1);
        assert_eq!(c.unique_items().len(), 2);
    }

    #[test]
    fn checksum_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "s.json", r#"["x", "y"]"#);
        assert_eq!(load_sentences(&p).unwrap().checksum, load_sentences(&p).unwrap().checksum);
    }

    #[test]
    fn malformed_and_empty_files_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let bad = write(&dir, "bad.json", "[\"a\",\n 3]");
        let err = load_sentences(&bad).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let empty = write(&dir, "empty.json", "[]");
        assert!(load_sentences(&empty).is_err());
    }

    #[test]
    fn ids_are_unique() {
        let c = Corpus::from_texts("pool.json", ["a", "a", "b"]);
        let ids: HashSet<_> = c.items().iter().map(|i| &i.id).collect();
        assert_eq!(ids.len(), 3);
    }
}
