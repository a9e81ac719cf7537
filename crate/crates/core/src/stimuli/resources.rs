//! Foil resources read from disk: paraphrase pairs, synonym lexicon and the
//! word vocabulary for random-word sequences.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(original, paraphrase)` pairs, stored as a JSON array of two-element
/// string arrays.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParaphrasePairs {
    pairs: Vec<(String, String)>,
}

impl ParaphrasePairs {
    pub fn new(pairs: Vec<(String, String)>) -> Result<Self> {
        for (i, (a, b)) in pairs.iter().enumerate() {
            if a.is_empty() || b.is_empty() {
                return Err(Error::Config(format!("paraphrase pair {i} has an empty text")));
            }
            if a == b {
                return Err(Error::Config(format!(
                    "paraphrase pair {i} repeats the original verbatim"
                )));
            }
        }
        Ok(ParaphrasePairs { pairs })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        let raw: Vec<[String; 2]> = serde_json::from_slice(&bytes).map_err(|e| {
            Error::parse(path, format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        Self::new(raw.into_iter().map(|[a, b]| (a, b)).collect())
            .map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let raw: Vec<[&str; 2]> = self.pairs.iter().map(|(a, b)| [a.as_str(), b.as_str()]).collect();
        std::fs::write(path, serde_json::to_string_pretty(&raw)?).map_err(|e| Error::file(path, e))
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Lower-case word → synonyms, from `word<TAB>syn1,syn2,…` lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SynonymLexicon {
    entries: BTreeMap<String, Vec<String>>,
}

impl SynonymLexicon {
    pub fn new(entries: BTreeMap<String, Vec<String>>) -> Result<Self> {
        let mut clean = BTreeMap::new();
        for (word, syns) in entries {
            let word = word.to_lowercase();
            if syns.iter().any(|s| s.to_lowercase() == word) {
                return Err(Error::Config(format!("`{word}` lists itself as a synonym")));
            }
            let syns: Vec<String> = syns.into_iter().filter(|s| !s.is_empty()).collect();
            if !syns.is_empty() {
                clean.insert(word, syns);
            }
        }
        Ok(SynonymLexicon { entries: clean })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, syns) = line
                .split_once('\t')
                .ok_or_else(|| Error::Config(format!("line {}: expected word<TAB>synonyms", n + 1)))?;
            let syns = syns.split(',').map(|s| s.trim().to_string()).collect();
            entries.insert(word.trim().to_string(), syns);
        }
        Self::new(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(w, s)| format!("{w}\t{}\n", s.join(",")))
            .collect()
    }

    pub fn get(&self, word: &str) -> Option<&[String]> {
        self.entries.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One word per line; blank lines are ignored.
pub fn load_vocabulary(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let words: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect();
    if words.is_empty() {
        return Err(Error::parse(path, "vocabulary is empty"));
    }
    Ok(words)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicon_parses_tab_separated_lines() {
        let lex = SynonymLexicon::parse("obligation\tduty\nbig\tlarge, huge\n").unwrap();
        assert_eq!(lex.get("Obligation").unwrap(), ["duty"]);
        assert_eq!(lex.get("big").unwrap(), ["large", "huge"]);
        assert!(lex.get("small").is_none());
    }

    #[test]
    fn lexicon_rejects_self_mapping() {
        assert!(SynonymLexicon::parse("big\tbig\n").is_err());
        assert!(SynonymLexicon::parse("no tab here\n").is_err());
    }

    #[test]
    fn paraphrase_pairs_must_differ() {
        assert!(ParaphrasePairs::new(vec![("a".into(), "a".into())]).is_err());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.json");
        std::fs::write(&p, r#"[["one", "uno"], ["two", "dos"]]"#).unwrap();
        let pairs = ParaphrasePairs::load(&p).unwrap();
        assert_eq!(pairs.len(), 2);
        pairs.save(&p).unwrap();
        assert_eq!(ParaphrasePairs::load(&p).unwrap(), pairs);
    }
}
