//! Two-alternative recognition trials for the six experiments.
//!
//! | experiment | study item | foil |
//! |---|---|---|
//! | 1 | normal sentence | unrelated normal sentence |
//! | 2 | normal sentence | its paraphrase |
//! | 3 | normal sentence | it with one word replaced by a synonym |
//! | 4 | random words | unrelated random words |
//! | 5 | random words | normal sentence |
//! | 6 | scrambled sentence | the sentence it was scrambled from |

use std::collections::HashSet;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

use super::corpus::{Corpus, StimulusItem, StimulusKind};
use super::generators::{random_words_text, scramble_text, substitute_text, RANDOM_WORDS_LEN};
use super::resources::{ParaphrasePairs, SynonymLexicon};

pub const EXPERIMENTS: [u8; 6] = [1, 2, 3, 4, 5, 6];

/// `(study kind, foil kind)` for an experiment.
pub fn experiment_kinds(experiment: u8) -> Result<(StimulusKind, StimulusKind)> {
    use StimulusKind::*;
    Ok(match experiment {
        1 => (NormalSentence, NormalSentence),
        2 => (NormalSentence, Paraphrase),
        3 => (NormalSentence, SynonymSubstitute),
        4 => (RandomWords, RandomWords),
        5 => (RandomWords, NormalSentence),
        6 => (RandomString, NormalSentence),
        other => return Err(Error::Config(format!("unknown experiment {other} (expected 1-6)"))),
    })
}

/// Whether foil `i` is derived from study item `i`.
pub fn is_paired_design(experiment: u8) -> bool {
    matches!(experiment, 2 | 3 | 6)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialPair {
    pub id: String,
    pub experiment: u8,
    pub study: StimulusItem,
    pub foil: StimulusItem,
}

/// The items studied in one replication of one experiment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudySet {
    pub items: Vec<StimulusItem>,
    pub replication_seed: u64,
    pub experiment: u8,
}

impl StudySet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Trials of one experiment plus the number of candidates dropped because a
/// foil could not be derived from them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSet {
    pub experiment: u8,
    pub trials: Vec<TrialPair>,
    pub dropped: usize,
}

impl TrialSet {
    pub fn study_set(&self, replication_seed: u64) -> StudySet {
        StudySet {
            items: self.trials.iter().map(|t| t.study.clone()).collect(),
            replication_seed,
            experiment: self.experiment,
        }
    }
}

/// Pools the trial builders draw from. Only the resources an experiment
/// needs have to be present.
#[derive(Clone, Copy, Debug)]
pub struct TrialResources<'a> {
    pub sentences: Option<&'a Corpus>,
    pub paraphrases: Option<&'a ParaphrasePairs>,
    pub lexicon: Option<&'a SynonymLexicon>,
    pub vocabulary: Option<&'a [String]>,
    pub random_words_len: usize,
}

impl Default for TrialResources<'_> {
    fn default() -> Self {
        TrialResources {
            sentences: None,
            paraphrases: None,
            lexicon: None,
            vocabulary: None,
            random_words_len: RANDOM_WORDS_LEN,
        }
    }
}

impl<'a> TrialResources<'a> {
    fn require_sentences(&self, experiment: u8) -> Result<&'a Corpus> {
        self.sentences.ok_or(Error::MissingResource {
            experiment,
            resource: "sentence file",
        })
    }

    fn require_vocabulary(&self, experiment: u8) -> Result<&'a [String]> {
        self.vocabulary.ok_or(Error::MissingResource {
            experiment,
            resource: "word vocabulary file",
        })
    }

    /// Unique sentences that are not part of the paraphrase resource.
    fn sentence_pool(&self, experiment: u8) -> Result<Vec<&'a StimulusItem>> {
        let corpus = self.require_sentences(experiment)?;
        let reserved: HashSet<&str> = self
            .paraphrases
            .map(|p| p.pairs().iter().flat_map(|(a, b)| [a.as_str(), b.as_str()]).collect())
            .unwrap_or_default();
        Ok(corpus
            .unique_items()
            .into_iter()
            .filter(|i| !reserved.contains(i.text.as_str()))
            .collect())
    }

    fn check(&self, experiment: u8) -> Result<()> {
        experiment_kinds(experiment)?;
        match experiment {
            1 | 6 => self.require_sentences(experiment).map(drop),
            2 => self.paraphrases.map(drop).ok_or(Error::MissingResource {
                experiment,
                resource: "paraphrase file",
            }),
            3 => {
                self.require_sentences(experiment)?;
                self.lexicon.map(drop).ok_or(Error::MissingResource {
                    experiment,
                    resource: "synonym lexicon",
                })
            }
            4 => self.require_vocabulary(experiment).map(drop),
            5 => {
                self.require_vocabulary(experiment)?;
                self.require_sentences(experiment).map(drop)
            }
            _ => unreachable!(),
        }
    }
}

/// Uniformly sample `n_study + n_foil` distinct texts without replacement and
/// split them into a study set and a foil list.
pub fn sample_disjoint(
    corpus: &Corpus,
    n_study: usize,
    n_foil: usize,
    seed: u64,
) -> Result<(StudySet, Vec<StimulusItem>)> {
    let pool = corpus.unique_items();
    let (study, foils) = sample_from(&pool, n_study, n_foil, seed)?;
    Ok((
        StudySet {
            items: study,
            replication_seed: seed,
            experiment: 1,
        },
        foils,
    ))
}

fn sample_from(
    pool: &[&StimulusItem],
    n_study: usize,
    n_foil: usize,
    seed: u64,
) -> Result<(Vec<StimulusItem>, Vec<StimulusItem>)> {
    let needed = n_study + n_foil;
    if needed > pool.len() {
        return Err(Error::InsufficientCorpus {
            required: needed,
            available: pool.len(),
        });
    }
    let mut rng = seed::rng_for(seed, &[seed::tag("sample")]);
    let picked = index::sample(&mut rng, pool.len(), needed).into_vec();
    let items: Vec<StimulusItem> = picked.into_iter().map(|i| pool[i].clone()).collect();
    let foils = items[n_study..].to_vec();
    let mut study = items;
    study.truncate(n_study);
    Ok((study, foils))
}

fn trial_seed(seed: u64, experiment: u8, index: usize, role: &str) -> u64 {
    seed::derive(seed, &[experiment as u64, index as u64, seed::tag(role)])
}

fn trial(experiment: u8, i: usize, study: StimulusItem, foil: StimulusItem) -> TrialPair {
    TrialPair {
        id: format!("e{experiment}-{i:04}"),
        experiment,
        study,
        foil,
    }
}

fn generated(experiment: u8, i: usize, role: &str, text: String, kind: StimulusKind) -> StimulusItem {
    StimulusItem::new(format!("e{experiment}-{i:04}-{role}"), text, kind)
}

fn random_word_items(
    experiment: u8,
    vocab: &[String],
    k: usize,
    n: usize,
    seed: u64,
    role: &str,
    avoid: &mut HashSet<String>,
) -> Result<Vec<StimulusItem>> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut attempt = 0u64;
        let text = loop {
            let s = seed::derive(trial_seed(seed, experiment, i, role), &[attempt]);
            let text = random_words_text(vocab, k, &mut seed::rng(s))?;
            if avoid.insert(text.clone()) {
                break text;
            }
            attempt += 1;
            if attempt > 64 {
                return Err(Error::Config(format!(
                    "vocabulary of {} words cannot produce {n} distinct sequences",
                    vocab.len()
                )));
            }
        };
        out.push(generated(experiment, i, role, text, StimulusKind::RandomWords));
    }
    Ok(out)
}

fn build_from_pool(
    experiment: u8,
    pool: &[&StimulusItem],
    res: &TrialResources,
    n: usize,
    seed: u64,
) -> Result<TrialSet> {
    let mut dropped = 0;
    let trials = match experiment {
        1 => {
            let (study, foils) = sample_from(pool, n, n, seed)?;
            study
                .into_iter()
                .zip(foils)
                .enumerate()
                .map(|(i, (s, f))| trial(1, i, s, f))
                .collect()
        }
        2 => {
            let pairs = res.paraphrases.expect("checked").pairs();
            if n > pairs.len() {
                return Err(Error::InsufficientCorpus {
                    required: n,
                    available: pairs.len(),
                });
            }
            let mut rng = seed::rng_for(seed, &[seed::tag("paraphrase")]);
            index::sample(&mut rng, pairs.len(), n)
                .into_iter()
                .enumerate()
                .map(|(i, j)| {
                    let (orig, para) = &pairs[j];
                    trial(
                        2,
                        i,
                        generated(2, i, "s", orig.clone(), StimulusKind::NormalSentence),
                        generated(2, i, "f", para.clone(), StimulusKind::Paraphrase),
                    )
                })
                .collect()
        }
        3 => {
            let lexicon = res.lexicon.expect("checked");
            let mut rng = seed::rng_for(seed, &[seed::tag("synonym-order")]);
            let order = index::sample(&mut rng, pool.len(), pool.len());
            let mut out = Vec::with_capacity(n);
            for j in order {
                if out.len() == n {
                    break;
                }
                let i = out.len();
                let source = pool[j];
                let mut trng = seed::rng(trial_seed(seed, 3, i, "f"));
                match substitute_text(&source.text, lexicon, &mut trng) {
                    Some(text) => out.push(trial(
                        3,
                        i,
                        source.clone(),
                        generated(3, i, "f", text, StimulusKind::SynonymSubstitute),
                    )),
                    None => dropped += 1,
                }
            }
            if out.len() < n {
                return Err(Error::InsufficientCorpus {
                    required: n,
                    available: out.len(),
                });
            }
            if dropped > 0 {
                log::info!("experiment 3: {dropped} sentences without a lexicon word were skipped");
            }
            out
        }
        4 => {
            let vocab = res.vocabulary.expect("checked");
            let mut seen = HashSet::new();
            let study = random_word_items(4, vocab, res.random_words_len, n, seed, "s", &mut seen)?;
            let foils = random_word_items(4, vocab, res.random_words_len, n, seed, "f", &mut seen)?;
            study
                .into_iter()
                .zip(foils)
                .enumerate()
                .map(|(i, (s, f))| trial(4, i, s, f))
                .collect()
        }
        5 => {
            let vocab = res.vocabulary.expect("checked");
            let (_, foils) = sample_from(pool, 0, n, seed)?;
            let mut seen: HashSet<String> = foils.iter().map(|f| f.text.clone()).collect();
            let study = random_word_items(5, vocab, res.random_words_len, n, seed, "s", &mut seen)?;
            study
                .into_iter()
                .zip(foils)
                .enumerate()
                .map(|(i, (s, f))| trial(5, i, s, f))
                .collect()
        }
        6 => {
            let mut rng = seed::rng_for(seed, &[seed::tag("scramble-order")]);
            let order = index::sample(&mut rng, pool.len(), pool.len());
            let mut out = Vec::with_capacity(n);
            for j in order {
                if out.len() == n {
                    break;
                }
                let i = out.len();
                let source = pool[j];
                let scrambled = (0..8u64).find_map(|attempt| {
                    let s = seed::derive(trial_seed(seed, 6, i, "s"), &[attempt]);
                    scramble_text(&source.text, &mut seed::rng(s))
                        .ok()
                        .filter(|t| *t != source.text)
                });
                match scrambled {
                    Some(text) => out.push(trial(
                        6,
                        i,
                        generated(6, i, "s", text, StimulusKind::RandomString),
                        source.clone(),
                    )),
                    None => dropped += 1,
                }
            }
            if out.len() < n {
                return Err(Error::InsufficientCorpus {
                    required: n,
                    available: out.len(),
                });
            }
            out
        }
        _ => unreachable!("validated by check"),
    };
    Ok(TrialSet {
        experiment,
        trials,
        dropped,
    })
}

/// Build `n` trials for one experiment.
pub fn build_trials(experiment: u8, res: &TrialResources, n: usize, seed: u64) -> Result<TrialSet> {
    res.check(experiment)?;
    let pool = if res.sentences.is_some() {
        res.sentence_pool(experiment)?
    } else {
        Vec::new()
    };
    build_from_pool(experiment, &pool, res, n, seed)
}

/// Build trials for several experiments at once, drawing each experiment's
/// sentences from a disjoint slice of the pool so that no text studied in
/// one experiment serves as a foil (or a study item) in another.
pub fn build_trial_sets(
    experiments: &[u8],
    res: &TrialResources,
    n: usize,
    seed: u64,
) -> Result<Vec<TrialSet>> {
    let mut uniq = HashSet::new();
    for &e in experiments {
        res.check(e)?;
        if !uniq.insert(e) {
            return Err(Error::Config(format!("experiment {e} listed twice")));
        }
    }
    let first_with_pool = experiments.iter().copied().find(|e| matches!(e, 1 | 3 | 5 | 6));
    let pool = if let Some(e) = first_with_pool {
        let p = res.sentence_pool(e)?;
        let mut rng = seed::rng_for(seed, &[seed::tag("partition")]);
        let order = index::sample(&mut rng, p.len(), p.len());
        order.into_iter().map(|i| p[i]).collect()
    } else {
        Vec::new()
    };
    // Each slice is twice the number of trials (experiment 6 may drop
    // a few sources); experiment 3 takes whatever remains.
    let mut offset = 0;
    let mut slices = std::collections::BTreeMap::new();
    for e in [1u8, 5, 6] {
        if experiments.contains(&e) {
            let end = (offset + 2 * n).min(pool.len());
            slices.insert(e, &pool[offset..end]);
            offset = end;
        }
    }
    slices.insert(3, &pool[offset.min(pool.len())..]);
    experiments
        .iter()
        .map(|&e| {
            let slice: &[&StimulusItem] = slices.get(&e).copied().unwrap_or(&[]);
            let exp_seed = seed::derive(seed, &[e as u64]);
            build_from_pool(e, slice, res, n, exp_seed)
        })
        .collect()
}
