//! A small English-like grammar that stands in for a natural-language
//! corpus when none is available.
//!
//! Every resource the experiments need can be generated from it: a
//! pretraining corpus, a disjoint sentence pool, an interference corpus,
//! paraphrase pairs (active and passive voice of the same event), a synonym
//! lexicon covering the adjectives and adverbs it uses, and a word
//! vocabulary for random-word stimuli.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

use super::corpus::{write_sentences, Corpus};
use super::resources::{ParaphrasePairs, SynonymLexicon};

const NAMES: &[&str] = &[
    "Anna", "Ben", "Clara", "David", "Ella", "Frank", "Grace", "Henry", "Iris", "Jack", "Kate",
    "Leo", "Maria", "Nick", "Olga", "Peter", "Rosa", "Sam", "Tom", "Vera", "Walter", "Zoe",
    "the doctor", "the teacher", "the farmer", "the captain", "the baker", "the old man",
    "my sister", "our neighbour", "the little girl", "the young boy",
];

const NOUNS: &[&str] = &[
    "book", "letter", "box", "key", "coat", "lamp", "chair", "table", "window", "door", "boat",
    "car", "horse", "dog", "cat", "bird", "garden", "house", "road", "bridge", "river", "tree",
    "basket", "bottle", "picture", "song", "story", "map", "ring", "bell", "cake", "apple",
    "bag", "hat", "wall", "fence", "clock", "plate", "cup", "knife",
];

const PLACES: &[&str] = &[
    "kitchen", "market", "station", "village", "forest", "harbour", "school", "church",
    "library", "field", "hill", "shop", "city", "valley", "lake", "office",
];

const PREPOSITIONS: &[&str] = &["in", "near", "behind", "at", "beside", "outside"];

const TIMES: &[&str] = &[
    "yesterday", "last night", "this morning", "on Monday", "on Sunday", "in the spring",
    "after lunch", "before dinner", "at noon", "last winter", "every evening", "early today",
];

/// `(past, past participle)`.
const TRANSITIVE: &[(&str, &str)] = &[
    ("found", "found"),
    ("lost", "lost"),
    ("opened", "opened"),
    ("closed", "closed"),
    ("painted", "painted"),
    ("carried", "carried"),
    ("washed", "washed"),
    ("fixed", "fixed"),
    ("broke", "broken"),
    ("took", "taken"),
    ("saw", "seen"),
    ("wrote", "written"),
    ("sold", "sold"),
    ("bought", "bought"),
    ("moved", "moved"),
    ("cleaned", "cleaned"),
    ("hid", "hidden"),
    ("kept", "kept"),
    ("stole", "stolen"),
    ("showed", "shown"),
    ("built", "built"),
    ("dropped", "dropped"),
    ("watched", "watched"),
    ("pulled", "pulled"),
];

const INTRANSITIVE: &[&str] = &[
    "slept", "laughed", "waited", "sang", "smiled", "walked", "worked", "danced", "cried",
    "rested", "spoke", "listened", "ran", "arrived", "left", "shouted",
];

/// Groups of interchangeable words. Adjectives first, then adverbs.
const SYNONYM_GROUPS: &[&[&str]] = &[
    &["big", "large", "huge"],
    &["small", "little", "tiny"],
    &["old", "ancient", "aged"],
    &["new", "fresh", "modern"],
    &["pretty", "lovely", "beautiful"],
    &["dirty", "muddy", "filthy"],
    &["clean", "spotless", "tidy"],
    &["strange", "odd", "curious"],
    &["heavy", "weighty", "bulky"],
    &["bright", "shiny", "gleaming"],
    &["dark", "dim", "gloomy"],
    &["broken", "damaged", "cracked"],
    &["red", "crimson", "scarlet"],
    &["cheap", "inexpensive", "affordable"],
    &["quiet", "silent", "hushed"],
    &["quickly", "rapidly", "swiftly"],
    &["slowly", "gradually", "leisurely"],
    &["happily", "gladly", "cheerfully"],
    &["sadly", "gloomily", "sorrowfully"],
    &["loudly", "noisily", "thunderously"],
    &["softly", "gently", "quietly"],
    &["carefully", "cautiously", "attentively"],
    &["often", "frequently", "regularly"],
    &["calmly", "peacefully", "serenely"],
];

const N_ADJECTIVE_GROUPS: usize = 15;

fn pick<'a, R: Rng>(rng: &mut R, words: &[&'a str]) -> &'a str {
    words.choose(rng).expect("word lists are non-empty")
}

fn adjective<R: Rng>(rng: &mut R) -> &'static str {
    let group = SYNONYM_GROUPS[rng.random_range(0..N_ADJECTIVE_GROUPS)];
    pick(rng, group)
}

fn adverb<R: Rng>(rng: &mut R) -> &'static str {
    let group = SYNONYM_GROUPS[rng.random_range(N_ADJECTIVE_GROUPS..SYNONYM_GROUPS.len())];
    pick(rng, group)
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// A noun phrase such as "the old lamp" or "Maria".
fn agent<R: Rng>(rng: &mut R) -> String {
    if rng.random_bool(0.6) {
        pick(rng, NAMES).to_string()
    } else {
        format!("the {} {}", adjective(rng), pick(rng, &["dog", "cat", "horse", "bird"]))
    }
}

fn object<R: Rng>(rng: &mut R) -> String {
    if rng.random_bool(0.7) {
        format!("the {} {}", adjective(rng), pick(rng, NOUNS))
    } else {
        format!("the {}", pick(rng, NOUNS))
    }
}

fn place<R: Rng>(rng: &mut R) -> String {
    format!("{} the {}", pick(rng, PREPOSITIONS), pick(rng, PLACES))
}

/// One transitive event, renderable in several voices.
struct Event {
    agent: String,
    verb: (&'static str, &'static str),
    object: String,
    place: Option<String>,
    time: Option<&'static str>,
}

impl Event {
    fn sample<R: Rng>(rng: &mut R) -> Self {
        Event {
            agent: agent(rng),
            verb: *TRANSITIVE.choose(rng).expect("non-empty"),
            object: object(rng),
            place: rng.random_bool(0.5).then(|| place(rng)),
            time: rng.random_bool(0.5).then(|| pick(rng, TIMES)),
        }
    }

    fn tail(&self) -> String {
        let mut t = String::new();
        if let Some(p) = &self.place {
            t.push(' ');
            t.push_str(p);
        }
        if let Some(time) = self.time {
            t.push(' ');
            t.push_str(time);
        }
        t
    }

    fn active(&self) -> String {
        capitalize(&format!("{} {} {}{}.", self.agent, self.verb.0, self.object, self.tail()))
    }

    fn passive(&self) -> String {
        capitalize(&format!(
            "{} was {} by {}{}.",
            self.object,
            self.verb.1,
            self.agent,
            self.tail()
        ))
    }
}

/// One sentence from the grammar.
pub fn sentence<R: Rng>(rng: &mut R) -> String {
    match rng.random_range(0..7) {
        0 | 1 => Event::sample(rng).active(),
        2 => Event::sample(rng).passive(),
        3 => capitalize(&format!(
            "{} {} {} {}.",
            agent(rng),
            pick(rng, INTRANSITIVE),
            adverb(rng),
            place(rng)
        )),
        4 => capitalize(&format!(
            "When {} {}, {} {} {}.",
            agent(rng),
            pick(rng, INTRANSITIVE),
            agent(rng),
            TRANSITIVE.choose(rng).expect("non-empty").0,
            object(rng)
        )),
        5 => capitalize(&format!(
            "{} {} {} because {} {} {}.",
            agent(rng),
            TRANSITIVE.choose(rng).expect("non-empty").0,
            object(rng),
            agent(rng),
            pick(rng, INTRANSITIVE),
            adverb(rng)
        )),
        _ => {
            let time = pick(rng, TIMES);
            capitalize(&format!(
                "{time}, {} {} {} and {} {}.",
                agent(rng),
                pick(rng, INTRANSITIVE),
                adverb(rng),
                TRANSITIVE.choose(rng).expect("non-empty").0,
                object(rng)
            ))
        }
    }
}

/// An active sentence and its passive rewording.
pub fn paraphrase_pair<R: Rng>(rng: &mut R) -> (String, String) {
    let e = Event::sample(rng);
    (e.active(), e.passive())
}

/// Every adjective and adverb mapped to the other members of its group.
pub fn lexicon() -> SynonymLexicon {
    let mut entries = BTreeMap::new();
    for group in SYNONYM_GROUPS {
        for w in *group {
            let others = group.iter().filter(|o| *o != w).map(|o| o.to_string()).collect();
            entries.insert(w.to_string(), others);
        }
    }
    SynonymLexicon::new(entries).expect("groups contain distinct words")
}

/// Lowercase single-word forms used anywhere in the grammar.
pub fn vocabulary() -> Vec<String> {
    let mut words = std::collections::BTreeSet::new();
    let mut add = |phrase: &str| {
        for w in phrase.split_whitespace() {
            words.insert(w.to_lowercase());
        }
    };
    NAMES.iter().chain(NOUNS).chain(PLACES).chain(PREPOSITIONS).chain(TIMES).chain(INTRANSITIVE).for_each(|p| add(p));
    for (a, b) in TRANSITIVE {
        add(a);
        add(b);
    }
    for g in SYNONYM_GROUPS {
        g.iter().for_each(|w| add(w));
    }
    for w in ["was", "by", "when", "because", "and"] {
        add(w);
    }
    words.into_iter().collect()
}

/// How many texts of each kind to generate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SynthSizes {
    pub pretrain: usize,
    pub pool: usize,
    pub interference: usize,
    pub paraphrases: usize,
}

impl Default for SynthSizes {
    fn default() -> Self {
        SynthSizes {
            pretrain: 20_000,
            pool: 6007,
            interference: 4000,
            paraphrases: 600,
        }
    }
}

/// Everything the experiments read, generated from one seed.
#[derive(Clone, Debug)]
pub struct SyntheticResources {
    pub pretrain: Corpus,
    pub pool: Corpus,
    pub interference: Corpus,
    pub paraphrases: ParaphrasePairs,
    pub lexicon: SynonymLexicon,
    pub vocabulary: Vec<String>,
}

fn fill<R: Rng>(
    rng: &mut R,
    n: usize,
    seen: &mut HashSet<String>,
    mut make: impl FnMut(&mut R) -> String,
) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(n);
    let mut misses = 0usize;
    while out.len() < n {
        let s = make(rng);
        if seen.insert(s.clone()) {
            out.push(s);
        } else {
            misses += 1;
            if misses > 10 * n + 1000 {
                return Err(Error::Config(format!(
                    "grammar cannot produce {n} distinct sentences"
                )));
            }
        }
    }
    Ok(out)
}

/// Generate all resources. Texts are unique across every output, so the
/// sentence pool never overlaps the pretraining or interference corpora.
pub fn generate(sizes: SynthSizes, seed_value: u64) -> Result<SyntheticResources> {
    let mut seen = HashSet::new();
    let mut rng = seed::rng_for(seed_value, &[seed::tag("synth-paraphrase")]);
    let mut pairs = Vec::with_capacity(sizes.paraphrases);
    let mut misses = 0usize;
    while pairs.len() < sizes.paraphrases {
        let (a, b) = paraphrase_pair(&mut rng);
        if !seen.contains(&a) && !seen.contains(&b) {
            seen.insert(a.clone());
            seen.insert(b.clone());
            pairs.push((a, b));
        } else {
            misses += 1;
            if misses > 10 * sizes.paraphrases + 1000 {
                return Err(Error::Config("grammar cannot produce enough paraphrases".into()));
            }
        }
    }
    let mut rng = seed::rng_for(seed_value, &[seed::tag("synth-pool")]);
    let pool = fill(&mut rng, sizes.pool, &mut seen, |r| sentence(r))?;
    let mut rng = seed::rng_for(seed_value, &[seed::tag("synth-pretrain")]);
    let pretrain = fill(&mut rng, sizes.pretrain, &mut seen, |r| sentence(r))?;
    let mut rng = seed::rng_for(seed_value, &[seed::tag("synth-interference")]);
    let interference = fill(&mut rng, sizes.interference, &mut seen, |r| sentence(r))?;
    Ok(SyntheticResources {
        pretrain: Corpus::from_texts("pretrain.json", pretrain),
        pool: Corpus::from_texts("pool.json", pool),
        interference: Corpus::from_texts("interference.json", interference),
        paraphrases: ParaphrasePairs::new(pairs)?,
        lexicon: lexicon(),
        vocabulary: vocabulary(),
    })
}

impl SyntheticResources {
    /// Write every resource to `dir` in the on-disk formats the loaders read:
    /// `pretrain.json`, `pool.json`, `interference.json`, `paraphrases.json`,
    /// `synonyms.tsv` and `vocabulary.txt`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        let texts = |c: &Corpus| c.texts().map(str::to_string).collect::<Vec<_>>();
        write_sentences(dir.join("pretrain.json"), &texts(&self.pretrain))?;
        write_sentences(dir.join("pool.json"), &texts(&self.pool))?;
        write_sentences(dir.join("interference.json"), &texts(&self.interference))?;
        self.paraphrases.save(dir.join("paraphrases.json"))?;
        let lex = dir.join("synonyms.tsv");
        std::fs::write(&lex, self.lexicon.to_text()).map_err(|e| Error::file(&lex, e))?;
        let vocab = dir.join("vocabulary.txt");
        let mut body = self.vocabulary.join("\n");
        body.push('\n');
        std::fs::write(&vocab, body).map_err(|e| Error::file(&vocab, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimuli::{load_sentences, load_vocabulary};

    fn small() -> SynthSizes {
        SynthSizes {
            pretrain: 2000,
            pool: 1000,
            interference: 500,
            paraphrases: 100,
        }
    }

    #[test]
    fn outputs_are_disjoint_and_seeded() {
        let r = generate(small(), 5).unwrap();
        let mut all = HashSet::new();
        for c in [&r.pretrain, &r.pool, &r.interference] {
            assert_eq!(c.duplicate_count(), 0);
            for t in c.texts() {
                assert!(all.insert(t.to_string()));
            }
        }
        for (a, b) in r.paraphrases.pairs() {
            assert!(!all.contains(a) && !all.contains(b));
        }
        let again = generate(small(), 5).unwrap();
        assert_eq!(r.pool, again.pool);
        assert_ne!(r.pool, generate(small(), 6).unwrap().pool);
    }

    #[test]
    fn sentences_fit_a_small_context() {
        let mut rng = seed::rng(1);
        for _ in 0..5000 {
            let s = sentence(&mut rng);
            assert!(s.len() >= 15 && s.len() <= 127, "{s}");
            assert!(s.ends_with('.'));
            assert!(s.chars().next().unwrap().is_uppercase());
        }
    }

    #[test]
    fn most_sentences_contain_a_lexicon_word() {
        let lex = lexicon();
        let mut rng = seed::rng(2);
        let hits = (0..1000)
            .filter(|_| {
                let s = sentence(&mut rng);
                crate::stimuli::substitute_text(&s, &lex, &mut seed::rng(0)).is_some()
            })
            .count();
        assert!(hits > 700, "{hits}");
    }

    #[test]
    fn paraphrases_share_content_words() {
        let mut rng = seed::rng(3);
        for _ in 0..100 {
            let (a, b) = paraphrase_pair(&mut rng);
            assert_ne!(a, b);
            assert!(b.contains(" was ") && b.contains(" by "));
        }
    }

    #[test]
    fn written_resources_load_back() {
        let dir = tempfile::tempdir().unwrap();
        let r = generate(small(), 9).unwrap();
        r.write(dir.path()).unwrap();
        let pool = load_sentences(dir.path().join("pool.json")).unwrap();
        assert_eq!(pool.texts().collect::<Vec<_>>(), r.pool.texts().collect::<Vec<_>>());
        let pairs = ParaphrasePairs::load(dir.path().join("paraphrases.json")).unwrap();
        assert_eq!(pairs, r.paraphrases);
        let lex = SynonymLexicon::load(dir.path().join("synonyms.tsv")).unwrap();
        assert_eq!(lex, r.lexicon);
        assert_eq!(load_vocabulary(dir.path().join("vocabulary.txt")).unwrap(), r.vocabulary);
    }
}
