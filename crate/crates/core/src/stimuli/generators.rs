//! Foil and study-item generators. Each is a pure function of its inputs and
//! seed.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

use super::corpus::{StimulusItem, StimulusKind};
use super::resources::SynonymLexicon;

/// Default length of a random-word sequence.
pub const RANDOM_WORDS_LEN: usize = 25;

/// `k` words drawn i.i.d. uniformly (with replacement) from `vocab`,
/// joined by single spaces.
pub fn random_words_text(vocab: &[String], k: usize, rng: &mut impl Rng) -> Result<String> {
    if vocab.is_empty() {
        return Err(Error::Empty("random-word vocabulary"));
    }
    if k == 0 {
        return Err(Error::Config("random-word sequences need at least one word".into()));
    }
    let words: Vec<&str> = (0..k)
        .map(|_| vocab[rng.random_range(0..vocab.len())].as_str())
        .collect();
    Ok(words.join(" "))
}

pub fn gen_random_words(vocab: &[String], k: usize, seed: u64) -> Result<StimulusItem> {
    let text = random_words_text(vocab, k, &mut seed::rng(seed))?;
    Ok(StimulusItem::new(
        format!("random-words-{seed:016x}"),
        text,
        StimulusKind::RandomWords,
    ))
}

/// Shuffle word order, then shuffle the characters inside every word.
/// Whitespace collapses to single spaces; punctuation moves with its word.
pub fn scramble_text(sentence: &str, rng: &mut impl Rng) -> Result<String> {
    let mut words: Vec<Vec<char>> = sentence.split_whitespace().map(|w| w.chars().collect()).collect();
    if words.is_empty() {
        return Err(Error::Empty("sentence to scramble"));
    }
    words.shuffle(rng);
    for w in words.iter_mut() {
        w.shuffle(rng);
    }
    Ok(words
        .into_iter()
        .map(|w| w.into_iter().collect::<String>())
        .collect::<Vec<_>>()
        .join(" "))
}

pub fn scramble_sentence(sentence: &str, seed: u64) -> Result<StimulusItem> {
    let text = scramble_text(sentence, &mut seed::rng(seed))?;
    Ok(StimulusItem::new(
        format!("random-string-{seed:016x}"),
        text,
        StimulusKind::RandomString,
    ))
}

/// Split a whitespace token into `(leading punctuation, core, trailing punctuation)`.
fn split_punct(token: &str) -> (&str, &str, &str) {
    let start = token
        .char_indices()
        .find(|(_, c)| c.is_alphanumeric())
        .map_or(token.len(), |(i, _)| i);
    let end = token
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_alphanumeric())
        .map_or(start, |(i, c)| i + c.len_utf8());
    if start >= end {
        return (token, "", "");
    }
    (&token[..start], &token[start..end], &token[end..])
}

fn match_case(template: &str, word: &str) -> String {
    let letters: Vec<char> = template.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
        return word.to_uppercase();
    }
    if letters.first().is_some_and(|c| c.is_uppercase()) {
        let mut chars = word.chars();
        return match chars.next() {
            Some(first) => first.to_uppercase().chain(chars).collect(),
            None => String::new(),
        };
    }
    word.to_string()
}

/// Replace one occurrence of one lexicon word by one of its synonyms.
///
/// The eligible word is chosen uniformly among the distinct lexicon words in
/// the sentence, then one of its occurrences uniformly, then a synonym
/// uniformly. Returns `None` when no word of the sentence is in the lexicon.
pub fn substitute_text(sentence: &str, lexicon: &SynonymLexicon, rng: &mut impl Rng) -> Option<String> {
    let tokens: Vec<&str> = sentence.split_whitespace().collect();
    let mut eligible: Vec<String> = Vec::new();
    for t in &tokens {
        let core = split_punct(t).1.to_lowercase();
        if lexicon.get(&core).is_some() && !eligible.contains(&core) {
            eligible.push(core);
        }
    }
    if eligible.is_empty() {
        return None;
    }
    let word = &eligible[rng.random_range(0..eligible.len())];
    let positions: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| split_punct(t).1.to_lowercase() == *word)
        .map(|(i, _)| i)
        .collect();
    let at = positions[rng.random_range(0..positions.len())];
    let syns = lexicon.get(word).expect("eligible word is in the lexicon");
    let syn = &syns[rng.random_range(0..syns.len())];
    let (pre, core, post) = split_punct(tokens[at]);
    let replacement = format!("{pre}{}{post}", match_case(core, syn));
    let mut out: Vec<String> = tokens.iter().map(|t| t.to_string()).collect();
    out[at] = replacement;
    Some(out.join(" "))
}

pub fn substitute_synonym(sentence: &str, lexicon: &SynonymLexicon, seed: u64) -> Option<StimulusItem> {
    substitute_text(sentence, lexicon, &mut seed::rng(seed)).map(|text| {
        StimulusItem::new(
            format!("synonym-{seed:016x}"),
            text,
            StimulusKind::SynonymSubstitute,
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn lexicon(pairs: &[(&str, &[&str])]) -> SynonymLexicon {
        let map: BTreeMap<String, Vec<String>> = pairs
            .iter()
            .map(|(w, s)| (w.to_string(), s.iter().map(|x| x.to_string()).collect()))
            .collect();
        SynonymLexicon::new(map).unwrap()
    }

    #[test]
    fn random_words_have_requested_length() {
        let vocab: Vec<String> = (0..19_000).map(|i| format!("w{i}")).collect();
        let item = gen_random_words(&vocab, 25, 3).unwrap();
        assert_eq!(item.text.split(' ').count(), 25);
        assert_eq!(item.kind, StimulusKind::RandomWords);
        let single = gen_random_words(&["x".to_string()], 1, 9).unwrap();
        assert_eq!(single.text, "x");
        assert!(gen_random_words(&[], 3, 1).is_err());
    }

    #[test]
    fn random_word_draws_are_uniform() {
        // Pearson chi-square against the uniform distribution over 10 words.
        let vocab: Vec<String> = (0..10).map(|i| i.to_string()).collect();
        let mut rng = seed::rng(77);
        let mut counts = [0usize; 10];
        let text = random_words_text(&vocab, 100_000, &mut rng).unwrap();
        for w in text.split(' ') {
            counts[w.parse::<usize>().unwrap()] += 1;
        }
        let expected = 10_000.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 99th percentile of chi-square with 9 degrees of freedom.
        assert!(chi2 < 21.666, "chi2 = {chi2}");
    }

    #[test]
    fn scramble_single_char_word_is_unchanged() {
        assert_eq!(scramble_sentence("a", 5).unwrap().text, "a");
    }

    #[test]
    fn scramble_preserves_characters_and_word_count() {
        let mut rng = seed::rng(1);
        for i in 0..1000u64 {
            let n_words = 1 + (i % 12) as usize;
            let sentence: Vec<String> = (0..n_words)
                .map(|j| format!("w{}rd{},", j, i % 7))
                .collect();
            let sentence = sentence.join("  ");
            let out = scramble_text(&sentence, &mut rng).unwrap();
            assert_eq!(out.split(' ').count(), n_words);
            let mut a: Vec<char> = sentence.chars().filter(|c| !c.is_whitespace()).collect();
            let mut b: Vec<char> = out.chars().filter(|c| !c.is_whitespace()).collect();
            a.sort_unstable();
            b.sort_unstable();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn substitutes_the_only_eligible_word() {
        let lex = lexicon(&[("obligation", &["duty"])]);
        let item = substitute_synonym("no obligation to give", &lex, 0).unwrap();
        assert_eq!(item.text, "no duty to give");
        assert_eq!(item.kind, StimulusKind::SynonymSubstitute);
    }

    #[test]
    fn preserves_case_and_punctuation() {
        let lex = lexicon(&[("big", &["large"])]);
        let mut rng = seed::rng(0);
        assert_eq!(substitute_text("Big dogs.", &lex, &mut rng).unwrap(), "Large dogs.");
        assert_eq!(substitute_text("so big!", &lex, &mut rng).unwrap(), "so large!");
    }

    #[test]
    fn no_lexicon_hit_is_dropped() {
        let lex = lexicon(&[("big", &["large"])]);
        assert!(substitute_synonym("nothing to see", &lex, 1).is_none());
    }

    #[test]
    fn substitution_changes_exactly_one_word() {
        let lex = lexicon(&[
            ("big", &["large", "huge"]),
            ("quick", &["fast"]),
            ("dog", &["hound"]),
        ]);
        let mut rng = seed::rng(42);
        let words = ["big", "quick", "dog", "the", "ran", "a", "Big", "dog,"];
        for i in 0..500 {
            let n = 3 + i % 9;
            let sentence: Vec<&str> = (0..n).map(|j| words[(i * 7 + j * 3) % words.len()]).collect();
            let sentence = sentence.join(" ");
            let Some(out) = substitute_text(&sentence, &lex, &mut rng) else {
                continue;
            };
            let a: Vec<&str> = sentence.split(' ').collect();
            let b: Vec<&str> = out.split(' ').collect();
            assert_eq!(a.len(), b.len());
            assert_eq!(a.iter().zip(&b).filter(|(x, y)| x != y).count(), 1, "{sentence} -> {out}");
        }
    }
}
