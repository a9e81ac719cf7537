//! Stimulus resources, generators and trial construction.

mod corpus;
mod generators;
mod resources;
pub mod synth;
mod trials;

pub use corpus::{load_sentences, write_sentences, Corpus, StimulusItem, StimulusKind};
pub use generators::{
    gen_random_words, random_words_text, scramble_sentence, scramble_text, substitute_synonym,
    substitute_text, RANDOM_WORDS_LEN,
};
pub use resources::{load_vocabulary, ParaphrasePairs, SynonymLexicon};
pub use trials::{
    build_trial_sets, build_trials, experiment_kinds, is_paired_design, sample_disjoint,
    StudySet, TrialPair, TrialResources, TrialSet, EXPERIMENTS,
};
