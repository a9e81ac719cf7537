//! Built-in checks runnable from the binary: gradients on random toy models,
//! the LCS scorer against enumeration, and bitwise repeatability of training.

use rand::Rng;

use crate::error::Result;
use crate::model::{gradient_check, pretrain, tokenize, Checkpoint, PretrainConfig, TokenSequence, TransformerConfig, VOCAB_SIZE};
use crate::scoring::{lcs_length, rouge_l};
use crate::seed;
use crate::stimuli::Corpus;

pub const GRADIENT_CONFIGS: usize = 20;
pub const GRADIENT_TOLERANCE: f64 = 1e-3;
pub const LCS_PAIRS: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SelfTestReport {
    pub checks: Vec<Check>,
}

impl SelfTestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
            .collect()
    }
}

/// A random small configuration and a batch of random token sequences.
pub fn toy_gradient_case(case_seed: u64) -> Result<(TransformerConfig, Vec<TokenSequence>)> {
    let mut rng = seed::rng(case_seed);
    let n_heads = [1, 2][rng.random_range(0..2)];
    let config = TransformerConfig {
        n_layers: rng.random_range(1..=2),
        d_model: n_heads * [2, 4][rng.random_range(0..2)],
        n_heads,
        context_len: 16,
        vocab_size: VOCAB_SIZE,
        seed: case_seed,
    };
    config.validate()?;
    let batch = (0..rng.random_range(1..=2))
        .map(|_| {
            let len = rng.random_range(2..=6);
            let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            tokenize(&bytes, config.context_len)
        })
        .collect();
    Ok((config, batch))
}

/// Worst relative gradient error over `n` random toy models.
pub fn gradient_selftest(master: u64, n: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 0..n {
        let (config, batch) = toy_gradient_case(seed::derive(master, &[seed::tag("gradcheck"), i as u64]))?;
        let model = crate::model::LanguageModel::new(config)?;
        worst = worst.max(gradient_check(&model, &batch, 1e-5)?);
    }
    Ok(worst)
}

fn brute_lcs(a: &[u8], b: &[u8]) -> usize {
    let is_subseq = |s: &[u8]| {
        let mut it = b.iter();
        s.iter().all(|c| it.any(|d| d == c))
    };
    (0u32..1 << a.len())
        .filter_map(|mask| {
            let s: Vec<u8> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| a[i]).collect();
            is_subseq(&s).then_some(s.len())
        })
        .max()
        .unwrap_or(0)
}

/// Number of random pairs on which the scorer disagrees with enumeration,
/// plus violations of the identity and half-prompt constructions.
pub fn lcs_selftest(master: u64, pairs: usize) -> Result<usize> {
    let mut rng = seed::rng_for(master, &[seed::tag("lcs")]);
    let mut bad = 0;
    for _ in 0..pairs {
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<u8> {
            let n = rng.random_range(0..=12);
            (0..n).map(|_| rng.random_range(0..4u8)).collect()
        };
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        if lcs_length(&a, &b) != brute_lcs(&a, &b) {
            bad += 1;
        }
    }
    for n in 1..=64u32 {
        let reference: Vec<u32> = (0..n).collect();
        if rouge_l(&reference, &reference)? != 1.0 {
            bad += 1;
        }
        let half = (n / 2) as usize;
        let mut hyp = reference[..half].to_vec();
        hyp.extend(std::iter::repeat_n(u32::MAX, n as usize - half));
        if rouge_l(&reference, &hyp)? != half as f64 / n as f64 {
            bad += 1;
        }
    }
    Ok(bad)
}

/// Train a toy model twice from the same seed and compare checkpoint bytes.
pub fn determinism_selftest(master: u64) -> Result<bool> {
    let corpus = Corpus::from_texts(
        "selftest",
        ["the cat sat on the mat.", "a dog ran in the park.", "birds sing at dawn.", "rain fell all night."],
    );
    let run = || -> Result<Vec<u8>> {
        let (config, _) = toy_gradient_case(seed::derive(master, &[seed::tag("determinism")]))?;
        let mut ck = Checkpoint::new(config)?;
        let cfg = PretrainConfig { token_budget: 4 * 2 * 16, batch_size: 2, lr: 1e-2, log_interval: 1 };
        pretrain(&mut ck, &corpus, &cfg, |_| {})?;
        Ok(ck.to_bytes())
    };
    Ok(run()? == run()?)
}

pub fn selftest(master: u64) -> Result<SelfTestReport> {
    let mut report = SelfTestReport::default();
    let worst = gradient_selftest(master, GRADIENT_CONFIGS)?;
    report.checks.push(Check {
        name: "gradients".into(),
        passed: worst <= GRADIENT_TOLERANCE,
        detail: format!("{GRADIENT_CONFIGS} toy models, worst relative error {worst:.2e}"),
    });
    let bad = lcs_selftest(master, LCS_PAIRS)?;
    report.checks.push(Check {
        name: "lcs".into(),
        passed: bad == 0,
        detail: format!("{LCS_PAIRS} random pairs plus identity and half-prompt cases, {bad} mismatches"),
    });
    let same = determinism_selftest(master)?;
    report.checks.push(Check {
        name: "determinism".into(),
        passed: same,
        detail: if same { "repeated training is byte-identical".into() } else { "repeated training differs".into() },
    });
    Ok(report)
}
