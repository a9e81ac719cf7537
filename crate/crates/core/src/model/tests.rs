use super::*;
use crate::numerics::{finite_difference_gradient, relative_error};
use crate::stimuli::Corpus;

fn toy(seed: u64) -> TransformerConfig {
    TransformerConfig {
        n_layers: 2,
        d_model: 16,
        n_heads: 2,
        context_len: 32,
        vocab_size: VOCAB_SIZE,
        seed,
    }
}

fn seq(text: &str) -> TokenSequence {
    tokenize(text.as_bytes(), 32)
}

#[test]
fn later_tokens_do_not_change_earlier_logits() {
    let model = LanguageModel::new(toy(1)).unwrap();
    let a = model.logits(&[BOS, 10, 20, 30, 40]).unwrap();
    let b = model.logits(&[BOS, 10, 20, 99, 7]).unwrap();
    let v = VOCAB_SIZE;
    assert_eq!(&a[..3 * v], &b[..3 * v]);
    assert_ne!(&a[3 * v..4 * v], &b[3 * v..4 * v]);
}

#[test]
fn untrained_loss_is_near_uniform() {
    let model = LanguageModel::new(toy(2)).unwrap();
    let l = sequence_loss(&model, &seq("The quick brown fox jumps.")).unwrap();
    assert!((l.mean - (VOCAB_SIZE as f64).ln()).abs() < 0.5, "{}", l.mean);
    assert_eq!(l.tokens, seq("The quick brown fox jumps.").len() - 1);
    assert!((l.sum - l.mean * l.tokens as f64).abs() < 1e-9);
}

#[test]
fn cached_inference_matches_graph_forward() {
    let model = LanguageModel::new(toy(3)).unwrap();
    let ids: Vec<u32> = vec![BOS, 72, 105, 33, 10, 200];
    let mut g = crate::numerics::Graph::new();
    let as_usize: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
    let (logits, _) = model.forward_graph(&mut g, &as_usize, ids.len()).unwrap();
    let graph_logits = g.value(logits).values().to_vec();
    let mut state = DecodeState::new(&model);
    let mut cached = state.feed(&ids[..2]).unwrap();
    for &id in &ids[2..] {
        cached.extend(state.feed(&[id]).unwrap());
    }
    for (a, b) in graph_logits.iter().zip(&cached) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn sequence_of_one_token_is_rejected() {
    let model = LanguageModel::new(toy(4)).unwrap();
    let one = TokenSequence::from_ids(vec![BOS]);
    assert!(matches!(sequence_loss(&model, &one), Err(crate::Error::SequenceTooShort(1))));
}

#[test]
fn parameter_gradients_match_finite_differences() {
    let mut cfg = toy(5);
    cfg.d_model = 8;
    cfg.context_len = 8;
    let model = LanguageModel::new(cfg).unwrap();
    let batch = [
        TokenSequence::from_ids(vec![BOS, 1, 2, 3, EOS]),
        TokenSequence::from_ids(vec![BOS, 7, EOS]),
    ];
    let refs: Vec<&TokenSequence> = batch.iter().collect();
    let (mut g, loss, leaves) = model.batch_loss_graph(&refs).unwrap();
    g.backward(loss).unwrap();
    let names = ["h00.attn.qkv.w", "h01.mlp.fc.b", "ln_f.gain", "pos_emb", "h00.ln1.bias"];
    for name in names {
        let var = leaves.iter().find(|(n, _)| n == name).unwrap().1;
        let analytic = g.grad(var).unwrap().to_vec();
        let base = model.params().get(name).unwrap().clone();
        let numeric = finite_difference_gradient(
            |x| {
                let mut m = model.clone();
                *m.params_mut().get_mut(name).unwrap() = x.clone();
                let (g, l, _) = m.batch_loss_graph(&refs).unwrap();
                g.value(l).values()[0]
            },
            &base,
            1e-5,
        );
        for (a, n) in analytic.iter().zip(numeric.values()) {
            if a.abs() > 1e-6 || n.abs() > 1e-6 {
                assert!(relative_error(*a, *n) < 1e-3, "{name}: {a} vs {n}");
            } else {
                assert!((a - n).abs() < 1e-8, "{name}: {a} vs {n}");
            }
        }
    }
}

#[test]
fn zero_learning_rate_leaves_parameters_alone() {
    let mut ck = Checkpoint::new(toy(6)).unwrap();
    let before = ck.model.params().checksum();
    let loss = ck.train_step(&[seq("hello there")], 0.0).unwrap();
    assert!(loss.is_finite());
    assert_eq!(ck.model.params().checksum(), before);
    assert_eq!(ck.step, 1);
}

#[test]
fn negative_learning_rate_is_rejected() {
    let mut ck = Checkpoint::new(toy(6)).unwrap();
    assert!(ck.train_step(&[seq("hello")], -1.0).is_err());
    assert_eq!(ck.step, 0);
}

#[test]
fn repeated_training_memorizes_a_sentence() {
    let mut ck = Checkpoint::new(toy(7)).unwrap();
    let s = seq("abcabc xyz!");
    let first = ck.train_step(&[s.clone()], 3e-3).unwrap();
    for _ in 0..300 {
        ck.train_step(&[s.clone()], 3e-3).unwrap();
    }
    let last = sequence_loss(&ck.model, &s).unwrap().mean;
    assert!(last < 0.05 && last < first, "{first} -> {last}");
    let out = greedy_decode(&ck.model, &s.prefix(5), s.len() - 5).unwrap();
    assert_eq!(out.ids(), s.ids());
}

#[test]
fn greedy_decode_checks_context_first() {
    let model = LanguageModel::new(toy(8)).unwrap();
    let p = seq("abc");
    assert!(matches!(
        greedy_decode(&model, &p, 40),
        Err(crate::Error::ContextOverflow { .. })
    ));
    assert_eq!(greedy_decode(&model, &p, 0).unwrap().ids(), p.ids());
    let a = greedy_decode(&model, &p, 6).unwrap();
    assert_eq!(a, greedy_decode(&model, &p, 6).unwrap());
    assert_eq!(a.len(), p.len() + 6);
}

#[test]
fn checkpoint_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut ck = Checkpoint::new(toy(9)).unwrap();
    ck.train_step(&[seq("some text"), seq("more")], 1e-3).unwrap();
    let p1 = dir.path().join("a/ck.bin");
    let p2 = dir.path().join("b.bin");
    ck.save(&p1).unwrap();
    let loaded = Checkpoint::load(&p1).unwrap();
    loaded.save(&p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    assert_eq!(loaded, ck);
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let ck = Checkpoint::new(toy(9)).unwrap();
    let bytes = ck.to_bytes();
    assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(Checkpoint::from_bytes(&extra).is_err());
    let mut bad = bytes;
    bad[0] = b'X';
    assert!(Checkpoint::from_bytes(&bad).is_err());
}

fn corpus() -> Corpus {
    Corpus::from_texts(
        "c.json",
        (0..40).map(|i| format!("Sentence number {i} is here.")),
    )
}

#[test]
fn resumed_pretraining_is_bit_identical() {
    let c = corpus();
    let cfg = PretrainConfig {
        token_budget: 4 * 4 * 32,
        batch_size: 4,
        lr: 1e-3,
        log_interval: 1,
    };
    let mut straight = Checkpoint::new(toy(10)).unwrap();
    pretrain(&mut straight, &c, &cfg, |_| {}).unwrap();

    let half = PretrainConfig {
        token_budget: 2 * 4 * 32,
        ..cfg.clone()
    };
    let mut resumed = Checkpoint::new(toy(10)).unwrap();
    pretrain(&mut resumed, &c, &half, |_| {}).unwrap();
    let mut resumed = Checkpoint::from_bytes(&resumed.to_bytes()).unwrap();
    pretrain(&mut resumed, &c, &half, |_| {}).unwrap();
    assert_eq!(resumed.step, 4);
    assert_eq!(resumed.to_bytes(), straight.to_bytes());
}

#[test]
fn single_batch_budget_takes_one_step() {
    let c = corpus();
    let cfg = PretrainConfig {
        token_budget: 1,
        batch_size: 2,
        lr: 1e-3,
        log_interval: 50,
    };
    let mut ck = Checkpoint::new(toy(11)).unwrap();
    let log = pretrain(&mut ck, &c, &cfg, |_| {}).unwrap();
    assert_eq!(ck.step, 1);
    assert_eq!(log.len(), 1);
    assert_eq!(log[0].step, 1);
}

#[test]
fn sixteen_sentences_at_batch_sixteen_is_one_step() {
    let texts: Vec<TokenSequence> = (0..16).map(|i| seq(&format!("s{i}"))).collect();
    let mut ck = Checkpoint::new(toy(12)).unwrap();
    let batches: Vec<Vec<TokenSequence>> = texts.chunks(16).map(<[_]>::to_vec).collect();
    ck.train_steps(&batches, 1e-3).unwrap();
    assert_eq!(ck.step, 1);
}

#[test]
fn pretraining_lowers_loss() {
    let c = corpus();
    let cfg = PretrainConfig {
        token_budget: 60 * 8 * 32,
        batch_size: 8,
        lr: 3e-3,
        log_interval: 10,
    };
    let mut ck = Checkpoint::new(toy(13)).unwrap();
    let log = pretrain(&mut ck, &c, &cfg, |_| {}).unwrap();
    assert!(log.last().unwrap().loss < log[0].loss - 1.0, "{log:?}");
}

#[test]
fn packed_chunks_keep_sentences_whole() {
    let chunks = pack_chunks(["aaaa", "bbbbbb", "cc", "dddddddddddddddddd"], 10);
    for c in &chunks[..chunks.len() - 1] {
        assert!(c.len() <= 10);
        assert_eq!(c.ids()[0], BOS);
        assert_eq!(*c.ids().last().unwrap(), EOS);
    }
    // The over-long sentence is cut at the context length.
    let last = chunks.last().unwrap();
    assert_eq!(last.len(), 10);
    assert_ne!(*last.ids().last().unwrap(), EOS);
    let total: usize = chunks.iter().map(|c| c.ids().iter().filter(|&&i| i == BOS).count()).sum();
    assert_eq!(total, 4);
}

#[test]
fn loss_log_format() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("loss.tsv");
    write_loss_log(&p, &[LossLogEntry { step: 1, loss: 2.5 }, LossLogEntry { step: 50, loss: 1.25 }]).unwrap();
    assert_eq!(std::fs::read_to_string(p).unwrap(), "1\t2.5\n50\t1.25\n");
}
