use std::collections::{BTreeMap, HashSet};

use super::*;
use crate::protocol::{ExperimentRun, ExposureProbe, RecallProbe, RecognitionProbe, RetentionPoint, RetentionSeries, StudyReport};
use crate::scoring::{RecallOutcome, RecognitionOutcome};
use crate::stimuli::{StimulusKind, TrialSet};

fn probe(exposures: u8, accuracy: f64) -> ExposureProbe {
    let n = 10;
    let correct = (accuracy * n as f64).round() as usize;
    let outcomes = (0..n)
        .map(|i| RecognitionOutcome {
            trial_id: format!("t{i}"),
            loss_study_mean: 1.0,
            loss_foil_mean: if i < correct { 2.0 } else { 0.5 },
            loss_study_sum: 10.0,
            loss_foil_sum: 20.0,
            correct: i < correct,
        })
        .collect();
    ExposureProbe {
        exposures,
        recognition: RecognitionProbe { outcomes, accuracy },
        recall: RecallProbe {
            outcomes: vec![],
            mean_rouge_l: None,
            perfect_ids: vec![],
            skipped_truncated: 0,
        },
    }
}

fn run(experiment: u8, accs: &[f64]) -> ExperimentRun {
    ExperimentRun {
        experiment,
        study_seed: 1,
        trials: TrialSet {
            experiment,
            trials: vec![],
            dropped: 0,
        },
        study: StudyReport::default(),
        probes: std::iter::once(probe(0, 0.5))
            .chain(accs.iter().enumerate().map(|(i, &a)| probe(i as u8 + 1, a)))
            .collect(),
    }
}

fn record(seed: u64, runs: Vec<ExperimentRun>) -> RunRecord {
    let mut r = RunRecord::new("study", seed, serde_json::json!({"seed": seed}), 1);
    r.experiments = runs;
    r.metrics.insert("x".into(), 0.25);
    r
}

#[test]
fn record_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let r = record(3, vec![run(1, &[0.6, 0.8, 0.9])]);
    let path = write_record(&r, dir.path()).unwrap();
    assert_eq!(path.file_name().unwrap().to_str().unwrap(), format!("{}.json", r.id));
    assert_eq!(read_record(&path).unwrap(), r);
    assert_eq!(read_records(dir.path()).unwrap(), vec![r]);
}

#[test]
fn corrupted_record_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{\"schema_version\": 1, \"id\": ").unwrap();
    assert!(matches!(read_record(&p), Err(crate::Error::Parse { .. })));
}

#[test]
fn other_schema_versions_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let r = record(3, vec![]);
    let mut v = serde_json::to_value(&r).unwrap();
    v["schema_version"] = 99.into();
    let p = dir.path().join("old.json");
    std::fs::write(&p, v.to_string()).unwrap();
    assert!(matches!(
        read_record(&p),
        Err(crate::Error::SchemaVersion { found: 99, expected: 1 })
    ));
}

#[test]
fn run_ids_do_not_collide() {
    let mut ids = HashSet::new();
    for i in 0..1000u64 {
        let config = serde_json::json!({"lr": 1e-3, "n_items": i % 7});
        assert!(ids.insert(run_id("replicate", i, &config)));
    }
    let a = run_id("study", 1, &serde_json::json!({"lr": 1e-3}));
    let b = run_id("study", 1, &serde_json::json!({"lr": 2e-3}));
    assert_ne!(a, b);
}

#[test]
fn aggregate_matches_hand_computation() {
    let a = AggregateSummary::new("acc", vec![1.0, 0.9, 1.0, 0.9]).unwrap();
    assert!((a.mean - 0.95).abs() < 1e-12);
    // sd = sqrt(4 · 0.05² / 3), stderr = sd / 2
    let expected = (4.0 * 0.0025f64 / 3.0).sqrt() / 2.0;
    assert!((a.stderr - expected).abs() < 1e-12);
    assert!((a.stderr - 0.0289).abs() < 1e-4);
    assert_eq!(AggregateSummary::new("acc", vec![0.7; 4]).unwrap().stderr, 0.0);
    assert!(AggregateSummary::new("acc", vec![0.7]).is_err());
    let vals = [0.3, 0.1, 0.7, 0.5, 0.2];
    let m = AggregateSummary::new("m", vals.to_vec()).unwrap().mean;
    assert!((m - vals.iter().sum::<f64>() / 5.0).abs() < 1e-15);
}

#[test]
fn single_full_accuracy_record_gives_one_full_bar() {
    let dir = tempfile::tempdir().unwrap();
    let rows = emit_recognition_summary(&[record(1, vec![run(1, &[1.0])])], dir.path(), None).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].mean, Some(1.0));
    assert_eq!(rows[0].stderr, None);
    let svg = std::fs::read_to_string(dir.path().join("recognition_summary.svg")).unwrap();
    assert!(svg.starts_with("<?xml"));
    assert!(svg.contains("<rect"));
}

#[test]
fn summary_has_a_row_per_cell_and_marks_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let records = vec![
        record(1, vec![run(1, &[0.6, 0.8, 0.9]), run(4, &[0.7, 0.9, 1.0])]),
        record(2, vec![run(1, &[0.6, 0.8, 1.0])]),
    ];
    let rows = emit_recognition_summary(&records, dir.path(), Some(0.9)).unwrap();
    assert_eq!(rows.len(), 2 * 3);
    let csv = std::fs::read_to_string(dir.path().join("recognition_summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    let e1x3 = rows.iter().find(|r| r.experiment == 1 && r.exposures == 3).unwrap();
    assert_eq!(e1x3.n, 2);
    assert!((e1x3.mean.unwrap() - 0.95).abs() < 1e-12);

    let partial = vec![record(1, vec![run(1, &[0.6, 0.8, 0.9]), run(4, &[0.7])])];
    let rows = emit_recognition_summary(&partial, dir.path(), None).unwrap();
    let gap = rows.iter().find(|r| r.experiment == 4 && r.exposures == 2).unwrap();
    assert_eq!((gap.n, gap.note.as_str()), (0, "missing"));
}

#[test]
fn summary_bytes_ignore_record_order() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let recs: Vec<RunRecord> = (0..5)
        .map(|i| record(i, vec![run(1, &[0.1 * i as f64, 0.3, 0.7 + 0.01 * i as f64])]))
        .collect();
    let mut shuffled = recs.clone();
    shuffled.reverse();
    shuffled.swap(0, 2);
    emit_recognition_summary(&recs, a.path(), Some(0.8)).unwrap();
    emit_recognition_summary(&shuffled, b.path(), Some(0.8)).unwrap();
    for f in ["recognition_summary.csv", "recognition_summary.svg"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn freedman_diaconis_bins_cover_the_data() {
    let data: Vec<f64> = (0..1000).map(|i| ((i * 37) % 1000) as f64 / 100.0).collect();
    let edges = freedman_diaconis_edges(&data).unwrap();
    // IQR ≈ 5 and n^(1/3) = 10, so bins are about one unit wide.
    assert!((11..=12).contains(&edges.len()), "{}", edges.len());
    assert_eq!(edges[0], 0.0);
    assert_eq!(*edges.last().unwrap(), 9.99);
    assert_eq!(freedman_diaconis_edges(&[2.0, 2.0]).unwrap(), [1.5, 2.5]);
    assert!(freedman_diaconis_edges(&[]).is_err());
}

#[test]
fn identical_distributions_give_identical_histograms() {
    let dir = tempfile::tempdir().unwrap();
    let s = LossSets {
        study: vec![1.0, 1.5, 2.0, 2.2, 3.0],
        foil: vec![1.0, 1.5, 2.0, 2.2, 3.0],
    };
    let h = emit_loss_histograms(&s, &s, 1, dir.path()).unwrap();
    assert_eq!(h.pre_study, h.pre_foil);
    assert_eq!(h.pre_study, h.post_study);
    assert_eq!(h.pre_study.iter().sum::<usize>(), 5);
    assert_eq!(h.means[0], h.means[1]);
    assert!(dir.path().join("loss_histograms_e1.svg").exists());
    let empty = LossSets::default();
    assert!(emit_loss_histograms(&empty, &s, 1, dir.path()).is_err());
}

fn recall(id: &str, len: usize, perfect: bool) -> RecallOutcome {
    let reference: Vec<u32> = (0..len as u32).collect();
    let mut hyp = reference.clone();
    if !perfect {
        hyp[len - 1] = 999;
    }
    RecallOutcome::new(id, len / 2, reference, hyp).unwrap()
}

#[test]
fn perfect_recall_groups_partition_the_study_set() {
    let dir = tempfile::tempdir().unwrap();
    let outs = vec![recall("a", 4, true), recall("b", 10, false), recall("c", 6, true)];
    let pre: BTreeMap<String, f64> = [("a", 2.0), ("b", 3.0), ("c", 2.5)].map(|(k, v)| (k.to_string(), v)).into();
    let post: BTreeMap<String, f64> = [("a", 0.5), ("b", 1.5), ("c", 0.7)].map(|(k, v)| (k.to_string(), v)).into();
    let a = emit_perfect_recall_analysis(&outs, &pre, &post, "e1", dir.path()).unwrap();
    assert_eq!(a.perfect.n + a.other.n, 3);
    assert_eq!(a.perfect.mean_length, Some(5.0));
    assert!(a.perfect.mean_post_loss.unwrap() < a.other.mean_post_loss.unwrap());
    assert!(a.figure);
    let csv = std::fs::read_to_string(dir.path().join("perfect_recall_e1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);

    let all = emit_perfect_recall_analysis(&[recall("a", 4, true)], &pre, &post, "all", dir.path()).unwrap();
    assert_eq!(all.other.n, 0);
    assert!(all.figure);

    let none = emit_perfect_recall_analysis(&[recall("b", 4, false)], &pre, &post, "none", dir.path()).unwrap();
    assert!(!none.figure);
    assert!(!dir.path().join("perfect_recall_none.svg").exists());
    assert!(dir.path().join("perfect_recall_none.csv").exists());
}

fn series(points: &[(u64, f64, f64)]) -> RetentionSeries {
    RetentionSeries {
        points: points
            .iter()
            .map(|&(step, rec, rl)| RetentionPoint {
                step,
                recognition: [(1u8, rec), (4u8, rec)].into(),
                recall: [(StimulusKind::NormalSentence, rl)].into(),
                losses: BTreeMap::new(),
            })
            .collect(),
        wraps: 0,
    }
}

#[test]
fn retention_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let s = series(&[(0, 0.9, 0.95), (1, 0.85, 0.8), (10, 0.7, 0.6), (100, 0.6, 0.55)]);
    let rows = emit_retention_curves(std::slice::from_ref(&s), dir.path()).unwrap();
    assert_eq!(rows.len(), 4 * 3);
    let back = read_retention_csv(dir.path().join("retention.csv")).unwrap();
    assert_eq!(back, rows);
    for p in &s.points {
        let v = back
            .iter()
            .find(|r| r.step == p.step && r.metric == "normal_sentence")
            .unwrap();
        assert_eq!(v.value, p.recall[&StimulusKind::NormalSentence]);
    }
    let svg = std::fs::read_to_string(dir.path().join("retention.svg")).unwrap();
    assert_eq!(svg.matches("stroke-dasharray").count(), 2);
}

#[test]
fn baseline_only_series_draws_stars() {
    let dir = tempfile::tempdir().unwrap();
    emit_retention_curves(&[series(&[(0, 0.9, 0.95)])], dir.path()).unwrap();
    let svg = std::fs::read_to_string(dir.path().join("retention.svg")).unwrap();
    assert!(svg.contains("<polygon"));
    assert!(!svg.contains("<polyline"));
    assert!(!svg.contains("<circle"));
}

#[test]
fn figures_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let s = [series(&[(0, 0.9, 0.95), (3, 0.8, 0.7)]), series(&[(0, 0.8, 0.9), (3, 0.75, 0.6)])];
    emit_retention_curves(&s, a.path()).unwrap();
    emit_retention_curves(&[s[1].clone(), s[0].clone()], b.path()).unwrap();
    for f in ["retention.csv", "retention.svg"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
}
