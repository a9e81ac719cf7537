use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{ExperimentRun, RecognitionProbe, RetentionSeries};
use crate::scoring::RecallOutcome;

use super::aggregate::mean_stderr;
use super::record::RunRecord;
use super::svg::{Panel, Svg, PALETTE};

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::file(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    })?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::file(path, e))
}

fn write_text(path: &Path, body: String) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::file(path, e))
}

fn prepare(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))
}

// ---------------------------------------------------------------------------
// Recognition bars

/// One bar of the recognition figure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecognitionRow {
    pub experiment: u8,
    pub exposures: u8,
    pub n: usize,
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
    pub note: String,
}

/// Accuracy by experiment and exposure count over all records, as
/// `recognition_summary.csv` and `recognition_summary.svg` in `dir`.
/// Cells without data are kept as empty rows and drawn as gaps.
pub fn emit_recognition_summary(
    records: &[RunRecord],
    dir: impl AsRef<Path>,
    human_reference: Option<f64>,
) -> Result<Vec<RecognitionRow>> {
    let dir = dir.as_ref();
    let mut cells: BTreeMap<(u8, u8), Vec<f64>> = BTreeMap::new();
    let mut experiments = BTreeSet::new();
    let mut exposures = BTreeSet::new();
    for run in records.iter().flat_map(|r| &r.experiments) {
        experiments.insert(run.experiment);
        for p in run.probes.iter().filter(|p| p.exposures > 0) {
            exposures.insert(p.exposures);
            cells
                .entry((run.experiment, p.exposures))
                .or_default()
                .push(p.recognition.accuracy);
        }
    }
    if experiments.is_empty() {
        return Err(Error::Empty("records with recognition results"));
    }
    let mut rows = Vec::new();
    for &e in &experiments {
        for &x in &exposures {
            let row = match cells.get(&(e, x)) {
                Some(v) => {
                    let (mean, stderr) = mean_stderr(v);
                    RecognitionRow {
                        experiment: e,
                        exposures: x,
                        n: v.len(),
                        mean: Some(mean),
                        stderr,
                        note: String::new(),
                    }
                }
                None => RecognitionRow {
                    experiment: e,
                    exposures: x,
                    n: 0,
                    mean: None,
                    stderr: None,
                    note: "missing".into(),
                },
            };
            rows.push(row);
        }
    }
    prepare(dir)?;
    write_csv(&dir.join("recognition_summary.csv"), &rows)?;
    write_text(
        &dir.join("recognition_summary.svg"),
        recognition_svg(&rows, &experiments, &exposures, human_reference),
    )?;
    Ok(rows)
}

fn recognition_svg(rows: &[RecognitionRow], experiments: &BTreeSet<u8>, exposures: &BTreeSet<u8>, human: Option<f64>) -> String {
    let (left, top, width, height) = (70.0, 40.0, 120.0 * experiments.len() as f64, 260.0);
    let mut svg = Svg::new(left + width + 140.0, top + height + 60.0);
    let panel = Panel::draw(
        &mut svg,
        left,
        top,
        width,
        height,
        (0.0, experiments.len() as f64),
        (0.0, 1.0),
        "Recognition accuracy",
        "experiment",
        "accuracy",
    );
    let group_w = 1.0 / (exposures.len() as f64 + 1.0);
    let exposure_index: BTreeMap<u8, usize> = exposures.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let exp_index: BTreeMap<u8, usize> = experiments.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    for r in rows {
        let Some(mean) = r.mean else { continue };
        let xi = exposure_index[&r.exposures];
        let x0 = exp_index[&r.experiment] as f64 + group_w * (0.5 + xi as f64);
        let (px0, px1) = (panel.x.map(x0), panel.x.map(x0 + group_w));
        let py = panel.y.map(mean);
        svg.rect(px0, py, px1 - px0, panel.y.map(0.0) - py, PALETTE[xi % PALETTE.len()], 0.9);
        if let Some(se) = r.stderr {
            let cx = (px0 + px1) / 2.0;
            let (lo, hi) = (panel.y.map((mean - se).max(0.0)), panel.y.map((mean + se).min(1.0)));
            svg.line(cx, lo, cx, hi, "black", false);
            svg.line(cx - 3.0, lo, cx + 3.0, lo, "black", false);
            svg.line(cx - 3.0, hi, cx + 3.0, hi, "black", false);
        }
    }
    let ticks: Vec<(f64, String)> = experiments
        .iter()
        .enumerate()
        .map(|(i, e)| (i as f64 + 0.5, e.to_string()))
        .collect();
    panel.x_ticks(&mut svg, &ticks);
    let chance = panel.y.map(0.5);
    svg.line(panel.x.p0, chance, panel.x.p1, chance, "gray", true);
    if let Some(h) = human {
        let py = panel.y.map(h);
        svg.line(panel.x.p0, py, panel.x.p1, py, "black", true);
        svg.text(panel.x.p1 + 4.0, py + 4.0, 10.0, "start", "human");
    }
    for (i, x) in exposures.iter().enumerate() {
        let y = top + 14.0 * i as f64;
        svg.rect(panel.x.p1 + 50.0, y, 10.0, 10.0, PALETTE[i % PALETTE.len()], 0.9);
        svg.text(panel.x.p1 + 64.0, y + 9.0, 10.0, "start", &format!("{x} exposure{}", if *x == 1 { "" } else { "s" }));
    }
    svg.finish()
}

// ---------------------------------------------------------------------------
// Loss histograms

/// Per-item mean losses of study items and foils.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossSets {
    pub study: Vec<f64>,
    pub foil: Vec<f64>,
}

pub fn loss_sets(probe: &RecognitionProbe) -> LossSets {
    LossSets {
        study: probe.outcomes.iter().map(|o| o.loss_study_mean).collect(),
        foil: probe.outcomes.iter().map(|o| o.loss_foil_mean).collect(),
    }
}

/// Study-item loss keyed by study item id after `exposures` exposures.
pub fn study_losses_by_id(run: &ExperimentRun, exposures: u8) -> BTreeMap<String, f64> {
    let Some(probe) = run.at(exposures) else {
        return BTreeMap::new();
    };
    let by_trial: BTreeMap<&str, f64> = probe
        .recognition
        .outcomes
        .iter()
        .map(|o| (o.trial_id.as_str(), o.loss_study_mean))
        .collect();
    run.trials
        .trials
        .iter()
        .filter_map(|t| by_trial.get(t.id.as_str()).map(|&l| (t.study.id.clone(), l)))
        .collect()
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Bin edges by the Freedman–Diaconis rule (`2·IQR·n^(−1/3)`), at most 200
/// bins. Degenerate data gets a single unit-width bin.
pub fn freedman_diaconis_edges(data: &[f64]) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::Empty("histogram data"));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("histogram data"));
    }
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    let (min, max) = (v[0], v[v.len() - 1]);
    if max == min {
        return Ok(vec![min - 0.5, min + 0.5]);
    }
    let iqr = quantile(&v, 0.75) - quantile(&v, 0.25);
    let h = 2.0 * iqr / (v.len() as f64).cbrt();
    let bins = if h > 0.0 {
        (((max - min) / h).ceil() as usize).clamp(1, 200)
    } else {
        (v.len() as f64).sqrt().ceil() as usize
    };
    let width = (max - min) / bins as f64;
    Ok((0..=bins).map(|i| min + width * i as f64).collect())
}

fn counts(edges: &[f64], data: &[f64]) -> Vec<usize> {
    let bins = edges.len() - 1;
    let mut c = vec![0; bins];
    for &x in data {
        let i = edges[1..].partition_point(|&e| e < x).min(bins - 1);
        c[i] += 1;
    }
    c
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub pre_study: Vec<usize>,
    pub pre_foil: Vec<usize>,
    pub post_study: Vec<usize>,
    pub post_foil: Vec<usize>,
    /// Means of pre study, pre foil, post study, post foil.
    pub means: [f64; 4],
}

#[derive(Serialize)]
struct HistogramRow {
    row: &'static str,
    lo: Option<f64>,
    hi: Option<f64>,
    pre_study: f64,
    pre_foil: f64,
    post_study: f64,
    post_foil: f64,
}

/// Overlaid study and foil loss histograms before (top) and after (bottom)
/// exposure, with shared Freedman–Diaconis bins over all four lists.
/// Writes `loss_histograms_e<experiment>.{csv,svg}`.
pub fn emit_loss_histograms(pre: &LossSets, post: &LossSets, experiment: u8, dir: impl AsRef<Path>) -> Result<Histogram> {
    let dir = dir.as_ref();
    for (name, v) in [("pre study", &pre.study), ("pre foil", &pre.foil), ("post study", &post.study), ("post foil", &post.foil)] {
        if v.is_empty() {
            return Err(Error::Config(format!("{name} losses are empty")));
        }
    }
    let pooled: Vec<f64> = [&pre.study, &pre.foil, &post.study, &post.foil].into_iter().flatten().copied().collect();
    let edges = freedman_diaconis_edges(&pooled)?;
    let mean = |v: &[f64]| mean_stderr(v).0;
    let h = Histogram {
        pre_study: counts(&edges, &pre.study),
        pre_foil: counts(&edges, &pre.foil),
        post_study: counts(&edges, &post.study),
        post_foil: counts(&edges, &post.foil),
        means: [mean(&pre.study), mean(&pre.foil), mean(&post.study), mean(&post.foil)],
        edges,
    };
    let mut rows: Vec<HistogramRow> = (0..h.edges.len() - 1)
        .map(|i| HistogramRow {
            row: "bin",
            lo: Some(h.edges[i]),
            hi: Some(h.edges[i + 1]),
            pre_study: h.pre_study[i] as f64,
            pre_foil: h.pre_foil[i] as f64,
            post_study: h.post_study[i] as f64,
            post_foil: h.post_foil[i] as f64,
        })
        .collect();
    rows.push(HistogramRow {
        row: "mean",
        lo: None,
        hi: None,
        pre_study: h.means[0],
        pre_foil: h.means[1],
        post_study: h.means[2],
        post_foil: h.means[3],
    });
    prepare(dir)?;
    write_csv(&dir.join(format!("loss_histograms_e{experiment}.csv")), &rows)?;
    write_text(&dir.join(format!("loss_histograms_e{experiment}.svg")), histogram_svg(&h, experiment))?;
    Ok(h)
}

fn histogram_svg(h: &Histogram, experiment: u8) -> String {
    let (left, width, height) = (70.0, 420.0, 150.0);
    let mut svg = Svg::new(left + width + 130.0, 2.0 * height + 150.0);
    let x_range = (h.edges[0], h.edges[h.edges.len() - 1]);
    let rows = [
        ("before exposure", &h.pre_study, &h.pre_foil, h.means[0], h.means[1]),
        ("after exposure", &h.post_study, &h.post_foil, h.means[2], h.means[3]),
    ];
    let ymax = rows
        .iter()
        .flat_map(|r| r.1.iter().chain(r.2.iter()))
        .copied()
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    for (k, (title, study, foil, ms, mf)) in rows.into_iter().enumerate() {
        let top = 40.0 + k as f64 * (height + 60.0);
        let panel = Panel::draw(
            &mut svg,
            left,
            top,
            width,
            height,
            x_range,
            (0.0, ymax),
            &format!("Experiment {experiment}: {title}"),
            "loss (nats/token)",
            "count",
        );
        for (series, color) in [(study, PALETTE[0]), (foil, PALETTE[1])] {
            for (i, &c) in series.iter().enumerate() {
                let (x0, x1) = (panel.x.map(h.edges[i]), panel.x.map(h.edges[i + 1]));
                let y = panel.y.map(c as f64);
                svg.rect(x0, y, x1 - x0, panel.y.map(0.0) - y, color, 0.5);
            }
        }
        svg.triangle_down(panel.x.map(ms), top + 2.0, 5.0, PALETTE[0]);
        svg.triangle_down(panel.x.map(mf), top + 2.0, 5.0, PALETTE[1]);
        let ticks: Vec<(f64, String)> = (0..=4)
            .map(|i| {
                let v = x_range.0 + (x_range.1 - x_range.0) * i as f64 / 4.0;
                (v, format!("{v:.2}"))
            })
            .collect();
        panel.x_ticks(&mut svg, &ticks);
    }
    for (i, label) in ["study", "foil"].iter().enumerate() {
        let y = 40.0 + 14.0 * i as f64;
        svg.rect(left + width + 20.0, y, 10.0, 10.0, PALETTE[i], 0.5);
        svg.text(left + width + 34.0, y + 9.0, 10.0, "start", label);
    }
    svg.finish()
}

// ---------------------------------------------------------------------------
// Perfect recall

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n: usize,
    pub mean_length: Option<f64>,
    pub mean_pre_loss: Option<f64>,
    pub mean_post_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerfectRecallAnalysis {
    pub perfect: GroupStats,
    pub other: GroupStats,
    /// Whether the SVG was written (needs at least one perfect recall).
    pub figure: bool,
}

#[derive(Clone, Debug, Serialize)]
struct PerfectRow {
    sentence_id: String,
    group: &'static str,
    length: usize,
    pre_loss: Option<f64>,
    post_loss: Option<f64>,
}

fn group_stats(rows: &[&PerfectRow]) -> GroupStats {
    let opt_mean = |v: Vec<f64>| (!v.is_empty()).then(|| mean_stderr(&v).0);
    GroupStats {
        n: rows.len(),
        mean_length: opt_mean(rows.iter().map(|r| r.length as f64).collect()),
        mean_pre_loss: opt_mean(rows.iter().filter_map(|r| r.pre_loss).collect()),
        mean_post_loss: opt_mean(rows.iter().filter_map(|r| r.post_loss).collect()),
    }
}

/// Compare perfectly recalled study sentences with the rest on length,
/// pre-exposure loss and post-exposure loss. Writes
/// `perfect_recall_<tag>.csv` and, when at least one sentence was recalled
/// perfectly, `perfect_recall_<tag>.svg`.
pub fn emit_perfect_recall_analysis(
    outcomes: &[RecallOutcome],
    pre_losses: &BTreeMap<String, f64>,
    post_losses: &BTreeMap<String, f64>,
    tag: &str,
    dir: impl AsRef<Path>,
) -> Result<PerfectRecallAnalysis> {
    let dir = dir.as_ref();
    if outcomes.is_empty() {
        return Err(Error::Empty("recall outcomes"));
    }
    let mut rows: Vec<PerfectRow> = outcomes
        .iter()
        .map(|o| PerfectRow {
            sentence_id: o.sentence_id.clone(),
            group: if o.perfect { "perfect" } else { "other" },
            length: o.reference.len(),
            pre_loss: pre_losses.get(&o.sentence_id).copied(),
            post_loss: post_losses.get(&o.sentence_id).copied(),
        })
        .collect();
    rows.sort_by(|a, b| a.sentence_id.cmp(&b.sentence_id));
    let perfect: Vec<&PerfectRow> = rows.iter().filter(|r| r.group == "perfect").collect();
    let other: Vec<&PerfectRow> = rows.iter().filter(|r| r.group == "other").collect();
    prepare(dir)?;
    write_csv(&dir.join(format!("perfect_recall_{tag}.csv")), &rows)?;
    let figure = !perfect.is_empty();
    if figure {
        write_text(&dir.join(format!("perfect_recall_{tag}.svg")), perfect_svg(&perfect, &other))?;
    } else {
        log::info!("no perfectly recalled sentences for {tag}; figure skipped");
    }
    Ok(PerfectRecallAnalysis {
        perfect: group_stats(&perfect),
        other: group_stats(&other),
        figure,
    })
}

fn perfect_svg(perfect: &[&PerfectRow], other: &[&PerfectRow]) -> String {
    type Getter = fn(&PerfectRow) -> Option<f64>;
    let panels: [(&str, Getter); 3] = [
        ("length (tokens)", |r| Some(r.length as f64)),
        ("loss before exposure", |r| r.pre_loss),
        ("loss after exposure", |r| r.post_loss),
    ];
    let (width, height) = (200.0, 220.0);
    let mut svg = Svg::new(3.0 * (width + 90.0) + 40.0, height + 110.0);
    let groups: Vec<(&str, &[&PerfectRow])> = [("perfect", perfect), ("other", other)]
        .into_iter()
        .filter(|(_, g)| !g.is_empty())
        .collect();
    for (k, (title, get)) in panels.iter().enumerate() {
        let values: Vec<f64> = groups.iter().flat_map(|(_, g)| g.iter().filter_map(|r| get(r))).collect();
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let (lo, hi) = if values.is_empty() { (0.0, 1.0) } else { (lo, hi) };
        let left = 80.0 + k as f64 * (width + 90.0);
        let panel = Panel::draw(&mut svg, left, 40.0, width, height, (0.0, groups.len() as f64), (lo, hi), title, "group", "");
        for (gi, (name, g)) in groups.iter().enumerate() {
            let vals: Vec<f64> = g.iter().filter_map(|r| get(r)).collect();
            let cx = panel.x.map(gi as f64 + 0.5);
            for (j, v) in vals.iter().enumerate() {
                let jitter = ((j * 7919) % 21) as f64 - 10.0;
                svg.circle(cx + jitter, panel.y.map(*v), 2.0, PALETTE[gi]);
            }
            if !vals.is_empty() {
                let m = mean_stderr(&vals).0;
                svg.line(cx - 18.0, panel.y.map(m), cx + 18.0, panel.y.map(m), "black", false);
            }
            panel.x_ticks(&mut svg, &[(gi as f64 + 0.5, name.to_string())]);
        }
    }
    svg.finish()
}

// ---------------------------------------------------------------------------
// Retention curves

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetentionRow {
    pub step: u64,
    /// `recall` or `recognition`.
    pub panel: String,
    /// Stimulus kind for recall, `e<n>` for recognition.
    pub metric: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub n: usize,
}

/// Recall (per stimulus kind) and recognition (per experiment) against
/// interference steps on a log axis, averaged over the given series.
/// Writes `retention.csv` and `retention.svg`.
pub fn emit_retention_curves(series: &[RetentionSeries], dir: impl AsRef<Path>) -> Result<Vec<RetentionRow>> {
    let dir = dir.as_ref();
    if series.is_empty() {
        return Err(Error::Empty("retention series"));
    }
    let mut cells: BTreeMap<(u64, &str, String), Vec<f64>> = BTreeMap::new();
    for s in series {
        for p in &s.points {
            for (kind, v) in &p.recall {
                cells.entry((p.step, "recall", kind.to_string())).or_default().push(*v);
            }
            for (e, v) in &p.recognition {
                cells.entry((p.step, "recognition", format!("e{e}"))).or_default().push(*v);
            }
        }
    }
    let rows: Vec<RetentionRow> = cells
        .into_iter()
        .map(|((step, panel, metric), v)| {
            let (value, stderr) = mean_stderr(&v);
            RetentionRow {
                step,
                panel: panel.to_string(),
                metric,
                value,
                stderr,
                n: v.len(),
            }
        })
        .collect();
    prepare(dir)?;
    write_csv(&dir.join("retention.csv"), &rows)?;
    write_text(&dir.join("retention.svg"), retention_svg(&rows))?;
    Ok(rows)
}

pub fn read_retention_csv(path: impl AsRef<Path>) -> Result<Vec<RetentionRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::parse(path, e.to_string())))
        .collect()
}

fn retention_svg(rows: &[RetentionRow]) -> String {
    let max_step = rows.iter().map(|r| r.step).max().unwrap_or(0).max(1);
    let x_hi = (max_step as f64).log10().max(1.0);
    let star_x = -0.6;
    let xpos = |step: u64| if step == 0 { star_x } else { (step as f64).log10() };
    let (width, height) = (360.0, 240.0);
    let mut svg = Svg::new(2.0 * (width + 120.0) + 40.0, height + 110.0);
    for (k, (panel_name, title, y_label)) in [
        ("recall", "Recall", "Rouge-L"),
        ("recognition", "Recognition", "accuracy"),
    ]
    .into_iter()
    .enumerate()
    {
        let left = 70.0 + k as f64 * (width + 120.0);
        let panel = Panel::draw(
            &mut svg,
            left,
            40.0,
            width,
            height,
            (star_x - 0.3, x_hi),
            (0.0, 1.0),
            title,
            "interference updates",
            y_label,
        );
        let mut ticks = vec![(star_x, "before".to_string())];
        ticks.extend((0..=x_hi.floor() as u32).map(|p| (p as f64, format!("{}", 10u64.pow(p)))));
        panel.x_ticks(&mut svg, &ticks);
        let chance = panel.y.map(0.5);
        svg.line(panel.x.p0, chance, panel.x.p1, chance, "gray", true);
        let metrics: BTreeSet<&str> = rows.iter().filter(|r| r.panel == panel_name).map(|r| r.metric.as_str()).collect();
        for (i, m) in metrics.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<(u64, f64)> = rows
                .iter()
                .filter(|r| r.panel == panel_name && r.metric == *m)
                .map(|r| (r.step, r.value))
                .collect();
            let curve: Vec<(f64, f64)> = pts
                .iter()
                .filter(|(s, _)| *s > 0)
                .map(|&(s, v)| (panel.x.map(xpos(s)), panel.y.map(v)))
                .collect();
            if curve.len() > 1 {
                svg.polyline(&curve, color);
            }
            for &(x, y) in &curve {
                svg.circle(x, y, 2.5, color);
            }
            if let Some(&(_, v)) = pts.iter().find(|(s, _)| *s == 0) {
                svg.star(panel.x.map(star_x), panel.y.map(v), 6.0, color);
            }
            let ly = 40.0 + 14.0 * i as f64;
            svg.rect(panel.x.p1 + 10.0, ly, 10.0, 10.0, color, 1.0);
            svg.text(panel.x.p1 + 24.0, ly + 9.0, 10.0, "start", m);
        }
    }
    svg.finish()
}
