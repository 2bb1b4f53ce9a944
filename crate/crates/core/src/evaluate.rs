//! Detection and segment evaluation against annotated ground truth.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{match_boxes, Context, ContextKind, DataType, EvalConfig};
use crate::policy::{SegmentGroup, FALLBACK_TEXT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    Textual,
    Iconic,
    Overall,
    Segments,
}

impl Task {
    fn of(kind: ContextKind) -> Task {
        match kind {
            ContextKind::Text => Task::Textual,
            ContextKind::Icon => Task::Iconic,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn add(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }

    pub fn is_empty(&self) -> bool {
        self.tp + self.fp + self.fn_ == 0
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp, 0.0)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_, 0.0)
    }

    /// `tp / (tp + fp + fn)`: detection has no true negatives.
    pub fn accuracy(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp + self.fn_, 1.0)
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
            accuracy: self.accuracy(),
            precision: self.precision(),
            recall: self.recall(),
        }
    }
}

fn ratio(n: u64, d: u64, empty: f64) -> f64 {
    if d == 0 {
        empty
    } else {
        n as f64 / d as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    /// Data types with at least one prediction or ground-truth item.
    pub per_type: BTreeMap<DataType, Metrics>,
    /// Unweighted mean over `per_type`; `None` when the task has no items.
    pub macro_average: Option<Averages>,
    pub totals: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tasks: BTreeMap<Task, TaskMetrics>,
}

/// Raw counts per task and data type; merging is associative and commutative.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tally {
    counts: BTreeMap<(Task, DataType), Counts>,
}

impl Tally {
    pub fn bump(&mut self, task: Task, t: DataType, c: Counts) {
        self.counts.entry((task, t)).or_default().add(c);
    }

    pub fn get(&self, task: Task, t: DataType) -> Counts {
        self.counts.get(&(task, t)).copied().unwrap_or_default()
    }

    pub fn total(&self, task: Task) -> Counts {
        let mut c = Counts::default();
        for ((k, _), v) in &self.counts {
            if *k == task {
                c.add(*v);
            }
        }
        c
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        for ((task, t), c) in other.counts {
            self.bump(task, t, c);
        }
        self
    }

    /// Metrics for every task in `tasks`, even when it has no items.
    pub fn report(&self, tasks: &[Task]) -> MetricsReport {
        let mut out = BTreeMap::new();
        for &task in tasks {
            let per_type: BTreeMap<DataType, Metrics> = DataType::ALL
                .iter()
                .map(|&t| (t, self.get(task, t)))
                .filter(|(_, c)| !c.is_empty())
                .map(|(t, c)| (t, c.metrics()))
                .collect();
            let n = per_type.len() as f64;
            let mean = |f: fn(&Metrics) -> f64| per_type.values().map(f).sum::<f64>() / n;
            let macro_average = (!per_type.is_empty()).then(|| Averages {
                accuracy: mean(|m| m.accuracy),
                precision: mean(|m| m.precision),
                recall: mean(|m| m.recall),
            });
            out.insert(
                task,
                TaskMetrics {
                    per_type,
                    macro_average,
                    totals: self.total(task),
                },
            );
        }
        MetricsReport { tasks: out }
    }
}

const ONE_TP: Counts = Counts { tp: 1, fp: 0, fn_: 0 };
const ONE_FP: Counts = Counts { tp: 0, fp: 1, fn_: 0 };
const ONE_FN: Counts = Counts { tp: 0, fp: 0, fn_: 1 };

/// Counts for one screenshot. Matched pairs are TP for the ground-truth
/// type, unmatched predictions FP, unmatched ground truth FN. Each item is
/// counted under its kind's task and under `Overall`.
pub fn tally_screenshot(preds: &[Context], gts: &[Context], cfg: &EvalConfig) -> Tally {
    let matching = match_boxes(preds, gts, cfg);
    let mut pred_used = vec![false; preds.len()];
    let mut gt_used = vec![false; gts.len()];
    let mut tally = Tally::default();
    let mut count = |kind: ContextKind, t: DataType, c: Counts| {
        tally.bump(Task::of(kind), t, c);
        tally.bump(Task::Overall, t, c);
    };
    for &(p, g) in &matching {
        pred_used[p] = true;
        gt_used[g] = true;
        count(gts[g].kind, gts[g].data_type, ONE_TP);
    }
    for (c, _) in preds.iter().zip(&pred_used).filter(|(_, u)| !**u) {
        count(c.kind, c.data_type, ONE_FP);
    }
    for (c, _) in gts.iter().zip(&gt_used).filter(|(_, u)| !**u) {
        count(c.kind, c.data_type, ONE_FN);
    }
    tally
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("predictions reference unknown screenshot {0:?}")]
    UnknownScreenshot(String),
    #[error("predictions reference unknown app {0:?}")]
    UnknownApp(String),
}

/// Context metrics over screenshots keyed by a unique id. Ground-truth
/// screenshots without predictions count as all-FN.
pub fn eval_contexts(
    preds: &BTreeMap<String, Vec<Context>>,
    gts: &BTreeMap<String, Vec<Context>>,
    cfg: &EvalConfig,
) -> Result<MetricsReport, EvalError> {
    Ok(context_tally(preds, gts, cfg)?.report(&[Task::Textual, Task::Iconic, Task::Overall]))
}

pub fn context_tally(
    preds: &BTreeMap<String, Vec<Context>>,
    gts: &BTreeMap<String, Vec<Context>>,
    cfg: &EvalConfig,
) -> Result<Tally, EvalError> {
    if let Some(k) = preds.keys().find(|k| !gts.contains_key(*k)) {
        return Err(EvalError::UnknownScreenshot(k.clone()));
    }
    let mut tally = Tally::default();
    for (id, g) in gts {
        let p = preds.get(id).map(Vec::as_slice).unwrap_or(&[]);
        tally = tally.merge(tally_screenshot(p, g, cfg));
    }
    Ok(tally)
}

/// Character-level longest common substring length.
pub fn lcs(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut best = 0;
    for ca in &a {
        for (j, cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb { prev[j] + 1 } else { 0 };
            best = best.max(cur[j + 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// Lowercased, whitespace-collapsed phrases split at `, . ; : ! ?` and line breaks.
pub fn phrases(sentences: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for s in sentences {
        for p in s.split([',', '.', ';', ':', '!', '?', '\n', '\r']) {
            let p = crate::text::collapse_ws(&p.to_lowercase());
            if !p.is_empty() {
                out.push(p);
            }
        }
    }
    out
}

/// A policy segment for one data type: either the fallback or sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    Fallback,
    Sentences(Vec<String>),
}

impl Segment {
    pub fn is_fallback(&self) -> bool {
        match self {
            Segment::Fallback => true,
            Segment::Sentences(s) => {
                s.is_empty() || (s.len() == 1 && s[0].trim() == FALLBACK_TEXT)
            }
        }
    }

    pub fn from_group(g: &SegmentGroup) -> Segment {
        if g.fallback {
            Segment::Fallback
        } else {
            Segment::Sentences(g.sentence_texts())
        }
    }
}

/// `(1/min(n,m)) * sum_i sum_j lcs(p_i, q_j) / min(|p_i|, |q_j|)`. Not clamped.
pub fn segment_sim(ret: &Segment, gt: &Segment) -> f64 {
    match (ret.is_fallback(), gt.is_fallback()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let (Segment::Sentences(r), Segment::Sentences(g)) = (ret, gt) else {
        unreachable!("non-fallback segments carry sentences")
    };
    let p = phrases(r);
    let q = phrases(g);
    if p.is_empty() || q.is_empty() {
        return 0.0;
    }
    let lens_q: Vec<usize> = q.iter().map(|s| s.chars().count()).collect();
    let mut sum = 0.0;
    for pi in &p {
        let lp = pi.chars().count();
        for (qj, &lq) in q.iter().zip(&lens_q) {
            sum += lcs(pi, qj) as f64 / lp.min(lq) as f64;
        }
    }
    sum / p.len().min(q.len()) as f64
}

/// Segment counts for one app. A data type absent from `gt` is treated as
/// fallback.
pub fn tally_app_segments(
    app_id: &str,
    preds: &[SegmentGroup],
    gt: &BTreeMap<DataType, Segment>,
    cfg: &EvalConfig,
) -> Tally {
    let mut tally = Tally::default();
    for t in DataType::ALL {
        let pred = preds
            .iter()
            .find(|g| g.data_type == t)
            .map(Segment::from_group)
            .unwrap_or(Segment::Fallback);
        let gt_seg = match gt.get(&t) {
            Some(s) => s.clone(),
            None => {
                warn!("{app_id}: no ground-truth segment for {t}, treating as fallback");
                Segment::Fallback
            }
        };
        let c = match (pred.is_fallback(), gt_seg.is_fallback()) {
            (true, true) => ONE_TP,
            (false, true) => ONE_FP,
            (true, false) => ONE_FN,
            (false, false) => {
                if segment_sim(&pred, &gt_seg) >= cfg.segment_threshold {
                    ONE_TP
                } else if cfg.mismatch_counts_fp {
                    Counts { tp: 0, fp: 1, fn_: 1 }
                } else {
                    ONE_FN
                }
            }
        };
        tally.bump(Task::Segments, t, c);
    }
    tally
}

/// Segment metrics across apps. Apps without predictions count one FN per data type.
pub fn eval_segments(
    preds: &BTreeMap<String, Vec<SegmentGroup>>,
    gts: &BTreeMap<String, BTreeMap<DataType, Segment>>,
    cfg: &EvalConfig,
) -> Result<MetricsReport, EvalError> {
    Ok(segment_tally(preds, gts, cfg)?.report(&[Task::Segments]))
}

pub fn segment_tally(
    preds: &BTreeMap<String, Vec<SegmentGroup>>,
    gts: &BTreeMap<String, BTreeMap<DataType, Segment>>,
    cfg: &EvalConfig,
) -> Result<Tally, EvalError> {
    if let Some(k) = preds.keys().find(|k| !gts.contains_key(*k)) {
        return Err(EvalError::UnknownApp(k.clone()));
    }
    let mut tally = Tally::default();
    for (app, gt) in gts {
        match preds.get(app) {
            Some(p) => tally = tally.merge(tally_app_segments(app, p, gt, cfg)),
            None => {
                warn!("no predictions for app {app}; counting every data type as missed");
                for t in DataType::ALL {
                    tally.bump(Task::Segments, t, ONE_FN);
                }
            }
        }
    }
    Ok(tally)
}

impl MetricsReport {
    pub fn merge_tasks(mut self, other: MetricsReport) -> MetricsReport {
        self.tasks.extend(other.tasks);
        self
    }

    /// Aligned plain-text tables, one per task: rows are data types plus the
    /// macro average, columns accuracy / precision / recall and raw counts.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        for (task, m) in &self.tasks {
            let _ = writeln!(s, "{task:?}");
            let _ = writeln!(
                s,
                "  {:<14} {:>9} {:>10} {:>7} {:>6} {:>6} {:>6}",
                "Category", "Accuracy", "Precision", "Recall", "TP", "FP", "FN"
            );
            for (t, r) in &m.per_type {
                let _ = writeln!(
                    s,
                    "  {:<14} {:>9.4} {:>10.4} {:>7.4} {:>6} {:>6} {:>6}",
                    t.as_str(),
                    r.accuracy,
                    r.precision,
                    r.recall,
                    r.tp,
                    r.fp,
                    r.fn_
                );
            }
            let (tp, fp, fn_) = (m.totals.tp, m.totals.fp, m.totals.fn_);
            let _ = match &m.macro_average {
                Some(a) => writeln!(
                    s,
                    "  {:<14} {:>9.4} {:>10.4} {:>7.4} {:>6} {:>6} {:>6}",
                    "Average", a.accuracy, a.precision, a.recall, tp, fp, fn_
                ),
                None => writeln!(s, "  {:<14} {:>9} {:>10} {:>7} {:>6} {:>6} {:>6}", "Average", "-", "-", "-", tp, fp, fn_),
            };
            s.push('\n');
        }
        s
    }
}
