//! Grounding metrics, Top-k vs Uni-k comparison reports and stage timing tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::GroundingAnnotation;
use crate::selector::select_uniform;

fn index_set(name: &str, frames: &[usize], frame_count: usize) -> Result<BTreeSet<usize>> {
    if let Some(bad) = frames.iter().find(|&&f| f >= frame_count) {
        return Err(Error::Validation(format!("{name} frame {bad} outside [0, {frame_count})")));
    }
    Ok(frames.iter().copied().collect())
}

/// `|pred ∩ gt| / |pred ∪ gt|` over frame sets; 1 when both are empty.
pub fn frame_iou(pred: &[usize], gt: &[usize], frame_count: usize) -> Result<f64> {
    let p = index_set("predicted", pred, frame_count)?;
    let g = index_set("ground-truth", gt, frame_count)?;
    if p.is_empty() && g.is_empty() {
        return Ok(1.0);
    }
    let inter = p.intersection(&g).count();
    let union = p.len() + g.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// Sorted, disjoint cover of the given half-open intervals.
fn merge(intervals: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    let mut v = intervals.to_vec();
    if let Some(&(s, e)) = v.iter().find(|(s, e)| !(s.is_finite() && e.is_finite() && s < e)) {
        return Err(Error::Validation(format!("malformed interval [{s}, {e})")));
    }
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (s, e) in v {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    Ok(out)
}

fn total(v: &[(f64, f64)]) -> f64 {
    v.iter().map(|(s, e)| e - s).sum()
}

/// Interval IoU over `[start_s, end_s)` lists; overlapping intervals within
/// one side are merged first. Both empty scores 1.
pub fn segment_iou(pred: &[(f64, f64)], gt: &[(f64, f64)]) -> Result<f64> {
    let p = merge(pred)?;
    let g = merge(gt)?;
    if p.is_empty() && g.is_empty() {
        return Ok(1.0);
    }
    let (mut i, mut j, mut inter) = (0, 0, 0.0);
    while i < p.len() && j < g.len() {
        let lo = p[i].0.max(g[j].0);
        let hi = p[i].1.min(g[j].1);
        if hi > lo {
            inter += hi - lo;
        }
        if p[i].1 < g[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    let union = total(&p) + total(&g) - inter;
    Ok(if union > 0.0 { (inter / union).clamp(0.0, 1.0) } else { 0.0 })
}

/// `|selected ∩ gt| / |gt|`; 1 when `gt` is empty.
pub fn recall_at_k(selected: &[usize], gt: &[usize], frame_count: usize) -> Result<f64> {
    let s = index_set("selected", selected, frame_count)?;
    let g = index_set("ground-truth", gt, frame_count)?;
    if g.is_empty() {
        return Ok(1.0);
    }
    Ok(g.intersection(&s).count() as f64 / g.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyScore {
    pub iou: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEval {
    pub video_id: String,
    pub qa_id: String,
    pub topk: PolicyScore,
    pub uniform: PolicyScore,
    pub delta_iou: f64,
    pub delta_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub records: Vec<RecordEval>,
    pub topk_mean: Option<PolicyScore>,
    pub uniform_mean: Option<PolicyScore>,
    /// `(video_id, qa_id)` present only in the predictions.
    pub unmatched_pred: Vec<(String, String)>,
    /// `(video_id, qa_id)` present only in the ground truth.
    pub unmatched_gt: Vec<(String, String)>,
}

fn mean(scores: impl ExactSizeIterator<Item = PolicyScore>) -> Option<PolicyScore> {
    let n = scores.len();
    if n == 0 {
        return None;
    }
    let (i, r) = scores.fold((0.0, 0.0), |(i, r), s| (i + s.iou, r + s.recall));
    Some(PolicyScore { iou: i / n as f64, recall: r / n as f64 })
}

fn keyed(records: &[GroundingAnnotation]) -> BTreeMap<(String, String), &GroundingAnnotation> {
    records.iter().map(|r| ((r.video_id.clone(), r.qa_id.clone()), r)).collect()
}

/// Scores predicted frames (Top-k) and `k` uniform frames (Uni-k) against
/// the ground-truth frames of each matching record.
pub fn compare_policies(pred: &[GroundingAnnotation], gt: &[GroundingAnnotation], k: usize) -> Result<EvalReport> {
    if k == 0 {
        return Err(Error::Validation("k must be >= 1".into()));
    }
    let p = keyed(pred);
    let g = keyed(gt);
    let mut records = Vec::new();
    for (key, truth) in &g {
        let Some(guess) = p.get(key) else { continue };
        let n = truth.frame_count;
        let uni = select_uniform(n, k)?.frame_indices;
        let topk = PolicyScore {
            iou: frame_iou(&guess.frame_indices, &truth.frame_indices, n)?,
            recall: recall_at_k(&guess.frame_indices, &truth.frame_indices, n)?,
        };
        let uniform = PolicyScore {
            iou: frame_iou(&uni, &truth.frame_indices, n)?,
            recall: recall_at_k(&uni, &truth.frame_indices, n)?,
        };
        records.push(RecordEval {
            video_id: key.0.clone(),
            qa_id: key.1.clone(),
            topk,
            uniform,
            delta_iou: topk.iou - uniform.iou,
            delta_recall: topk.recall - uniform.recall,
        });
    }
    Ok(EvalReport {
        k,
        topk_mean: mean(records.iter().map(|r| r.topk)),
        uniform_mean: mean(records.iter().map(|r| r.uniform)),
        records,
        unmatched_pred: p.keys().filter(|key| !g.contains_key(*key)).cloned().collect(),
        unmatched_gt: g.keys().filter(|key| !p.contains_key(*key)).cloned().collect(),
    })
}

impl EvalReport {
    /// Fixed-width text table; identical input gives identical text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let k = self.k;
        let _ = writeln!(
            s,
            "{:<24} {:<16} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "video_id",
            "qa_id",
            format!("top{k}_iou"),
            format!("uni{k}_iou"),
            "d_iou",
            format!("top{k}_rec"),
            format!("uni{k}_rec"),
            "d_rec"
        );
        for r in &self.records {
            let _ = writeln!(
                s,
                "{:<24} {:<16} {:>9.4} {:>9.4} {:>+9.4} {:>9.4} {:>9.4} {:>+9.4}",
                r.video_id,
                r.qa_id,
                r.topk.iou,
                r.uniform.iou,
                r.delta_iou,
                r.topk.recall,
                r.uniform.recall,
                r.delta_recall
            );
        }
        match (self.topk_mean, self.uniform_mean) {
            (Some(t), Some(u)) => {
                let _ = writeln!(
                    s,
                    "{:<24} {:<16} {:>9.4} {:>9.4} {:>+9.4} {:>9.4} {:>9.4} {:>+9.4}",
                    "mean",
                    format!("n={}", self.records.len()),
                    t.iou,
                    u.iou,
                    t.iou - u.iou,
                    t.recall,
                    u.recall,
                    t.recall - u.recall
                );
            }
            _ => {
                let _ = writeln!(s, "mean (no matched records)");
            }
        }
        for (v, q) in &self.unmatched_pred {
            let _ = writeln!(s, "unmatched prediction: {v}/{q}");
        }
        for (v, q) in &self.unmatched_gt {
            let _ = writeln!(s, "unmatched ground truth: {v}/{q}");
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&serde_json::to_value(self)?)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    /// Stages in the order given.
    pub stages: Vec<(String, f64)>,
    pub overall: f64,
}

/// Per-stage and overall wall-clock seconds.
pub fn timing_report(stages: &[(String, f64)]) -> Result<TimingReport> {
    if let Some((name, t)) = stages.iter().find(|(_, t)| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Validation(format!("stage {name} has invalid timing {t}")));
    }
    Ok(TimingReport { stages: stages.to_vec(), overall: stages.iter().map(|(_, t)| t).sum() })
}

impl fmt::Display for TimingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<24} {:>12}", "stage", "seconds")?;
        for (name, t) in &self.stages {
            writeln!(f, "{name:<24} {t:>12.4}")?;
        }
        writeln!(f, "{:<24} {:>12.4}", "Overall", self.overall)
    }
}
