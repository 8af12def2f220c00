//! End-to-end annotation: segment, caption, retrieve, classify, localize, sample.
//!
//! Records are persisted as JSON lines with lexicographically sorted keys and a
//! single header line, so identical inputs give byte-identical files.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{segment_uniform, Clip, InstructionType, QAPair, VideoTimeline, DEFAULT_CLIP_SECONDS};
use crate::error::{Error, Result};
use crate::features::{load_features, FrameFeatureSet};
use crate::reasoner::{Exchange, ReasonerClient, RetrievalResult};
use crate::sampler::{fixed_rate_frames, sample, SamplePlan, DEFAULT_BUDGET, DEFAULT_RATE_FPS};
use crate::taxonomy::{classify, probe_signals, widens_pool, RetrievalSignal, TaxonomySignals};

pub const DEFAULT_WORKERS: usize = 4;
/// Frame verdicts are requested at this rate inside the retrieved clips.
pub const VERDICT_RATE_FPS: f64 = 1.0;
/// Rate at which feature rows were extracted, unless the manifest says otherwise.
pub const DEFAULT_SAMPLE_FPS: f64 = 1.0;

pub const ANNOTATION_SCHEMA: &str = "vidthinker.annotation";
pub const ANNOTATION_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotateConfig {
    pub clip_seconds: f64,
    pub budget: usize,
    pub rate_fps: f64,
    pub stride: Option<usize>,
    pub sample_fps: f64,
    pub workers: usize,
}

impl Default for AnnotateConfig {
    fn default() -> Self {
        Self {
            clip_seconds: DEFAULT_CLIP_SECONDS,
            budget: DEFAULT_BUDGET,
            rate_fps: DEFAULT_RATE_FPS,
            stride: None,
            sample_fps: DEFAULT_SAMPLE_FPS,
            workers: DEFAULT_WORKERS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Manifest,
    LoadFeatures,
    LoadQa,
    Segment,
    KeyPhrases,
    Captioning,
    Retrieval,
    Classification,
    Localization,
    Sampling,
    Assemble,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Manifest => "manifest",
            Stage::LoadFeatures => "load_features",
            Stage::LoadQa => "load_qa",
            Stage::Segment => "segment",
            Stage::KeyPhrases => "key_phrases",
            Stage::Captioning => "captioning",
            Stage::Retrieval => "retrieval",
            Stage::Classification => "classification",
            Stage::Localization => "localization",
            Stage::Sampling => "sampling",
            Stage::Assemble => "assemble",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub key_phrases: String,
    pub captions: Vec<String>,
    pub retrieval_explanation: String,
    /// Clips named by retrieval, before routing; `None` for a "None." answer.
    pub retrieved_clips: Option<Vec<usize>>,
    pub signals: TaxonomySignals,
    /// Frames sent for a verdict, aligned with `verdict_bitmap`.
    pub verdict_frames: Vec<usize>,
    pub verdict_bitmap: Vec<bool>,
    /// Output frames outside every relevant clip.
    pub backfill_frames: Vec<usize>,
    /// Stages in the order they completed.
    pub stages: Vec<Stage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingAnnotation {
    pub video_id: String,
    pub qa_id: String,
    pub instruction_type: InstructionType,
    pub relevant_clip_indices: Vec<usize>,
    pub frame_indices: Vec<usize>,
    pub frame_timestamps_s: Vec<f64>,
    pub frame_count: usize,
    pub sample_fps: f64,
    pub provenance: Provenance,
}

impl GroundingAnnotation {
    pub fn validate(&self) -> Result<()> {
        let n = self.frame_count;
        if self.frame_indices.is_empty() {
            return Err(Error::Validation(format!("{}/{}: no frames", self.video_id, self.qa_id)));
        }
        if !self.frame_indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Validation(format!("{}/{}: frames not sorted and unique", self.video_id, self.qa_id)));
        }
        if let Some(bad) = self.frame_indices.iter().find(|&&f| f >= n) {
            return Err(Error::Range(format!("{}/{}: frame {bad} outside [0, {n})", self.video_id, self.qa_id)));
        }
        if self.frame_timestamps_s.len() != self.frame_indices.len() {
            return Err(Error::Validation(format!("{}/{}: timestamps misaligned", self.video_id, self.qa_id)));
        }
        if !self.relevant_clip_indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Validation(format!("{}/{}: clips not sorted", self.video_id, self.qa_id)));
        }
        Ok(())
    }
}

/// A record that could not be produced. `qa_id` is absent when a whole video failed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StageFailure {
    pub video_id: String,
    pub qa_id: Option<String>,
    pub stage: Stage,
    pub cause: String,
}

impl fmt::Display for StageFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} failed at {}: {}", self.video_id, self.qa_id.as_deref().unwrap_or("*"), self.stage, self.cause)
    }
}

impl std::error::Error for StageFailure {}

/// Reasoner exchanges and stage timings of one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordTrace {
    pub video_id: String,
    pub qa_id: String,
    pub exchanges: Vec<Exchange>,
    pub timings_s: Vec<(Stage, f64)>,
}

#[derive(Debug, Clone)]
pub struct Annotated {
    pub annotation: GroundingAnnotation,
    pub trace: RecordTrace,
}

struct Run<'a> {
    video_id: &'a str,
    qa_id: &'a str,
    stages: Vec<Stage>,
    timings: Vec<(Stage, f64)>,
    log: Vec<Exchange>,
}

impl Run<'_> {
    fn stage<T>(&mut self, stage: Stage, f: impl FnOnce(&mut Vec<Exchange>) -> Result<T>) -> Result<T, StageFailure> {
        let t0 = Instant::now();
        let out = f(&mut self.log).map_err(|e| StageFailure {
            video_id: self.video_id.to_string(),
            qa_id: Some(self.qa_id.to_string()),
            stage,
            cause: e.to_string(),
        })?;
        self.timings.push((stage, t0.elapsed().as_secs_f64()));
        self.stages.push(stage);
        Ok(out)
    }
}

pub fn annotate(
    timeline: &VideoTimeline,
    features: &FrameFeatureSet,
    qa: &QAPair,
    config: &AnnotateConfig,
    client: &ReasonerClient,
) -> Result<GroundingAnnotation, StageFailure> {
    annotate_traced(timeline, features, qa, config, client).map(|a| a.annotation)
}

pub fn annotate_traced(
    timeline: &VideoTimeline,
    features: &FrameFeatureSet,
    qa: &QAPair,
    config: &AnnotateConfig,
    client: &ReasonerClient,
) -> Result<Annotated, StageFailure> {
    let vid = timeline.video_id();
    let mut run = Run { video_id: vid, qa_id: &qa.qa_id, stages: Vec::new(), timings: Vec::new(), log: Vec::new() };

    let (clips, features) = run.stage(Stage::Segment, |_| {
        qa.validate()?;
        if features.frame_count() != timeline.frame_count() {
            return Err(Error::Validation(format!(
                "feature set has {} frames, timeline has {}",
                features.frame_count(),
                timeline.frame_count()
            )));
        }
        Ok((segment_uniform(timeline, config.clip_seconds)?, features.anchor_pooled()?))
    })?;

    let cue = run.stage(Stage::KeyPhrases, |log| client.extract_key_phrases(qa, log))?;

    let captions = run.stage(Stage::Captioning, |log| {
        clips
            .iter()
            .map(|c| client.caption_clip(&cue, &format!("{vid}/clip/{}", c.index), log))
            .collect::<Result<Vec<_>>>()
    })?;

    let retrieval: RetrievalResult = run.stage(Stage::Retrieval, |log| client.retrieve_clips(&captions, qa, log))?;

    let (signals, instruction_type) = run.stage(Stage::Classification, |log| {
        let signal = RetrievalSignal::from_result(&retrieval, clips.len());
        let signals = probe_signals(client, qa, signal, log)?;
        Ok((signals, classify(&signals)))
    })?;

    let relevant: Vec<Clip> = if instruction_type == InstructionType::NonClues {
        Vec::new()
    } else {
        retrieval.clip_indices().iter().map(|&i| clips[i].clone()).collect()
    };

    let (verdict_frames, verdict_bitmap) = if relevant.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        run.stage(Stage::Localization, |log| {
            let stride = (timeline.sample_fps() / VERDICT_RATE_FPS).round().max(1.0) as usize;
            let frames = fixed_rate_frames(&relevant, stride);
            let mut bitmap = Vec::with_capacity(frames.len());
            for &f in &frames {
                bitmap.push(client.verdict_frame(f, &format!("{vid}/frame/{f}"), qa, log)?.relevant);
            }
            Ok((frames, bitmap))
        })?
    };

    let frame_indices = run.stage(Stage::Sampling, |_| {
        let yes: Vec<usize> = verdict_frames.iter().zip(&verdict_bitmap).filter(|(_, &v)| v).map(|(&f, _)| f).collect();
        let mut plan = SamplePlan::new(instruction_type, config.budget, relevant.clone())
            .with_rate(config.rate_fps)
            .with_stride(config.stride)
            .widened(widens_pool(&signals, instruction_type));
        // All-no verdicts leave the pool unset: every frame of the clips.
        if !yes.is_empty() {
            plan = plan.with_pool(yes);
        }
        sample(&plan, timeline, &features)
    })?;

    let annotation = run.stage(Stage::Assemble, |_| {
        let frame_timestamps_s =
            frame_indices.iter().map(|&f| timeline.time_of_frame(f)).collect::<Result<Vec<_>>>()?;
        let backfill_frames = if instruction_type == InstructionType::NonClues {
            Vec::new()
        } else {
            frame_indices.iter().copied().filter(|&f| !relevant.iter().any(|c| c.contains(f))).collect()
        };
        Ok(GroundingAnnotation {
            video_id: vid.to_string(),
            qa_id: qa.qa_id.clone(),
            instruction_type,
            relevant_clip_indices: relevant.iter().map(|c| c.index).collect(),
            frame_indices: frame_indices.clone(),
            frame_timestamps_s,
            frame_count: timeline.frame_count(),
            sample_fps: timeline.sample_fps(),
            provenance: Provenance {
                key_phrases: cue.clone(),
                captions: captions.clone(),
                retrieval_explanation: retrieval.explanation.clone(),
                retrieved_clips: retrieval.clips.clone(),
                signals,
                verdict_frames: verdict_frames.clone(),
                verdict_bitmap: verdict_bitmap.clone(),
                backfill_frames,
                stages: Vec::new(),
            },
        })
    })?;

    let mut annotation = annotation;
    annotation.provenance.stages = run.stages;
    let trace =
        RecordTrace { video_id: vid.to_string(), qa_id: qa.qa_id.clone(), exchanges: run.log, timings_s: run.timings };
    Ok(Annotated { annotation, trace })
}

/// One manifest line: `video_id<TAB>features<TAB>qa_file[<TAB>sample_fps]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub video_id: String,
    pub features: PathBuf,
    pub qa_file: PathBuf,
    pub sample_fps: Option<f64>,
}

/// Parses a manifest. Relative paths resolve against the manifest's directory;
/// blank lines and `#` comments are skipped; malformed lines become failures.
pub fn parse_manifest(text: &str, base: &Path) -> (Vec<ManifestEntry>, Vec<StageFailure>) {
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let fail = |cause: String| StageFailure {
            video_id: cols.first().map(|s| s.trim()).filter(|s| !s.is_empty()).unwrap_or("?").to_string(),
            qa_id: None,
            stage: Stage::Manifest,
            cause: format!("line {}: {cause}", lineno + 1),
        };
        if !(3..=4).contains(&cols.len()) || cols[..3].iter().any(|c| c.trim().is_empty()) {
            failures.push(fail(format!("expected 3 or 4 tab-separated columns, got {}", cols.len())));
            continue;
        }
        let sample_fps = match cols.get(3).map(|s| s.trim().parse::<f64>()) {
            None => None,
            Some(Ok(v)) if v.is_finite() && v > 0.0 => Some(v),
            Some(_) => {
                failures.push(fail(format!("bad sample rate {:?}", cols[3])));
                continue;
            }
        };
        entries.push(ManifestEntry {
            video_id: cols[0].trim().to_string(),
            features: base.join(cols[1].trim()),
            qa_file: base.join(cols[2].trim()),
            sample_fps,
        });
    }
    (entries, failures)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<(Vec<ManifestEntry>, Vec<StageFailure>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(parse_manifest(&text, base))
}

#[derive(Debug, Clone, Default)]
pub struct BatchOutput {
    pub annotations: Vec<GroundingAnnotation>,
    pub failures: Vec<StageFailure>,
    pub traces: Vec<RecordTrace>,
}

fn annotate_video(entry: &ManifestEntry, config: &AnnotateConfig, client: &ReasonerClient) -> BatchOutput {
    let whole = |stage: Stage, e: Error| StageFailure {
        video_id: entry.video_id.clone(),
        qa_id: None,
        stage,
        cause: e.to_string(),
    };
    let mut out = BatchOutput::default();
    let mut features = match load_features(&entry.features) {
        Ok(f) => f,
        Err(e) => {
            out.failures.push(whole(Stage::LoadFeatures, e));
            return out;
        }
    };
    features.set_video_id(entry.video_id.clone());
    let qas = match crate::domain::load_qa_file(&entry.qa_file) {
        Ok(q) => q,
        Err(e) => {
            out.failures.push(whole(Stage::LoadQa, e));
            return out;
        }
    };
    let fps = entry.sample_fps.unwrap_or(config.sample_fps);
    let timeline = match VideoTimeline::from_frames(entry.video_id.clone(), features.frame_count(), fps) {
        Ok(t) => t,
        Err(e) => {
            out.failures.push(whole(Stage::Segment, e));
            return out;
        }
    };
    for qa in &qas {
        match annotate_traced(&timeline, &features, qa, config, client) {
            Ok(a) => {
                out.annotations.push(a.annotation);
                out.traces.push(a.trace);
            }
            Err(f) => {
                log::warn!("{f}");
                out.failures.push(f);
            }
        }
    }
    out
}

/// Annotates every (video, QA) pair with `config.workers` videos in flight.
/// Output order is (video_id, qa_id) regardless of scheduling.
pub fn annotate_batch(
    entries: &[ManifestEntry],
    config: &AnnotateConfig,
    client: &ReasonerClient,
) -> Result<BatchOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| Error::Validation(format!("worker pool: {e}")))?;
    let parts: Vec<BatchOutput> =
        pool.install(|| entries.par_iter().map(|e| annotate_video(e, config, client)).collect());
    let mut out = BatchOutput::default();
    for p in parts {
        out.annotations.extend(p.annotations);
        out.failures.extend(p.failures);
        out.traces.extend(p.traces);
    }
    out.annotations.sort_by(|a, b| (&a.video_id, &a.qa_id).cmp(&(&b.video_id, &b.qa_id)));
    out.traces.sort_by(|a, b| (&a.video_id, &a.qa_id).cmp(&(&b.video_id, &b.qa_id)));
    out.failures.sort();
    Ok(out)
}

/// One JSON object with sorted keys and no trailing newline.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json::Value maps are BTreeMaps, so re-encoding sorts keys.
    Ok(serde_json::to_string(&serde_json::to_value(value)?)?)
}

fn header_line() -> String {
    format!("{{\"schema\":\"{ANNOTATION_SCHEMA}\",\"version\":{ANNOTATION_VERSION}}}")
}

pub fn encode_annotations(records: &[GroundingAnnotation]) -> Result<String> {
    let mut out = header_line();
    out.push('\n');
    for r in records {
        out.push_str(&to_sorted_json(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Parses an annotation file; the header line is optional.
pub fn decode_annotations(text: &str) -> Result<Vec<GroundingAnnotation>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| Error::parse(format!("line {}: {e}", i + 1), line))?;
        if i == 0 && value.get("schema").is_some() {
            let version = value.get("version").and_then(serde_json::Value::as_u64);
            if value["schema"] != ANNOTATION_SCHEMA || version != Some(ANNOTATION_VERSION as u64) {
                return Err(Error::parse("unsupported annotation header", line));
            }
            continue;
        }
        out.push(serde_json::from_value(value).map_err(|e| Error::parse(format!("line {}: {e}", i + 1), line))?);
    }
    Ok(out)
}

pub fn write_annotations(path: impl AsRef<Path>, records: &[GroundingAnnotation]) -> Result<()> {
    write_atomic(path.as_ref(), encode_annotations(records)?.as_bytes())
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<GroundingAnnotation>> {
    decode_annotations(&std::fs::read_to_string(path)?)
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&to_sorted_json(r)?);
        out.push('\n');
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp~");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
