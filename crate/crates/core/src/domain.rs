//! Value types shared by every stage: the video timeline, clips, QA pairs
//! and the instruction taxonomy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default clip length in seconds.
pub const DEFAULT_CLIP_SECONDS: f64 = 5.0;

// Absorbs representation error in products like 0.1 * 30.0 before flooring.
const FLOOR_EPS: f64 = 1e-9;

fn floor_index(x: f64) -> usize {
    (x + FLOOR_EPS).floor().max(0.0) as usize
}

/// Frame sampling geometry of one video. Frame `i` sits at `i / sample_fps`
/// seconds (left edge of its sampling interval).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoTimeline {
    video_id: String,
    duration_s: f64,
    sample_fps: f64,
    frame_count: usize,
}

impl VideoTimeline {
    /// Timeline with `frame_count = floor(duration_s * sample_fps)`.
    pub fn new(video_id: impl Into<String>, duration_s: f64, sample_fps: f64) -> Result<Self> {
        check_positive("duration_s", duration_s)?;
        check_positive("sample_fps", sample_fps)?;
        let frame_count = floor_index(duration_s * sample_fps);
        Self::with_frame_count(video_id, duration_s, sample_fps, frame_count)
    }

    /// Timeline with an explicit frame count, e.g. the row count of a feature file.
    pub fn with_frame_count(
        video_id: impl Into<String>,
        duration_s: f64,
        sample_fps: f64,
        frame_count: usize,
    ) -> Result<Self> {
        check_positive("duration_s", duration_s)?;
        check_positive("sample_fps", sample_fps)?;
        if frame_count == 0 {
            return Err(Error::Validation("timeline must contain at least one frame".into()));
        }
        let last = (frame_count - 1) as f64 / sample_fps;
        if last >= duration_s + 1.0 / sample_fps {
            return Err(Error::Validation(format!(
                "{frame_count} frames at {sample_fps} fps do not fit in {duration_s} s"
            )));
        }
        Ok(Self { video_id: video_id.into(), duration_s, sample_fps, frame_count })
    }

    /// Timeline spanning exactly `frame_count` frames at `sample_fps`.
    pub fn from_frames(video_id: impl Into<String>, frame_count: usize, sample_fps: f64) -> Result<Self> {
        check_positive("sample_fps", sample_fps)?;
        Self::with_frame_count(video_id, frame_count as f64 / sample_fps, sample_fps, frame_count)
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    pub fn sample_fps(&self) -> f64 {
        self.sample_fps
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    /// Frame index containing time `t_s`, clamped to the last frame.
    pub fn frame_of_time(&self, t_s: f64) -> Result<usize> {
        let upper = self.duration_s.max(self.timestamp(self.frame_count - 1));
        if !(t_s.is_finite() && (0.0..=upper).contains(&t_s)) {
            return Err(Error::Range(format!("time {t_s} s outside [0, {upper}]")));
        }
        Ok(floor_index(t_s * self.sample_fps).min(self.frame_count - 1))
    }

    pub fn time_of_frame(&self, index: usize) -> Result<f64> {
        if index >= self.frame_count {
            return Err(Error::Range(format!("frame {index} outside [0, {})", self.frame_count)));
        }
        Ok(self.timestamp(index))
    }

    fn timestamp(&self, index: usize) -> f64 {
        index as f64 / self.sample_fps
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!("{name} must be finite and > 0, got {value}")))
    }
}

/// A contiguous span of frames, left-closed/right-open in both frames and seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clip {
    pub index: usize,
    pub start_frame: usize,
    pub end_frame_exclusive: usize,
    pub start_s: f64,
    pub end_s: f64,
}

impl Clip {
    pub fn frames(&self) -> std::ops::Range<usize> {
        self.start_frame..self.end_frame_exclusive
    }

    pub fn len(&self) -> usize {
        self.end_frame_exclusive - self.start_frame
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, frame: usize) -> bool {
        self.frames().contains(&frame)
    }
}

/// Splits the timeline into fixed-length clips that tile `[0, frame_count)`.
///
/// Clip `i` covers `[i * clip_seconds, min((i + 1) * clip_seconds, duration))`.
/// The last clip always ends at `frame_count`. A clip that would hold no frames
/// is merged into its predecessor (or into its successor when it is the first).
pub fn segment_uniform(timeline: &VideoTimeline, clip_seconds: f64) -> Result<Vec<Clip>> {
    check_positive("clip_seconds", clip_seconds)?;
    let duration = timeline.duration_s();
    let fps = timeline.sample_fps();
    let n = timeline.frame_count();
    let n_clips = ((duration / clip_seconds) - FLOOR_EPS).ceil().max(1.0) as usize;

    let mut clips: Vec<Clip> = Vec::with_capacity(n_clips);
    for i in 0..n_clips {
        let start_s = i as f64 * clip_seconds;
        let end_s = if i + 1 == n_clips { duration } else { ((i + 1) as f64 * clip_seconds).min(duration) };
        let start_frame = floor_index(start_s * fps).min(n);
        let end_frame = if i + 1 == n_clips { n } else { floor_index(end_s * fps).min(n) };
        let clip = Clip { index: i, start_frame, end_frame_exclusive: end_frame, start_s, end_s };
        match clips.last_mut() {
            Some(prev) if prev.is_empty() => {
                prev.end_frame_exclusive = clip.end_frame_exclusive;
                prev.end_s = clip.end_s;
            }
            Some(prev) if clip.is_empty() => {
                prev.end_s = clip.end_s;
            }
            _ => clips.push(clip),
        }
    }
    if let Some(last) = clips.last_mut() {
        last.end_frame_exclusive = n;
        last.end_s = duration;
    }
    for (i, clip) in clips.iter_mut().enumerate() {
        clip.index = i;
    }
    Ok(clips)
}

/// One question-answer instruction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAPair {
    pub qa_id: String,
    pub question: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<String>>,
}

impl QAPair {
    pub fn new(qa_id: impl Into<String>, question: impl Into<String>, answer: impl Into<String>) -> Self {
        Self { qa_id: qa_id.into(), question: question.into(), answer: answer.into(), options: None }
    }

    pub fn with_options(mut self, options: Vec<String>) -> Self {
        self.options = Some(options);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.question.trim().is_empty() {
            return Err(Error::Validation(format!("qa {}: empty question", self.qa_id)));
        }
        if self.answer.trim().is_empty() {
            return Err(Error::Validation(format!("qa {}: empty answer", self.qa_id)));
        }
        Ok(())
    }

    /// Question text with multiple-choice options appended, as shown to reasoners.
    pub fn question_with_options(&self) -> String {
        match &self.options {
            Some(opts) if !opts.is_empty() => {
                let mut s = self.question.clone();
                s.push_str(" Options:");
                for opt in opts {
                    s.push('\n');
                    s.push_str(opt);
                }
                s
            }
            _ => self.question.clone(),
        }
    }
}

/// Reads a QA file: a JSON list of `{qa_id, question, answer, options?}`.
pub fn load_qa_file(path: impl AsRef<std::path::Path>) -> Result<Vec<QAPair>> {
    let text = std::fs::read_to_string(path)?;
    let pairs: Vec<QAPair> = serde_json::from_str(&text)?;
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InstructionType {
    SemanticOnly,
    MotionOnly,
    SemanticMotion,
    NonClues,
}

impl InstructionType {
    pub const ALL: [InstructionType; 4] = [Self::SemanticOnly, Self::MotionOnly, Self::SemanticMotion, Self::NonClues];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SemanticOnly => "SemanticOnly",
            Self::MotionOnly => "MotionOnly",
            Self::SemanticMotion => "SemanticMotion",
            Self::NonClues => "NonClues",
        }
    }
}

impl std::fmt::Display for InstructionType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
