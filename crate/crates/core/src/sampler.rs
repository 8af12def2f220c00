//! Per-instruction-type frame sampling inside the retrieved clips.
//!
//! Every sampler returns sorted, unique indices, exactly `min(budget,
//! frame_count)` of them. Shortfalls are filled from the relevant clips first
//! and then from the whole video.

use crate::domain::{Clip, InstructionType, VideoTimeline};
use crate::error::{Error, Result};
use crate::features::FrameFeatureSet;
use crate::keyframe::{extend_diverse, select_diverse};
use crate::selector::uniform_positions;

pub const DEFAULT_BUDGET: usize = 32;
pub const DEFAULT_RATE_FPS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    pub instruction_type: InstructionType,
    /// Output frame count K.
    pub budget: usize,
    /// Fixed sampling rate for motion picks.
    pub fixed_rate_fps: f64,
    /// Use a fixed frame stride for motion picks instead of `fixed_rate_fps`.
    pub stride_override: Option<usize>,
    pub relevant_clips: Vec<Clip>,
    /// Candidate frames for semantic picks (e.g. frames judged relevant).
    /// Defaults to every frame of the relevant clips.
    pub pool: Option<Vec<usize>>,
    /// Draw half the budget from the whole video (non-existence questions).
    pub widen_pool: bool,
}

impl SamplePlan {
    pub fn new(instruction_type: InstructionType, budget: usize, relevant_clips: Vec<Clip>) -> Self {
        Self {
            instruction_type,
            budget,
            fixed_rate_fps: DEFAULT_RATE_FPS,
            stride_override: None,
            relevant_clips,
            pool: None,
            widen_pool: false,
        }
    }

    pub fn with_pool(mut self, pool: Vec<usize>) -> Self {
        self.pool = Some(pool);
        self
    }

    pub fn with_rate(mut self, fps: f64) -> Self {
        self.fixed_rate_fps = fps;
        self
    }

    pub fn with_stride(mut self, stride: Option<usize>) -> Self {
        self.stride_override = stride;
        self
    }

    pub fn widened(mut self, widen: bool) -> Self {
        self.widen_pool = widen;
        self
    }

    pub fn validate(&self, timeline: &VideoTimeline) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Validation("sample budget must be >= 1".into()));
        }
        if !(self.fixed_rate_fps.is_finite() && self.fixed_rate_fps > 0.0) {
            return Err(Error::Validation(format!("fixed rate must be > 0, got {}", self.fixed_rate_fps)));
        }
        if self.stride_override == Some(0) {
            return Err(Error::Validation("stride must be >= 1".into()));
        }
        if self.relevant_clips.is_empty() && self.instruction_type != InstructionType::NonClues {
            return Err(Error::Validation(format!("{} plan needs at least one relevant clip", self.instruction_type)));
        }
        let n = timeline.frame_count();
        if let Some(c) = self.relevant_clips.iter().find(|c| c.end_frame_exclusive > n || c.is_empty()) {
            return Err(Error::Range(format!(
                "clip {} [{}, {}) outside the video",
                c.index, c.start_frame, c.end_frame_exclusive
            )));
        }
        if let Some(bad) = self.pool.iter().flatten().find(|&&f| f >= n) {
            return Err(Error::Range(format!("pool frame {bad} outside [0, {n})")));
        }
        Ok(())
    }

    fn target(&self, timeline: &VideoTimeline) -> usize {
        self.budget.min(timeline.frame_count())
    }

    fn motion_stride(&self, timeline: &VideoTimeline) -> usize {
        self.stride_override.unwrap_or_else(|| (timeline.sample_fps() / self.fixed_rate_fps).round().max(1.0) as usize)
    }

    fn clip_frames(&self) -> Vec<usize> {
        let mut frames: Vec<usize> = self.relevant_clips.iter().flat_map(Clip::frames).collect();
        frames.sort_unstable();
        frames.dedup();
        frames
    }

    fn semantic_pool(&self) -> Vec<usize> {
        match &self.pool {
            Some(p) => {
                let mut p = p.clone();
                p.sort_unstable();
                p.dedup();
                p
            }
            None => self.clip_frames(),
        }
    }
}

/// Frames at a fixed stride inside each clip, starting at the clip's first frame.
pub fn fixed_rate_frames(clips: &[Clip], stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut out: Vec<usize> = clips.iter().flat_map(|c| c.frames().step_by(stride)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn check_features(timeline: &VideoTimeline, features: &FrameFeatureSet) -> Result<()> {
    if features.frame_count() != timeline.frame_count() {
        return Err(Error::Validation(format!(
            "feature set has {} frames, timeline has {}",
            features.frame_count(),
            timeline.frame_count()
        )));
    }
    Ok(())
}

fn pick_uniform(list: &[usize], k: usize) -> Vec<usize> {
    uniform_positions(list.len(), k).into_iter().map(|p| list[p]).collect()
}

fn finish(mut frames: Vec<usize>) -> Vec<usize> {
    frames.sort_unstable();
    frames.dedup();
    frames
}

/// Diverse frames from the semantic pool; backfills from the clips, then from
/// the whole video when `global` is set.
fn semantic_frames(
    plan: &SamplePlan,
    timeline: &VideoTimeline,
    features: &FrameFeatureSet,
    target: usize,
    global: bool,
) -> Result<Vec<usize>> {
    let pool = plan.semantic_pool();
    let mut chosen = if pool.is_empty() { Vec::new() } else { select_diverse(features, &pool, target)? };
    if chosen.len() < target {
        let more = extend_diverse(features, &chosen, &plan.clip_frames(), target - chosen.len())?;
        chosen.extend(more);
    }
    if global && chosen.len() < target {
        let all: Vec<usize> = (0..timeline.frame_count()).collect();
        let more = extend_diverse(features, &chosen, &all, target - chosen.len())?;
        chosen.extend(more);
    }
    Ok(finish(chosen))
}

/// Fixed-rate frames in the clips, thinned with the uniform formula when there
/// are too many. On a shortfall the stride is halved until the clips are
/// exhausted; with `global` set the rest comes uniformly from unused frames.
fn motion_frames(plan: &SamplePlan, timeline: &VideoTimeline, target: usize, global: bool) -> Vec<usize> {
    let mut stride = plan.motion_stride(timeline);
    let taken = fixed_rate_frames(&plan.relevant_clips, stride);
    if taken.len() >= target {
        return pick_uniform(&taken, target);
    }
    let mut chosen = taken;
    while chosen.len() < target && stride > 1 {
        stride = (stride / 2).max(1);
        let fresh: Vec<usize> = fixed_rate_frames(&plan.relevant_clips, stride)
            .into_iter()
            .filter(|f| chosen.binary_search(f).is_err())
            .collect();
        let need = target - chosen.len();
        let add = if fresh.len() <= need { fresh } else { pick_uniform(&fresh, need) };
        chosen = finish([chosen, add].concat());
    }
    if global && chosen.len() < target {
        let unused: Vec<usize> = (0..timeline.frame_count()).filter(|f| chosen.binary_search(f).is_err()).collect();
        let add = pick_uniform(&unused, target - chosen.len());
        chosen = finish([chosen, add].concat());
    }
    chosen
}

/// Diverse frames covering the semantic clues.
pub fn sample_semantic(plan: &SamplePlan, timeline: &VideoTimeline, features: &FrameFeatureSet) -> Result<Vec<usize>> {
    plan.validate(timeline)?;
    check_features(timeline, features)?;
    semantic_frames(plan, timeline, features, plan.target(timeline), true)
}

/// Semantic sampling for questions whose subject may be absent: half the
/// budget from the clue pool, the rest diverse across the whole video.
pub fn sample_semantic_widened(
    plan: &SamplePlan,
    timeline: &VideoTimeline,
    features: &FrameFeatureSet,
) -> Result<Vec<usize>> {
    plan.validate(timeline)?;
    check_features(timeline, features)?;
    let target = plan.target(timeline);
    let mut chosen = semantic_frames(plan, timeline, features, target.div_ceil(2), true)?;
    let all: Vec<usize> = (0..timeline.frame_count()).collect();
    let more = extend_diverse(features, &chosen, &all, target - chosen.len())?;
    chosen.extend(more);
    Ok(finish(chosen))
}

/// Frames at a fixed rate inside the localized clips.
pub fn sample_motion(plan: &SamplePlan, timeline: &VideoTimeline) -> Result<Vec<usize>> {
    plan.validate(timeline)?;
    Ok(motion_frames(plan, timeline, plan.target(timeline), true))
}

/// Half fixed-rate motion frames, half diverse semantic frames, over the same clips.
pub fn sample_hybrid(plan: &SamplePlan, timeline: &VideoTimeline, features: &FrameFeatureSet) -> Result<Vec<usize>> {
    plan.validate(timeline)?;
    check_features(timeline, features)?;
    let target = plan.target(timeline);
    let motion_budget = plan.budget.div_ceil(2);
    let semantic_budget = plan.budget - motion_budget;
    let motion = motion_frames(plan, timeline, motion_budget.min(target), false);
    let semantic = if semantic_budget > 0 {
        semantic_frames(plan, timeline, features, semantic_budget.min(target), false)?
    } else {
        Vec::new()
    };
    let mut chosen = finish([motion, semantic].concat());
    chosen.truncate(target);
    if chosen.len() < target {
        let more = extend_diverse(features, &chosen, &plan.clip_frames(), target - chosen.len())?;
        chosen.extend(more);
    }
    if chosen.len() < target {
        let all: Vec<usize> = (0..timeline.frame_count()).collect();
        let more = extend_diverse(features, &chosen, &all, target - chosen.len())?;
        chosen.extend(more);
    }
    Ok(finish(chosen))
}

/// Diverse frames across the whole video. With a budget of at least three,
/// the first and last tenth of the timeline each contribute a frame.
pub fn sample_nonclues(plan: &SamplePlan, timeline: &VideoTimeline, features: &FrameFeatureSet) -> Result<Vec<usize>> {
    if plan.budget == 0 {
        return Err(Error::Validation("sample budget must be >= 1".into()));
    }
    check_features(timeline, features)?;
    let n = timeline.frame_count();
    let target = plan.target(timeline);
    let all: Vec<usize> = (0..n).collect();
    if target == n {
        return Ok(all);
    }
    if target < 3 {
        return select_diverse(features, &all, target);
    }
    let decile = n.div_ceil(10);
    let mut chosen = vec![0];
    let last_decile: Vec<usize> = (n - decile..n).collect();
    chosen.extend(extend_diverse(features, &chosen, &last_decile, 1)?);
    let more = extend_diverse(features, &chosen, &all, target - chosen.len())?;
    chosen.extend(more);
    Ok(finish(chosen))
}

/// Dispatches on the plan's instruction type.
pub fn sample(plan: &SamplePlan, timeline: &VideoTimeline, features: &FrameFeatureSet) -> Result<Vec<usize>> {
    match plan.instruction_type {
        InstructionType::SemanticOnly if plan.widen_pool => sample_semantic_widened(plan, timeline, features),
        InstructionType::SemanticOnly => sample_semantic(plan, timeline, features),
        InstructionType::MotionOnly => sample_motion(plan, timeline),
        InstructionType::SemanticMotion => sample_hybrid(plan, timeline, features),
        InstructionType::NonClues => sample_nonclues(plan, timeline, features),
    }
}
