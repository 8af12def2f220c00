//! Bidirectional-similarity keyframe extraction and greedy diversity selection.

use crate::error::{Error, Result};
use crate::features::{cosine_sim, FrameFeatureSet};

pub const DEFAULT_T1: f64 = 0.85;
pub const DEFAULT_T2: f64 = 0.80;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyframeParams {
    /// Scene-change threshold: a frame less similar than this to the last
    /// keyframe is a candidate.
    pub t1: f64,
    /// Diversity threshold: a candidate is kept once some later frame is less
    /// similar than this to it.
    pub t2: f64,
    /// Bounds the forward diversity scan to this many frames. `None` scans to
    /// the end of the video.
    pub lookahead: Option<usize>,
}

impl Default for KeyframeParams {
    fn default() -> Self {
        Self { t1: DEFAULT_T1, t2: DEFAULT_T2, lookahead: None }
    }
}

impl KeyframeParams {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        let p = Self { t1, t2, lookahead: None };
        p.validate()?;
        Ok(p)
    }

    pub fn with_lookahead(mut self, lookahead: Option<usize>) -> Self {
        self.lookahead = lookahead;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t1.is_finite() || !self.t2.is_finite() {
            return Err(Error::Validation("keyframe thresholds must be finite".into()));
        }
        Ok(())
    }
}

/// Keyframe extraction over normalized features using cosine similarity.
pub fn extract_keyframes(features: &FrameFeatureSet, params: &KeyframeParams) -> Result<Vec<usize>> {
    if !features.is_normalized() {
        return Err(Error::Validation("keyframe extraction expects normalized features".into()));
    }
    extract_keyframes_with(features, params, cosine_sim)
}

/// Keyframe extraction with a caller-supplied similarity.
///
/// Frame 0 is always selected. Frame `i` is added when it is less similar
/// than `t1` to the last selected frame and at least one later frame is less
/// similar than `t2` to it. The last frame is appended if it differs (by `t1`)
/// from the last selected frame.
pub fn extract_keyframes_with<F>(features: &FrameFeatureSet, params: &KeyframeParams, sim: F) -> Result<Vec<usize>>
where
    F: Fn(&[f32], &[f32]) -> Result<f64>,
{
    params.validate()?;
    let n = features.frame_count();
    if n == 0 {
        return Err(Error::Validation("cannot extract keyframes from an empty feature set".into()));
    }
    let mut selected = vec![0usize];
    let mut prev = 0usize;
    for i in 1..n {
        let curr = features.row(i);
        if sim(curr, features.row(prev))? >= params.t1 {
            continue;
        }
        let scan_end = match params.lookahead {
            Some(w) => (i + 1).saturating_add(w).min(n),
            None => n,
        };
        for j in i + 1..scan_end {
            if sim(curr, features.row(j))? < params.t2 {
                selected.push(i);
                prev = i;
                break;
            }
        }
    }
    let last = n - 1;
    if sim(features.row(last), features.row(prev))? < params.t1 && selected.last() != Some(&last) {
        selected.push(last);
    }
    Ok(selected)
}

/// Greedy farthest-point selection of `k` frames among `candidates`, using
/// cosine distance. Seeds with the earliest candidate; ties go to the lower
/// frame index. Output is sorted.
pub fn select_diverse(features: &FrameFeatureSet, candidates: &[usize], k: usize) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        return Err(Error::Validation("select_diverse needs at least one candidate".into()));
    }
    if k == 0 {
        return Err(Error::Validation("select_diverse needs k >= 1".into()));
    }
    let mut out = extend_diverse(features, &[], candidates, k)?;
    out.sort_unstable();
    Ok(out)
}

/// Continues farthest-point selection from an already chosen set, adding up
/// to `extra` frames from `candidates` (frames already chosen are skipped).
/// Returns only the added frames, in pick order. With an empty chosen set the
/// earliest candidate seeds the selection.
pub fn extend_diverse(
    features: &FrameFeatureSet,
    chosen: &[usize],
    candidates: &[usize],
    extra: usize,
) -> Result<Vec<usize>> {
    let n = features.frame_count();
    if let Some(&bad) = candidates.iter().chain(chosen).find(|&&c| c >= n) {
        return Err(Error::Range(format!("candidate frame {bad} outside [0, {n})")));
    }
    let mut pool: Vec<usize> = candidates.to_vec();
    pool.sort_unstable();
    pool.dedup();
    pool.retain(|c| !chosen.contains(c));
    let mut added = Vec::with_capacity(extra.min(pool.len()));
    if extra == 0 || pool.is_empty() {
        return Ok(added);
    }

    // min_dist[p] = distance from pool[p] to the nearest chosen frame.
    let mut min_dist = vec![f64::INFINITY; pool.len()];
    let mut taken = vec![false; pool.len()];
    let absorb = |frame: usize, min_dist: &mut [f64]| -> Result<()> {
        let f = features.row(frame);
        for (p, &c) in pool.iter().enumerate() {
            let d = 1.0 - cosine_sim(f, features.row(c))?;
            if d < min_dist[p] {
                min_dist[p] = d;
            }
        }
        Ok(())
    };
    for &c in chosen {
        absorb(c, &mut min_dist)?;
    }
    if chosen.is_empty() {
        taken[0] = true;
        added.push(pool[0]);
        absorb(pool[0], &mut min_dist)?;
    }
    while added.len() < extra {
        let mut best: Option<usize> = None;
        for p in 0..pool.len() {
            if taken[p] {
                continue;
            }
            // Strict > keeps the earliest index on ties since pool is sorted.
            if best.is_none_or(|b| min_dist[p] > min_dist[b]) {
                best = Some(p);
            }
        }
        let Some(b) = best else { break };
        taken[b] = true;
        added.push(pool[b]);
        absorb(pool[b], &mut min_dist)?;
    }
    Ok(added)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::normalize;
    use proptest::prelude::*;

    fn set(rows: &[Vec<f32>]) -> FrameFeatureSet {
        normalize(&FrameFeatureSet::from_rows("v", rows, false).unwrap()).unwrap()
    }

    const E1: [f32; 2] = [1.0, 0.0];
    const E2: [f32; 2] = [0.0, 1.0];

    #[test]
    fn constant_video_keeps_only_first_frame() {
        let f = set(&vec![vec![0.6, 0.8]; 8]);
        assert_eq!(extract_keyframes(&f, &KeyframeParams::new(0.9, 0.9).unwrap()).unwrap(), vec![0]);
    }

    #[test]
    fn alternating_scenes() {
        let f = set(&[E1, E1, E2, E2, E1].map(|r| r.to_vec()));
        let got = extract_keyframes(&f, &KeyframeParams::new(0.5, 0.5).unwrap()).unwrap();
        assert_eq!(got, vec![0, 2, 4]);
    }

    #[test]
    fn floor_threshold_never_fires() {
        let f = set(&[E1, E2, E1, E2].map(|r| r.to_vec()));
        assert_eq!(extract_keyframes(&f, &KeyframeParams::new(-1.0, 0.5).unwrap()).unwrap(), vec![0]);
    }

    #[test]
    fn last_frame_is_not_duplicated() {
        // Frame 3 has no future frames; only the last-frame rule adds it.
        let f = set(&[E1, E2, E1, E2].map(|r| r.to_vec()));
        let got = extract_keyframes(&f, &KeyframeParams::new(0.5, 0.5).unwrap()).unwrap();
        assert_eq!(got, vec![0, 1, 2, 3]);
    }

    #[test]
    fn lookahead_limits_diversity_scan() {
        // Frame 1 only finds a dissimilar frame three steps ahead.
        let f = set(&[E1, E2, E2, E2, E1].map(|r| r.to_vec()));
        let p = KeyframeParams::new(0.5, 0.5).unwrap();
        assert_eq!(extract_keyframes(&f, &p).unwrap(), vec![0, 1, 4]);
        // Within two frames frame 1 sees only E2; frame 2 then reaches frame 4.
        assert_eq!(extract_keyframes(&f, &p.with_lookahead(Some(2))).unwrap(), vec![0, 2, 4]);
    }

    #[test]
    fn empty_or_unnormalized_input_rejected() {
        let empty = FrameFeatureSet::from_flat("v", 2, vec![], true).unwrap();
        assert!(matches!(extract_keyframes(&empty, &KeyframeParams::default()), Err(Error::Validation(_))));
        let raw = FrameFeatureSet::from_rows("v", &[vec![2.0, 0.0]], false).unwrap();
        assert!(extract_keyframes(&raw, &KeyframeParams::default()).is_err());
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn keyframe_count_is_not_monotone_in_t1() {
        // Raising t1 can pick an earlier frame that then absorbs later scene
        // changes, so fewer keyframes come out even with diversity disabled.
        let f = set(&[
            [0.06588616, 0.99782715],
            [-0.99817268, 0.06042598],
            [0.9761394, -0.21714481],
            [0.39762082, -0.91754983],
            [0.95424867, 0.29901417],
            [0.99421547, -0.10740391],
            [0.52063752, -0.85377782],
            [0.83451905, -0.55097909],
            [0.44436948, 0.89584361],
            [0.63534996, 0.77222434],
        ]
        .map(|r| r.to_vec()));
        let off = 1.0 + 1e-9;
        let lo = extract_keyframes(&f, &KeyframeParams::new(-0.55, off).unwrap()).unwrap();
        let hi = extract_keyframes(&f, &KeyframeParams::new(-0.11, off).unwrap()).unwrap();
        assert_eq!(lo, vec![0, 3, 8]);
        assert_eq!(hi, vec![0, 2]);
    }

    #[test]
    fn diverse_ties_resolve_by_index() {
        let f = set(&vec![vec![0.6, 0.8]; 10]);
        let cands: Vec<usize> = (0..10).collect();
        assert_eq!(select_diverse(&f, &cands, 3).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn diverse_picks_the_far_frame() {
        let f = set(&[E1, E1, E2].map(|r| r.to_vec()));
        assert_eq!(select_diverse(&f, &[0, 1, 2], 2).unwrap(), vec![0, 2]);
    }

    #[test]
    fn diverse_saturates() {
        let f = set(&[E1, E1, E2, E2].map(|r| r.to_vec()));
        assert_eq!(select_diverse(&f, &[3, 1, 2], 5).unwrap(), vec![1, 2, 3]);
        assert!(select_diverse(&f, &[], 2).is_err());
        assert!(matches!(select_diverse(&f, &[9], 1), Err(Error::Range(_))));
    }

    #[test]
    fn extend_respects_existing_choice() {
        let f = set(&[E1, E1, E2, E2, [std::f32::consts::FRAC_1_SQRT_2; 2]].map(|r| r.to_vec()));
        let added = extend_diverse(&f, &[0], &[0, 1, 2, 3, 4], 1).unwrap();
        assert_eq!(added, vec![2]);
        let added = extend_diverse(&f, &[0, 2], &[1, 3, 4], 1).unwrap();
        assert_eq!(added, vec![4]);
    }

    proptest! {
        #[test]
        fn keyframes_are_sorted_subset_with_zero(
            rows in (1usize..6).prop_flat_map(|d| proptest::collection::vec(proptest::collection::vec(-1.0f32..1.0, d), 1..40)),
            t1 in -0.5f64..1.0,
            t2 in -0.5f64..1.0,
        ) {
            prop_assume!(rows.iter().all(|r| r.iter().map(|x| x * x).sum::<f32>() > 1e-3));
            let f = set(&rows);
            let sel = extract_keyframes(&f, &KeyframeParams::new(t1, t2).unwrap()).unwrap();
            prop_assert_eq!(sel[0], 0);
            prop_assert!(sel.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(*sel.last().unwrap() < rows.len());
        }

        #[test]
        fn disabled_diversity_reduces_to_greedy_chain(
            rows in proptest::collection::vec(proptest::collection::vec(-1.0f32..1.0, 3), 2..40),
            t1 in -1.0f64..1.0,
        ) {
            prop_assume!(rows.iter().all(|r| r.iter().map(|x| x * x).sum::<f32>() > 1e-3));
            let f = set(&rows);
            let n = rows.len();
            let sel = extract_keyframes(&f, &KeyframeParams::new(t1, 1.0 + 1e-9).unwrap()).unwrap();
            let mut chain = vec![0];
            for i in 1..n - 1 {
                if cosine_sim(f.row(i), f.row(*chain.last().unwrap())).unwrap() < t1 {
                    chain.push(i);
                }
            }
            if cosine_sim(f.row(n - 1), f.row(*chain.last().unwrap())).unwrap() < t1 {
                chain.push(n - 1);
            }
            prop_assert_eq!(sel, chain);
            let all = extract_keyframes(&f, &KeyframeParams::new(1.0 + 1e-9, 1.0 + 1e-9).unwrap()).unwrap();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn diverse_output_size(n in 1usize..30, k in 1usize..40, seed in 0u64..1000) {
            let rows: Vec<Vec<f32>> = (0..n)
                .map(|i| vec![((i as u64 * 7 + seed) % 11) as f32 + 0.5, ((i as u64 * 3 + seed) % 5) as f32 + 0.5])
                .collect();
            let f = set(&rows);
            let cands: Vec<usize> = (0..n).collect();
            let out = select_diverse(&f, &cands, k).unwrap();
            prop_assert_eq!(out.len(), k.min(n));
            prop_assert!(out.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
