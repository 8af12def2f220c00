//! Inference-time frame selection: relevance scorers and the Top-k / Uni-k policies.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{cosine_sim, FrameFeatureSet};
use crate::reasoner::http::{JsonEndpoint, DEFAULT_TIMEOUT};

/// One finite relevance score per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RelevanceScores(Vec<f64>);

impl RelevanceScores {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::Validation(format!("score for frame {i} is not finite")));
        }
        Ok(Self(scores))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for RelevanceScores {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<RelevanceScores> for Vec<f64> {
    fn from(s: RelevanceScores) -> Self {
        s.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    #[serde(rename = "topk")]
    TopK,
    #[serde(rename = "uniform")]
    UniformK,
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "topk" | "top-k" | "top" => Ok(Policy::TopK),
            "uniform" | "uni" | "uni-k" => Ok(Policy::UniformK),
            other => Err(Error::Validation(format!("unknown policy {other:?}"))),
        }
    }
}

/// Selected frames in temporal order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub policy: Policy,
    pub k: usize,
    pub frame_indices: Vec<usize>,
}

/// Selection output file: `{video_id, policy, k, frame_indices}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub video_id: String,
    pub policy: Policy,
    pub k: usize,
    pub frame_indices: Vec<usize>,
}

impl SelectionRecord {
    pub fn new(video_id: impl Into<String>, result: SelectionResult) -> Self {
        Self { video_id: video_id.into(), policy: result.policy, k: result.k, frame_indices: result.frame_indices }
    }
}

/// Center-of-cell positions `floor((j + 0.5) * n / k)` for `j < k`, or all of
/// `0..n` when `k >= n`. For `k < n` the cells are wider than one frame, so
/// positions never collide.
pub fn uniform_positions(n: usize, k: usize) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    (0..k).map(|j| (2 * j + 1) * n / (2 * k)).collect()
}

pub fn select_uniform(frame_count: usize, k: usize) -> Result<SelectionResult> {
    if k == 0 {
        return Err(Error::Validation("k must be >= 1".into()));
    }
    Ok(SelectionResult { policy: Policy::UniformK, k, frame_indices: uniform_positions(frame_count, k) })
}

/// The `k` highest-scoring frames (ties to the lower index), in temporal order.
pub fn select_topk(scores: &RelevanceScores, k: usize) -> Result<SelectionResult> {
    if k == 0 {
        return Err(Error::Validation("k must be >= 1".into()));
    }
    let s = scores.as_slice();
    let mut order: Vec<usize> = (0..s.len()).collect();
    if k < s.len() {
        order.select_nth_unstable_by(k - 1, |&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
        order.truncate(k);
    }
    order.sort_unstable();
    Ok(SelectionResult { policy: Policy::TopK, k, frame_indices: order })
}

/// Cosine similarity of every frame to a query embedding.
pub fn score_by_query_similarity(features: &FrameFeatureSet, query: &[f32]) -> Result<RelevanceScores> {
    if query.len() != features.dim() {
        return Err(Error::Validation(format!(
            "query has {} components, features have {}",
            query.len(),
            features.dim()
        )));
    }
    let scores = features.rows().map(|row| cosine_sim(row, query)).collect::<Result<Vec<_>>>()?;
    RelevanceScores::new(scores)
}

/// Request sent to a remote frame scorer: one representation per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub video_id: String,
    pub question: String,
    pub frames: Vec<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReply {
    pub scores: Vec<f64>,
}

/// An external relevance model.
pub trait FrameScorer: Send + Sync {
    fn score(&self, request: &ScoreRequest) -> Result<Vec<f64>>;
}

/// Scores frames with a remote model. Grid features are reduced to one
/// anchor vector per frame before sending.
pub fn score_frames_remote(
    features: &FrameFeatureSet,
    question: &str,
    scorer: &dyn FrameScorer,
) -> Result<RelevanceScores> {
    let anchors = features.anchor_pooled()?;
    let request = ScoreRequest {
        video_id: features.video_id().to_string(),
        question: question.to_string(),
        frames: anchors.rows().map(<[f32]>::to_vec).collect(),
    };
    let scores = scorer.score(&request)?;
    if scores.len() != features.frame_count() {
        return Err(Error::Protocol(format!(
            "scorer returned {} scores for {} frames",
            scores.len(),
            features.frame_count()
        )));
    }
    RelevanceScores::new(scores).map_err(|e| Error::Protocol(e.to_string()))
}

/// `POST <url>` with a [`ScoreRequest`]; the reply is `{"scores": [...]}`.
#[derive(Debug, Clone)]
pub struct HttpScorer {
    endpoint: JsonEndpoint,
}

impl HttpScorer {
    pub fn new(url: impl Into<String>) -> Self {
        Self::with_timeout(url, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(url: impl Into<String>, timeout: Duration) -> Self {
        Self { endpoint: JsonEndpoint::new(url, timeout) }
    }
}

impl FrameScorer for HttpScorer {
    fn score(&self, request: &ScoreRequest) -> Result<Vec<f64>> {
        let reply: ScoreReply = self.endpoint.post(request)?;
        Ok(reply.scores)
    }
}

/// Returns canned scores per video and keeps every request it saw.
#[derive(Debug, Default)]
pub struct MockScorer {
    scores: BTreeMap<String, Vec<f64>>,
    pub requests: Mutex<Vec<ScoreRequest>>,
}

impl MockScorer {
    pub fn new(scores: BTreeMap<String, Vec<f64>>) -> Self {
        Self { scores, requests: Mutex::new(Vec::new()) }
    }
}

impl FrameScorer for MockScorer {
    fn score(&self, request: &ScoreRequest) -> Result<Vec<f64>> {
        self.requests.lock().unwrap().push(request.clone());
        self.scores
            .get(&request.video_id)
            .cloned()
            .ok_or_else(|| Error::Protocol(format!("no canned scores for {}", request.video_id)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{normalize, GridShape};
    use crate::reasoner::http::test_server;
    use proptest::prelude::*;

    fn scores(v: &[f64]) -> RelevanceScores {
        RelevanceScores::new(v.to_vec()).unwrap()
    }

    #[test]
    fn topk_ties_prefer_lower_index() {
        assert_eq!(select_topk(&scores(&[0.1, 0.9, 0.9, 0.2]), 2).unwrap().frame_indices, vec![1, 2]);
        assert_eq!(select_topk(&scores(&[0.5, 0.5, 0.5, 0.5]), 2).unwrap().frame_indices, vec![0, 1]);
    }

    #[test]
    fn topk_saturates_and_validates() {
        assert_eq!(select_topk(&scores(&[3.0, 1.0, 2.0]), 10).unwrap().frame_indices, vec![0, 1, 2]);
        assert!(select_topk(&scores(&[1.0]), 0).is_err());
        assert!(RelevanceScores::new(vec![0.0, f64::NAN]).is_err());
        assert!(serde_json::from_str::<RelevanceScores>("[1.0, 2.0]").is_ok());
    }

    #[test]
    fn uniform_examples() {
        let expected: Vec<usize> = (0..32).map(|j| 8 + 16 * j).collect();
        assert_eq!(select_uniform(512, 32).unwrap().frame_indices, expected);
        assert_eq!(*expected.last().unwrap(), 504);
        assert_eq!(select_uniform(7, 7).unwrap().frame_indices, (0..7).collect::<Vec<_>>());
        assert_eq!(select_uniform(10, 3).unwrap().frame_indices, vec![1, 5, 8]);
        assert_eq!(select_uniform(4, 9).unwrap().frame_indices, vec![0, 1, 2, 3]);
    }

    #[test]
    fn query_similarity_scores() {
        let rows: Vec<Vec<f32>> = (0..6).map(|i| if i == 3 { vec![0.0, 1.0] } else { vec![1.0, 0.0] }).collect();
        let f = FrameFeatureSet::from_rows("v", &rows, true).unwrap();
        let s = score_by_query_similarity(&f, &[0.0, 1.0]).unwrap();
        assert_eq!(s.as_slice()[3], 1.0);
        assert_eq!(select_topk(&s, 1).unwrap().frame_indices, vec![3]);
        assert!(score_by_query_similarity(&f, &[1.0, 0.0, 0.0]).is_err());

        let flat = normalize(&FrameFeatureSet::from_rows("v", &vec![vec![0.3, 0.4]; 8], false).unwrap()).unwrap();
        let s = score_by_query_similarity(&flat, &[0.6, 0.8]).unwrap();
        assert!(s.as_slice().windows(2).all(|w| w[0] == w[1]));
        assert_eq!(select_topk(&s, 3).unwrap().frame_indices, vec![0, 1, 2]);
    }

    #[test]
    fn remote_scores_pass_through() {
        let f = FrameFeatureSet::from_rows("vid", &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]], false).unwrap();
        let mock = MockScorer::new(BTreeMap::from([("vid".to_string(), vec![0.2, 0.7, 0.1])]));
        let s = score_frames_remote(&f, "what?", &mock).unwrap();
        assert_eq!(s.as_slice(), &[0.2, 0.7, 0.1]);
        assert_eq!(mock.requests.lock().unwrap()[0].frames[2], vec![1.0, 1.0]);
    }

    #[test]
    fn remote_scorer_receives_anchors() {
        // 2 frames, 2x2 grid, 2 channels, constant per frame.
        let mut data = [0.5f32, -1.0].repeat(4);
        data.extend([2.0f32, 3.0].repeat(4));
        let f = FrameFeatureSet::from_grid("g", GridShape { rows: 2, cols: 2 }, 2, data).unwrap();
        let mock = MockScorer::new(BTreeMap::from([("g".to_string(), vec![1.0, 2.0])]));
        score_frames_remote(&f, "q", &mock).unwrap();
        let sent = &mock.requests.lock().unwrap()[0];
        assert_eq!(sent.frames, vec![vec![0.5, -1.0], vec![2.0, 3.0]]);
    }

    #[test]
    fn wrong_length_is_protocol_error() {
        let f = FrameFeatureSet::from_rows("vid", &[vec![1.0], vec![2.0]], false).unwrap();
        let mock = MockScorer::new(BTreeMap::from([("vid".to_string(), vec![0.2])]));
        assert!(matches!(score_frames_remote(&f, "q", &mock), Err(Error::Protocol(_))));
    }

    #[test]
    fn http_scorer_round_trip() {
        let (url, seen) = test_server::serve(vec![(200, r#"{"scores": [0.5, 0.25]}"#.into())]);
        let f = FrameFeatureSet::from_rows("vid", &[vec![1.0], vec![2.0]], false).unwrap();
        let s = score_frames_remote(&f, "why", &HttpScorer::new(url)).unwrap();
        assert_eq!(s.as_slice(), &[0.5, 0.25]);
        let body: serde_json::Value = serde_json::from_str(&seen.lock().unwrap()[0]).unwrap();
        assert_eq!(body["question"], "why");
        assert_eq!(body["frames"][1][0], 2.0);
    }

    #[test]
    fn policy_names() {
        assert_eq!("topk".parse::<Policy>().unwrap(), Policy::TopK);
        assert_eq!("uniform".parse::<Policy>().unwrap(), Policy::UniformK);
        assert_eq!(serde_json::to_string(&Policy::UniformK).unwrap(), "\"uniform\"");
        assert!("best".parse::<Policy>().is_err());
    }

    proptest! {
        #[test]
        fn uniform_gaps_differ_by_at_most_one(n in 1usize..2000, k in 1usize..200) {
            let idx = select_uniform(n, k).unwrap().frame_indices;
            prop_assert_eq!(idx.len(), k.min(n));
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
            let gaps: Vec<usize> = idx.windows(2).map(|w| w[1] - w[0]).collect();
            if let (Some(lo), Some(hi)) = (gaps.iter().min(), gaps.iter().max()) {
                prop_assert!(hi - lo <= 1);
            }
        }

        #[test]
        fn topk_is_sorted_unique_and_sized(v in proptest::collection::vec(-5.0f64..5.0, 1..300), k in 1usize..64) {
            let sel = select_topk(&scores(&v), k).unwrap().frame_indices;
            prop_assert_eq!(sel.len(), k.min(v.len()));
            prop_assert!(sel.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
