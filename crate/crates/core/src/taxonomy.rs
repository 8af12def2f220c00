//! Routing of QA pairs into the four instruction types.
//!
//! Precedence is holistic > motion > semantic:
//!
//! | condition                                                   | type           |
//! |-------------------------------------------------------------|----------------|
//! | holistic probe, retrieval returned None, or every clip kept | NonClues       |
//! | motion probe, not a non-existence question, no semantic cue | MotionOnly     |
//! | motion probe, not a non-existence question, semantic cue    | SemanticMotion |
//! | anything else                                               | SemanticOnly   |
//!
//! Non-existence questions stay SemanticOnly but widen their frame pool with
//! whole-video diverse frames, since the thing asked about may be absent.

use serde::{Deserialize, Serialize};

use crate::domain::{InstructionType, QAPair};
use crate::error::Result;
use crate::reasoner::{Exchange, Probe, ReasonerClient, RetrievalResult};

/// What clip retrieval reported, if it ran.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalSignal {
    NotRun,
    NoClips,
    /// Fraction of clips returned, in `(0, 1]`.
    Breadth(f64),
}

impl RetrievalSignal {
    pub fn from_result(result: &RetrievalResult, n_clips: usize) -> Self {
        match &result.clips {
            None => RetrievalSignal::NoClips,
            Some(c) if n_clips == 0 => RetrievalSignal::Breadth(if c.is_empty() { 0.0 } else { 1.0 }),
            Some(c) => RetrievalSignal::Breadth((c.len() as f64 / n_clips as f64).min(1.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaxonomySignals {
    pub motion_flag: bool,
    pub nonexistence_flag: bool,
    pub holistic_flag: bool,
    /// Whether the question also asks for semantic entities. Only probed for
    /// motion questions; false otherwise.
    pub semantic_flag: bool,
    pub retrieval: RetrievalSignal,
}

pub fn classify(signals: &TaxonomySignals) -> InstructionType {
    let whole_video = match signals.retrieval {
        RetrievalSignal::NoClips => true,
        RetrievalSignal::Breadth(b) => b >= 1.0,
        RetrievalSignal::NotRun => false,
    };
    if signals.holistic_flag || whole_video {
        InstructionType::NonClues
    } else if signals.motion_flag && !signals.nonexistence_flag {
        if signals.semantic_flag {
            InstructionType::SemanticMotion
        } else {
            InstructionType::MotionOnly
        }
    } else {
        InstructionType::SemanticOnly
    }
}

/// Non-existence questions keep the SemanticOnly label but sample part of
/// their budget from the whole video.
pub fn widens_pool(signals: &TaxonomySignals, instruction_type: InstructionType) -> bool {
    signals.nonexistence_flag && instruction_type == InstructionType::SemanticOnly
}

/// Runs the classifier probes for one QA pair.
pub fn probe_signals(
    client: &ReasonerClient,
    qa: &QAPair,
    retrieval: RetrievalSignal,
    log: &mut Vec<Exchange>,
) -> Result<TaxonomySignals> {
    let holistic_flag = client.probe(Probe::Holistic, qa, log)?;
    let motion_flag = client.probe(Probe::Motion, qa, log)?;
    let nonexistence_flag = client.probe(Probe::Nonexistence, qa, log)?;
    let semantic_flag = if motion_flag && !nonexistence_flag { client.probe(Probe::Semantic, qa, log)? } else { false };
    Ok(TaxonomySignals { motion_flag, nonexistence_flag, holistic_flag, semantic_flag, retrieval })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reasoner::{prompts, MockBackend, MockScenario, Role};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn signals(motion: bool, nonexist: bool, holistic: bool, semantic: bool, r: RetrievalSignal) -> TaxonomySignals {
        TaxonomySignals {
            motion_flag: motion,
            nonexistence_flag: nonexist,
            holistic_flag: holistic,
            semantic_flag: semantic,
            retrieval: r,
        }
    }

    #[test]
    fn speed_comparison_is_motion_only() {
        let s = signals(true, false, false, false, RetrievalSignal::Breadth(0.2));
        assert_eq!(classify(&s), InstructionType::MotionOnly);
    }

    #[test]
    fn describe_the_video_is_non_clues() {
        let s = signals(false, false, true, false, RetrievalSignal::Breadth(0.4));
        assert_eq!(classify(&s), InstructionType::NonClues);
    }

    #[test]
    fn camera_movement_is_semantic_motion() {
        let s = signals(true, false, false, true, RetrievalSignal::Breadth(0.3));
        assert_eq!(classify(&s), InstructionType::SemanticMotion);
    }

    #[test]
    fn full_breadth_or_none_is_non_clues() {
        assert_eq!(
            classify(&signals(true, false, false, true, RetrievalSignal::Breadth(1.0))),
            InstructionType::NonClues
        );
        assert_eq!(classify(&signals(false, false, false, false, RetrievalSignal::NoClips)), InstructionType::NonClues);
    }

    #[test]
    fn nonexistence_stays_semantic_and_widens() {
        let s = signals(true, true, false, true, RetrievalSignal::Breadth(0.25));
        let t = classify(&s);
        assert_eq!(t, InstructionType::SemanticOnly);
        assert!(widens_pool(&s, t));
        assert!(!widens_pool(&signals(false, false, false, false, RetrievalSignal::Breadth(0.25)), t));
    }

    #[test]
    fn breadth_from_retrieval() {
        let r = RetrievalResult::new("", Some(vec![1, 2]));
        assert_eq!(RetrievalSignal::from_result(&r, 8), RetrievalSignal::Breadth(0.25));
        assert_eq!(RetrievalSignal::from_result(&RetrievalResult::new("", None), 8), RetrievalSignal::NoClips);
    }

    #[test]
    fn probes_run_through_the_client() {
        let qa = QAPair::new("q", "Which is faster, the white car or the bicycle?", "B. The white car.");
        let scenario = MockScenario::new()
            .with_default(Role::ClassifyHolistic, "No")
            .with_default(Role::ClassifyNonexistence, "No")
            .with_default(Role::ClassifySemantic, "No")
            .with_prompt(Role::ClassifyMotion, &prompts::motion_prompt(&qa), "Yes.");
        let client = ReasonerClient::new(Arc::new(MockBackend::new(scenario)));
        let mut log = Vec::new();
        let s = probe_signals(&client, &qa, RetrievalSignal::Breadth(0.2), &mut log).unwrap();
        assert!(s.motion_flag && !s.semantic_flag);
        assert_eq!(classify(&s), InstructionType::MotionOnly);
        assert_eq!(log.len(), 4);
    }

    fn any_signal() -> impl Strategy<Value = RetrievalSignal> {
        prop_oneof![
            Just(RetrievalSignal::NotRun),
            Just(RetrievalSignal::NoClips),
            (0.0f64..=1.0).prop_map(RetrievalSignal::Breadth),
        ]
    }

    proptest! {
        #[test]
        fn routing_is_total_and_pure(m: bool, n: bool, h: bool, s: bool, r in any_signal()) {
            let sig = signals(m, n, h, s, r);
            let t = classify(&sig);
            prop_assert!(InstructionType::ALL.contains(&t));
            prop_assert_eq!(t, classify(&sig));
            if r == RetrievalSignal::NoClips || h {
                prop_assert_eq!(t, InstructionType::NonClues);
            }
        }
    }
}
