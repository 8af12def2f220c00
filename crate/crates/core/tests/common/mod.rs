//! Shared golden fixture: two synthetic videos, six QA pairs, one mock scenario.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use vidthinker::domain::QAPair;
use vidthinker::features::{normalize, save_features, FrameFeatureSet};
use vidthinker::pipeline::{annotate_batch, encode_annotations, load_manifest, AnnotateConfig, StageFailure};
use vidthinker::reasoner::{prompts, MockBackend, MockScenario, Probe, ReasonerClient, Role};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden")
}

pub fn golden_config(workers: usize) -> AnnotateConfig {
    AnnotateConfig { budget: 8, workers, ..AnnotateConfig::default() }
}

/// `n` frames in scenes of `scene_len`; each scene points along its own axis
/// with a small per-frame wobble.
pub fn scene_features(video_id: &str, n: usize, scene_len: usize, dim: usize) -> FrameFeatureSet {
    let rows: Vec<Vec<f32>> = (0..n)
        .map(|i| {
            let scene = (i / scene_len) % dim;
            let mut v = vec![0.05f32; dim];
            v[scene] = 1.0;
            v[(scene + 1) % dim] += 0.3 * ((i as f32) * 0.7).sin().abs();
            v[(scene + 2) % dim] += 0.2 * ((i as f32) * 1.3).cos().abs();
            v
        })
        .collect();
    normalize(&FrameFeatureSet::from_rows(video_id, &rows, false).unwrap()).unwrap()
}

pub struct FixtureQa {
    pub video: &'static str,
    pub qa: QAPair,
    pub clip_num: &'static str,
    pub holistic: bool,
    pub motion: bool,
    pub nonexistence: bool,
    pub semantic: bool,
    pub yes_frames: &'static [usize],
}

pub fn fixture_qas() -> Vec<FixtureQa> {
    vec![
        FixtureQa {
            video: "drums",
            qa: QAPair::new(
                "drums-feet",
                "What does the man playing the drums do with his feet as he plays the drum?",
                "He moves his feet to press the pedals.",
            ),
            clip_num: "One clip: [Clip-2]",
            holistic: false,
            motion: false,
            nonexistence: false,
            semantic: false,
            yes_frames: &[22, 26],
        },
        FixtureQa {
            video: "drums",
            qa: QAPair::new("drums-tempo", "Does the drummer play faster at the start or at the end?", "At the end.")
                .with_options(vec!["A. At the start.".into(), "B. At the end.".into()]),
            clip_num: "Multiple clips: [Clip-1, Clip-4]",
            holistic: false,
            motion: true,
            nonexistence: false,
            semantic: false,
            yes_frames: &[],
        },
        FixtureQa {
            video: "drums",
            qa: QAPair::new("drums-summary", "Describe the video.", "A man plays a drum kit on a small stage."),
            clip_num: "Multiple clips: [Clip-0, Clip-1, Clip-2, Clip-3, Clip-4, Clip-5]",
            holistic: true,
            motion: false,
            nonexistence: false,
            semantic: false,
            yes_frames: &[],
        },
        FixtureQa {
            video: "street",
            qa: QAPair::new(
                "street-camera",
                "How does the camera move while the red bus passes the bakery?",
                "It pans left to follow the bus.",
            ),
            clip_num: "Multiple clips: [Clip-2, Clip-3]",
            holistic: false,
            motion: true,
            nonexistence: false,
            semantic: true,
            yes_frames: &[11, 13],
        },
        FixtureQa {
            video: "street",
            qa: QAPair::new("street-dog", "Is there a dog on the street?", "No, there is no dog."),
            clip_num: "One clip: [Clip-5]",
            holistic: false,
            motion: false,
            nonexistence: true,
            semantic: false,
            yes_frames: &[27],
        },
        FixtureQa {
            video: "street",
            qa: QAPair::new("street-sign", "What is written on the shop sign?", "Fresh bread."),
            clip_num: "Multiple clips: [Clip-6, Clip-7]",
            holistic: false,
            motion: false,
            nonexistence: false,
            semantic: false,
            yes_frames: &[],
        },
    ]
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "Yes."
    } else {
        "No."
    }
}

pub fn fixture_scenario() -> MockScenario {
    let mut s = MockScenario::new()
        .with_default(Role::ClipCaption, "A person in a room; nothing changes.")
        .with_default(Role::FrameVerdict, "No");
    for f in fixture_qas() {
        let qa = &f.qa;
        s = s
            .with_prompt(Role::KeyPhrases, &prompts::key_phrase_prompt(qa), format!("Key facts for {}.", qa.qa_id))
            .with_prompt(
                Role::ClipRetrieval,
                &retrieval_prompt_for(&f),
                format!("{{\"explanation\": \"Clips chosen for {}.\", \"clip_num\": \"{}\"}}", qa.qa_id, f.clip_num),
            )
            .with_prompt(Role::ClassifyHolistic, &Probe::Holistic.prompt(qa), yes_no(f.holistic))
            .with_prompt(Role::ClassifyMotion, &Probe::Motion.prompt(qa), yes_no(f.motion))
            .with_prompt(Role::ClassifyNonexistence, &Probe::Nonexistence.prompt(qa), yes_no(f.nonexistence))
            .with_prompt(Role::ClassifySemantic, &Probe::Semantic.prompt(qa), yes_no(f.semantic));
        for &frame in f.yes_frames {
            let frame_ref = format!("{}/frame/{frame}", f.video);
            s = s.with_prompt(Role::FrameVerdict, &prompts::verdict_prompt(&frame_ref, qa), "Yes");
        }
    }
    // drums clip 2 gets a distinct caption
    let cue = "Key facts for drums-feet.";
    s.with_prompt(
        Role::ClipCaption,
        &prompts::caption_prompt(cue, "drums/clip/2"),
        "A man plays the drums; his feet press the pedals.",
    )
}

fn clip_count(video: &str) -> usize {
    match video {
        "drums" => 6,
        _ => 8,
    }
}

/// Captions the pipeline will have produced for this QA under the scenario.
fn retrieval_prompt_for(f: &FixtureQa) -> String {
    let captions: Vec<String> = (0..clip_count(f.video))
        .map(|i| {
            if f.qa.qa_id == "drums-feet" && i == 2 {
                "A man plays the drums; his feet press the pedals.".to_string()
            } else {
                "A person in a room; nothing changes.".to_string()
            }
        })
        .collect();
    prompts::retrieval_prompt(&captions, &f.qa)
}

/// Writes features, QA files, manifest and scenario into `dir`.
pub fn write_inputs(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    // drums: 60 frames at 2 fps (six clips of 10); street: 40 frames at 1 fps (eight clips of 5)
    save_features(&scene_features("drums", 60, 10, 6), dir.join("drums.vitg")).unwrap();
    save_features(&scene_features("street", 40, 5, 8), dir.join("street.vitg")).unwrap();
    for video in ["drums", "street"] {
        let qas: Vec<QAPair> = fixture_qas().into_iter().filter(|f| f.video == video).map(|f| f.qa).collect();
        std::fs::write(dir.join(format!("{video}.qa.json")), serde_json::to_string_pretty(&qas).unwrap() + "\n")
            .unwrap();
    }
    std::fs::write(
        dir.join("manifest.tsv"),
        "# video_id\tfeatures\tqa\tsample_fps\nstreet\tstreet.vitg\tstreet.qa.json\ndrums\tdrums.vitg\tdrums.qa.json\t2\n",
    )
    .unwrap();
    std::fs::write(dir.join("scenario.json"), serde_json::to_string_pretty(&fixture_scenario()).unwrap() + "\n")
        .unwrap();
}

/// Runs the manifest in `dir` against its scenario; returns the annotation
/// file text and failures.
pub fn run_dir(dir: &Path, workers: usize) -> (String, Vec<StageFailure>) {
    let scenario = MockScenario::load(dir.join("scenario.json")).unwrap();
    let client = ReasonerClient::new(Arc::new(MockBackend::new(scenario))).with_max_parallelism(workers);
    let (entries, mut failures) = load_manifest(dir.join("manifest.tsv")).unwrap();
    let out = annotate_batch(&entries, &golden_config(workers), &client).unwrap();
    failures.extend(out.failures);
    (encode_annotations(&out.annotations).unwrap(), failures)
}
