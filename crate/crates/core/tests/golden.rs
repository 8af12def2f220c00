mod common;

use common::{fixture_dir, run_dir, write_inputs};
use vidthinker::domain::InstructionType;
use vidthinker::pipeline::{decode_annotations, Stage};

/// Rebuilds the committed fixture. Run with `VIDTHINKER_REGEN_GOLDEN=1`, then
/// review the diff of `annotations.jsonl` by hand before committing.
#[test]
fn regenerate_golden() {
    if std::env::var_os("VIDTHINKER_REGEN_GOLDEN").is_none() {
        return;
    }
    let dir = fixture_dir();
    write_inputs(&dir);
    let (text, failures) = run_dir(&dir, 1);
    assert!(failures.is_empty(), "{failures:?}");
    std::fs::write(dir.join("annotations.jsonl"), text).unwrap();
}

fn golden_text() -> String {
    std::fs::read_to_string(fixture_dir().join("annotations.jsonl")).expect("golden file missing")
}

#[test]
fn committed_inputs_match_generator() {
    let tmp = tempfile::tempdir().unwrap();
    write_inputs(tmp.path());
    for name in ["drums.vitg", "street.vitg", "drums.qa.json", "street.qa.json", "manifest.tsv", "scenario.json"] {
        let fresh = std::fs::read(tmp.path().join(name)).unwrap();
        let committed = std::fs::read(fixture_dir().join(name)).unwrap();
        assert_eq!(fresh, committed, "{name} drifted from the generator");
    }
}

#[test]
fn golden_is_byte_identical_at_any_parallelism() {
    let expected = golden_text();
    for workers in [1, 2, 8] {
        let (text, failures) = run_dir(&fixture_dir(), workers);
        assert!(failures.is_empty(), "{failures:?}");
        assert_eq!(text, expected, "workers = {workers}");
    }
}

#[test]
fn golden_records_are_what_the_scenario_implies() {
    let records = decode_annotations(&golden_text()).unwrap();
    let ids: Vec<(&str, &str)> = records.iter().map(|r| (r.video_id.as_str(), r.qa_id.as_str())).collect();
    assert_eq!(
        ids,
        [
            ("drums", "drums-feet"),
            ("drums", "drums-summary"),
            ("drums", "drums-tempo"),
            ("street", "street-camera"),
            ("street", "street-dog"),
            ("street", "street-sign"),
        ]
    );
    for r in &records {
        r.validate().unwrap();
        assert_eq!(r.frame_indices.len(), 8);
        let stages = &r.provenance.stages;
        let at = |s| stages.iter().position(|&x| x == s);
        assert!(at(Stage::Captioning) < at(Stage::Retrieval));
        if r.instruction_type != InstructionType::NonClues {
            assert!(at(Stage::Retrieval) < at(Stage::Localization));
        }
    }
    let by_id = |id: &str| records.iter().find(|r| r.qa_id == id).unwrap();

    let feet = by_id("drums-feet");
    assert_eq!(feet.instruction_type, InstructionType::SemanticOnly);
    assert_eq!(feet.relevant_clip_indices, vec![2]);
    assert!(feet.frame_indices.contains(&22) && feet.frame_indices.contains(&26));
    assert_eq!(feet.provenance.captions[2], "A man plays the drums; his feet press the pedals.");

    let summary = by_id("drums-summary");
    assert_eq!(summary.instruction_type, InstructionType::NonClues);
    assert!(summary.relevant_clip_indices.is_empty());
    assert_eq!(summary.frame_indices[0], 0);
    assert!(summary.frame_indices.iter().any(|&f| f >= 54));

    let tempo = by_id("drums-tempo");
    assert_eq!(tempo.instruction_type, InstructionType::MotionOnly);
    assert!(tempo.frame_indices.iter().all(|&f| (10..20).contains(&f) || (40..50).contains(&f)));

    let camera = by_id("street-camera");
    assert_eq!(camera.instruction_type, InstructionType::SemanticMotion);
    assert!(camera.frame_indices.contains(&11) && camera.frame_indices.contains(&13));

    let dog = by_id("street-dog");
    assert_eq!(dog.instruction_type, InstructionType::SemanticOnly);
    assert!(dog.frame_indices.contains(&27));
    assert!(!dog.provenance.backfill_frames.is_empty());

    let sign = by_id("street-sign");
    assert!(sign.provenance.verdict_bitmap.iter().all(|v| !v));
    assert!(sign.frame_indices.iter().all(|&f| (30..40).contains(&f)));
}

#[test]
fn corrupt_feature_file_fails_alone() {
    let tmp = tempfile::tempdir().unwrap();
    write_inputs(tmp.path());
    std::fs::write(tmp.path().join("street.vitg"), b"VITG\x01\x00").unwrap();
    let (text, failures) = run_dir(tmp.path(), 2);
    assert_eq!(failures.len(), 1);
    assert_eq!(failures[0].video_id, "street");
    assert_eq!(failures[0].stage, Stage::LoadFeatures);
    let records = decode_annotations(&text).unwrap();
    assert_eq!(records.len(), 3);
    assert!(records.iter().all(|r| r.video_id == "drums"));
}

#[test]
fn missing_manifest_entries_are_failures() {
    let tmp = tempfile::tempdir().unwrap();
    write_inputs(tmp.path());
    let manifest = tmp.path().join("manifest.tsv");
    let mut text = std::fs::read_to_string(&manifest).unwrap();
    text.push_str("ghost\tghost.vitg\tghost.qa.json\nhalf-line\n");
    std::fs::write(&manifest, text).unwrap();
    let (out, failures) = run_dir(tmp.path(), 4);
    assert_eq!(decode_annotations(&out).unwrap().len(), 6);
    let stages: Vec<Stage> = failures.iter().map(|f| f.stage).collect();
    assert!(stages.contains(&Stage::Manifest) && stages.contains(&Stage::LoadFeatures));
}
