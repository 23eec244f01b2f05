use std::path::{Path, PathBuf};

use compliant_motion::augment::augment_clip;
use compliant_motion::config::AugmentConfig;
use compliant_motion::dataset::{
    load_dataset, read_frames_bin, read_manifest, sha256_hex, write_dataset, DatasetSource,
    EVENTS_CSV, EVENTS_CSV_HEADER, FRAMES_BIN, MANIFEST_FILE,
};
use compliant_motion::fixtures;
use compliant_motion::model::{
    clip_to_string, load_clip, load_model, model_to_string, parse_model,
};
use compliant_motion::Error;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[test]
fn fixture_files_round_trip_byte_for_byte() {
    for name in ["humanoid.json", "planar_arm.json"] {
        let text = std::fs::read_to_string(fixture(name)).unwrap();
        let model = load_model(fixture(name)).unwrap();
        assert_eq!(model_to_string(&model), text, "{name}");
    }
    let model = load_model(fixture("humanoid.json")).unwrap();
    assert_eq!(
        model_to_string(&model),
        model_to_string(&fixtures::humanoid())
    );
    for name in ["arm_swing_2s.clip", "standing_2s.clip"] {
        let text = std::fs::read_to_string(fixture(name)).unwrap();
        let clip = load_clip(fixture(name), &model).unwrap();
        assert_eq!(clip_to_string(&clip, &model), text, "{name}");
    }
}

#[test]
fn model_with_future_format_version_is_refused() {
    let text = std::fs::read_to_string(fixture("planar_arm.json")).unwrap();
    let bumped = text.replacen("\"format_version\": 1", "\"format_version\": 2", 1);
    assert_ne!(bumped, text);
    let err = parse_model(&bumped, Path::new("planar_arm.json")).unwrap_err();
    assert!(
        matches!(err, Error::SchemaVersion { found: 2, .. }),
        "{err}"
    );
}

fn write(dir: &Path, seed: u64) -> compliant_motion::dataset::DatasetManifest {
    let model = fixtures::humanoid();
    let clip = load_clip(fixture("arm_swing_2s.clip"), &model).unwrap();
    let cfg = AugmentConfig {
        seed,
        binary: true,
        ..AugmentConfig::default()
    };
    let aug = augment_clip(&model, &clip, &cfg).unwrap();
    let source = DatasetSource {
        model_name: model.name().into(),
        model_sha256: sha256_hex(b"model"),
        clip: "arm_swing_2s.clip".into(),
        clip_sha256: sha256_hex(b"clip"),
        joint_names: model.movable_joint_names(),
        feet: clip.feet.clone(),
    };
    write_dataset(dir, &source, &aug, &cfg).unwrap()
}

#[test]
fn dataset_files_agree_and_reload() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write(tmp.path(), 21);
    assert_eq!(read_manifest(tmp.path()).unwrap(), manifest);
    let (_, frames) = load_dataset(tmp.path()).unwrap();
    assert_eq!(frames.len(), manifest.frame_count);
    assert_eq!(
        read_frames_bin(tmp.path().join(FRAMES_BIN)).unwrap(),
        frames
    );
    let csv = std::fs::read_to_string(tmp.path().join(EVENTS_CSV)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(EVENTS_CSV_HEADER));
    assert_eq!(lines.count(), manifest.event_count);
    for (k, f) in frames.iter().enumerate() {
        assert_eq!(f.index, k);
    }
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let manifest = write(a.path(), 5);
    write(b.path(), 5);
    for file in manifest
        .files
        .iter()
        .map(String::as_str)
        .chain([MANIFEST_FILE])
    {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert!(x == y, "{file} differs");
    }
}

#[test]
fn unknown_dataset_schema_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), 1);
    let path = tmp.path().join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(
        &path,
        text.replacen("\"schema_version\": 1", "\"schema_version\": 7", 1),
    )
    .unwrap();
    let err = load_dataset(tmp.path()).unwrap_err();
    assert!(
        matches!(
            err,
            Error::SchemaVersion {
                expected: 1,
                found: 7,
                ..
            }
        ),
        "{err}"
    );
}
