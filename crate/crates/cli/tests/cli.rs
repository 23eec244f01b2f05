use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn cmaug(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmaug"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bounds_prints_integer_range() {
    let out = cmaug(&[
        "bounds",
        "--force-noise",
        "4",
        "--pos-noise",
        "0.01",
        "--force-acc",
        "10",
        "--pos-acc",
        "0.10",
    ]);
    assert!(out.status.success());
    assert_eq!(text(&out.stdout), "k_min=40 k_max=1000\n");
    assert!(out.stderr.is_empty());
}

#[test]
fn crossed_budget_exits_with_runtime_error() {
    let out = cmaug(&[
        "bounds",
        "--force-noise",
        "4",
        "--pos-noise",
        "0.1",
        "--force-acc",
        "1",
        "--pos-acc",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("infeasible"));
    assert!(out.stdout.is_empty());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(
        cmaug(&["bounds", "--force-noise", "4"]).status.code(),
        Some(2)
    );
    assert_eq!(cmaug(&["no-such-command"]).status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let out = cmaug(&[
        "gen-data",
        "--model",
        path(&fixture("humanoid.json")),
        "--clip",
        "missing.clip",
        "--out",
        path(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = text(&out.stderr);
    assert!(
        err.contains("--clip") && err.contains("missing.clip"),
        "{err}"
    );
}

#[test]
fn validate_reports_limit_violations() {
    let model = fixture("humanoid.json");
    let ok = cmaug(&[
        "validate",
        "--model",
        path(&model),
        "--clip",
        path(&fixture("standing_2s.clip")),
    ]);
    assert!(ok.status.success(), "{}", text(&ok.stderr));

    let tmp = tempfile::tempdir().unwrap();
    let original = std::fs::read_to_string(fixture("standing_2s.clip")).unwrap();
    // Push the first joint of one frame far outside its limits.
    let mut lines: Vec<String> = original.lines().map(String::from).collect();
    // The first data row follows the separator and the column header.
    let row = lines.iter().position(|l| l == "---").unwrap() + 2;
    let mut cells: Vec<String> = lines[row].split(',').map(String::from).collect();
    // Seven base columns precede the joints.
    cells[7] = "9.0".into();
    lines[row] = cells.join(",");
    let bad = tmp.path().join("bad.clip");
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let out = cmaug(&["validate", "--model", path(&model), "--clip", path(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains("left_hip_pitch_joint"), "{err}");
}

fn gen(out: &Path, jobs: &str) -> Output {
    cmaug(&[
        "gen-data",
        "--model",
        path(&fixture("humanoid.json")),
        "--clip",
        path(&fixture("arm_swing_2s.clip")),
        "--clip",
        path(&fixture("standing_2s.clip")),
        "--seed",
        "7",
        "--binary",
        "--jobs",
        jobs,
        "--out",
        path(out),
    ])
}

fn dataset_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for clip in ["arm_swing_2s", "standing_2s"] {
        for file in ["manifest.json", "frames.jsonl", "frames.bin", "events.csv"] {
            let p = root.join(clip).join(file);
            out.push((
                format!("{clip}/{file}"),
                std::fs::read(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display())),
            ));
        }
    }
    out
}

#[test]
fn gen_data_is_reproducible_across_job_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = gen(a.path(), "1");
    assert!(ra.status.success(), "{}", text(&ra.stderr));
    let rb = gen(b.path(), "2");
    assert!(rb.status.success(), "{}", text(&rb.stderr));
    assert_eq!(dataset_bytes(a.path()), dataset_bytes(b.path()));
    let run: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.path().join("run_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(run["seed"], 7);
    assert_eq!(run["clips"].as_array().unwrap().len(), 2);
    assert_eq!(run["clips"][0]["output"], "arm_swing_2s");
}

#[test]
fn analysis_commands_read_generated_data() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(gen(tmp.path(), "1").status.success());
    let curve = cmaug(&[
        "analyze-stiffness",
        "--dataset",
        path(tmp.path()),
        "--bins",
        "40,200,1000",
    ]);
    assert!(curve.status.success(), "{}", text(&curve.stderr));
    let csv = text(&curve.stdout);
    assert!(csv.starts_with("commanded_stiffness,median_effective_stiffness,sample_count\n"));

    let metrics = cmaug(&[
        "metrics",
        "--model",
        path(&fixture("humanoid.json")),
        "--traj-a",
        path(&fixture("standing_2s.clip")),
        "--traj-b",
        path(&fixture("standing_2s.clip")),
    ]);
    assert!(metrics.status.success());
    let csv = text(&metrics.stdout);
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(
        &row[..],
        &["0.000000", "0.000000", "0.000000", "0.000000", "100"]
    );

    let bad_bins = cmaug(&[
        "analyze-stiffness",
        "--dataset",
        path(tmp.path()),
        "--bins",
        "10,5",
    ]);
    assert_eq!(bad_bins.status.code(), Some(2));
}

#[test]
fn obs_layout_is_json() {
    let out = cmaug(&["obs-layout", "--model", path(&fixture("humanoid.json"))]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(
        v["total_width"],
        3 * (2 * 29 + 6) + 24 * (29 + 12) + 6 + 3 * 29
    );
}
