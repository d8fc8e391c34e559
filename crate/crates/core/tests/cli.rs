mod support;

use std::path::Path;
use std::process::Command;

use dyadsense::cli::run_cli;
use dyadsense::obslog::{write_annotations, RecordingAnnotation, StudyMetrics};
use dyadsense::session::RecordingKind;
use dyadsense::vad::wav::write_wav;
use dyadsense::vad::VadModel;
use support::fixture;

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["dyadsense"];
    full.extend_from_slice(args);
    let code = run_cli(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn row_value(text: &str, label: &str) -> String {
    let line = text
        .lines()
        .find(|l| l.trim_start().starts_with(label) && l[l.find(label).unwrap() + label.len()..].starts_with(' '))
        .unwrap_or_else(|| panic!("no row {label:?} in\n{text}"));
    line.split_whitespace().last().unwrap().to_string()
}

#[test]
fn metrics_match_the_fixture_tables() {
    let dir = tempfile::tempdir().unwrap();
    fixture::write_table_fixture(dir.path());
    let json = dir.path().join("m.json");
    let (code, out, err) = cli(&[
        "metrics",
        "--logs",
        p(&dir.path().join("logs")),
        "--annotations",
        p(&dir.path().join("annotations.csv")),
        "--json",
        p(&json),
    ]);
    assert_eq!(code, 0, "{err}");
    let m: StudyMetrics = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    let c = m.counts;
    assert_eq!(
        [c.total_expected, c.expected_app_running, c.sensor_collected, c.selfreport_triggered, c.selfreport_started, c.selfreport_completed],
        fixture::COLLECTION
    );
    for ((label, v), want) in m.collection.rows().iter().zip(fixture::COLLECTION_PCT) {
        assert_eq!(*v, Some(want), "{label}");
        assert_eq!(row_value(&out, label), format!("{want:.1}"));
    }
    for ((label, v), want) in m.conversation.rows().iter().zip(fixture::CONVERSATION_PCT) {
        assert_eq!(*v, Some(want), "{label}");
        assert_eq!(row_value(&out, label), format!("{want:.1}"));
    }
}

#[test]
fn no_triggered_recordings_prints_na() {
    let dir = tempfile::tempdir().unwrap();
    fixture::write_table_fixture(dir.path());
    let rows: Vec<RecordingAnnotation> = fixture::table_annotations()
        .into_iter()
        .filter(|a| a.kind == RecordingKind::Backup)
        .collect();
    write_annotations(&dir.path().join("annotations.csv"), &rows).unwrap();
    let (code, out, err) = cli(&[
        "metrics",
        "--logs",
        p(&dir.path().join("logs")),
        "--annotations",
        p(&dir.path().join("annotations.csv")),
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(row_value(&out, "Triggered recordings with conversation"), "n/a");
    assert_eq!(row_value(&out, "Backup recordings with conversation"), "43.8");
}

#[test]
fn empty_log_tree_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("logs")).unwrap();
    write_annotations(&dir.path().join("a.csv"), &fixture::table_annotations()).unwrap();
    let (code, _, err) = cli(&["metrics", "--logs", p(&dir.path().join("logs")), "--annotations", p(&dir.path().join("a.csv"))]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error:"), "{err}");
}

#[test]
fn out_of_range_probability_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[compliance]\nstart = 1.3\n").unwrap();
    let (code, _, err) = cli(&["sim", "run", "--scenario", p(&path), "--out-dir", p(&dir.path().join("o"))]);
    assert_eq!(code, 1);
    assert!(err.contains("compliance.start"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_scenario_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "n_coupels = 3\n").unwrap();
    let (code, _, err) = cli(&["sim", "compare", "--scenario", p(&path)]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn silent_wav_is_classified_as_silence() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.txt");
    std::fs::write(&model, VadModel::constant(1.0).to_text()).unwrap();
    let wav = dir.path().join("s.wav");
    write_wav(&wav, &vec![0.0; 8000 * 3], 8000).unwrap();
    let (code, out, err) = cli(&["vad", "classify", "--model", p(&model), "--wav", p(&wav)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out, "0\tSilence\n1\tSilence\n2\tSilence\n");
}

#[test]
fn single_class_eval_is_undefined() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = cli(&["vad", "gen-corpus", "--segments", "4", "--out-dir", p(dir.path())]);
    assert_eq!(code, 0, "{err}");
    std::fs::write(dir.path().join("labels.csv"), "second,label\n0,speech\n1,speech\n2,speech\n3,speech\n").unwrap();
    let model = dir.path().join("m.txt");
    std::fs::write(&model, VadModel::constant(1.0).to_text()).unwrap();
    let (code, _, err) = cli(&[
        "vad",
        "eval",
        "--model",
        p(&model),
        "--audio",
        p(&dir.path().join("corpus.wav")),
        "--labels",
        p(&dir.path().join("labels.csv")),
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("metric undefined"), "{err}");
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(cli(&["frobnicate"]).0, 2);
    assert_eq!(cli(&["sim", "run", "--mode", "psychic"]).0, 2);
    assert_eq!(cli(&["--help"]).0, 0);
}

#[test]
fn sim_run_needs_an_output_dir() {
    let (code, _, err) = cli(&["sim", "run"]);
    assert_eq!(code, 1);
    assert!(err.contains("--out-dir"));
}

#[test]
fn binary_writes_identical_outputs() {
    let bin = env!("CARGO_BIN_EXE_dyadsense");
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("s.toml");
    std::fs::write(&scen, "n_couples = 2\ndays = 2\n").unwrap();
    let mut seen = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(bin)
            .args(["sim", "run", "--scenario", p(&scen), "--out-dir", p(&out)])
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        seen.push(std::fs::read(out.join("report.json")).unwrap());
        seen.push(std::fs::read(out.join("annotations.csv")).unwrap());
    }
    assert_eq!(seen[0], seen[2]);
    assert_eq!(seen[1], seen[3]);
    let bad = Command::new(bin).arg("nope").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
