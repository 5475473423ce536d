use std::path::Path;
use std::process::{Command, Output};

use lancelot::report::parse_csv;
use lancelot_core::ckks::{Ciphertext, Params, ParamSpec};

fn lancelot(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lancelot"))
        .args(args)
        .current_dir(cwd)
        .env("LANCELOT_THREADS", "1")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn bad_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["experiment", "--rule", "trimmed-mean"][..], &["ablate", "--toggle", "karatsuba"], &["--frobnicate"]] {
        assert_eq!(lancelot(args, dir.path()).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn invalid_multi_krum_selection_fails_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = lancelot(&["experiment", "--rule", "multi-krum", "--clients", "10", "--byzantine", "1", "--l", "6"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error"));
}

#[test]
fn lazy_relin_ablation_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = lancelot(
        &["ablate", "--toggle", "lazy-relin", "--clients", "10", "--rule", "krum", "--repetitions", "1", "--report", "r.csv"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = parse_csv(&std::fs::read(dir.path().join("r.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].chunks, 16);
    assert_eq!(rows[0].relinearizations, 16 * 45);
    assert_eq!(rows[1].relinearizations, 45);
    let speedup = rows[1].speedup.unwrap();
    let ratio = rows[0].time_total.unwrap() / rows[1].time_total.unwrap();
    assert!((speedup - ratio).abs() <= 1e-12 * ratio);
}

#[test]
fn experiment_writes_report_transcript_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let o = lancelot(
        &[
            "experiment", "--clients", "5", "--rounds", "2", "--hoisting", "full", "--twin", "--report", "r.jsonl",
            "--transcript", "t.jsonl", "--dump-ciphertexts", "dump",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(dir.path().join("r.jsonl")).unwrap();
    assert_eq!(report.lines().count(), 1);
    let row: serde_json::Value = serde_json::from_str(report.trim()).unwrap();
    // 42 parameters reduce over width 64
    assert_eq!(row["unfold"], 7);
    assert_eq!(row["ciphertexts"], 5);
    assert!(row["divergence"].as_f64().unwrap() < 1e-3);
    let transcript = std::fs::read_to_string(dir.path().join("t.jsonl")).unwrap();
    assert_eq!(transcript.lines().count(), 2);

    let params = Params::new(ParamSpec::default()).unwrap();
    let mut names: Vec<String> = std::fs::read_dir(dir.path().join("dump"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.iter().filter(|n| n.contains("upload")).count(), 5);
    assert!(names.iter().any(|n| n.contains("mask")));
    for n in &names {
        let bytes = std::fs::read(dir.path().join("dump").join(n)).unwrap();
        assert_eq!(&bytes[..4], b"LCLT");
        Ciphertext::from_bytes(&bytes, params.basis()).unwrap();
    }
}

#[test]
fn calibration_feeds_dynamic_hoisting() {
    let dir = tempfile::tempdir().unwrap();
    let o = lancelot(&["calibrate", "--runs", "3", "--params", "20", "--calibration", "cal.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("k = "));
    let cached = std::fs::read_to_string(dir.path().join("cal.json")).unwrap();
    let o = lancelot(
        &["experiment", "--clients", "5", "--rounds", "1", "--hoisting", "dynamic", "--calibration", "cal.json", "--format", "jsonl"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    // the cached entry was reused, not re-measured
    assert_eq!(std::fs::read_to_string(dir.path().join("cal.json")).unwrap(), cached);
    let row: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(row["unfold"].as_u64().is_some());
}

#[test]
fn selftest_reports_each_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let o = lancelot(&["selftest", "--only", "7"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("criterion 7 packing-structure"));
    assert!(out.contains("PASS"));
    let o = lancelot(&["selftest", "--only", "9"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}
