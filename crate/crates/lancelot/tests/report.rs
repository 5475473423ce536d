use std::path::PathBuf;

use lancelot::ablate::{run_ablation, AblationSpec, Toggle};
use lancelot::calibrate::Calibration;
use lancelot::config::HoistingMode;
use lancelot::report::{parse_csv, render, Format};
use lancelot::Error;
use lancelot_core::ckks::ParamSpec;
use lancelot_core::distance::{pairs, plan_unfold};
use lancelot_core::exec::Sequential;
use lancelot_core::fl::NoClock;

fn no_calibration(_: &ParamSpec) -> lancelot::Result<Calibration> {
    Err(Error::Config("no calibration expected".into()))
}

fn small_lazy_spec() -> AblationSpec {
    let mut spec = AblationSpec::new(Toggle::LazyRelin);
    spec.clients = 5;
    spec.params = 5000;
    spec.repetitions = 2;
    spec.seed = 17;
    spec
}

/// Compares against the checked-in file; `LANCELOT_BLESS=1` rewrites it.
fn check_golden(name: &str, bytes: &[u8]) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("LANCELOT_BLESS").is_some() || !path.exists() {
        std::fs::write(&path, bytes).unwrap();
    }
    let want = std::fs::read(&path).unwrap();
    assert!(want == bytes, "{name} differs from the golden file");
}

#[test]
fn lazy_relin_ablation_matches_golden() {
    let spec = small_lazy_spec();
    let rows = run_ablation(&spec, &mut no_calibration, &Sequential, &NoClock).unwrap();
    // 2 chunks, 10 pairs
    let pairs = pairs(5).len() as u64;
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].relinearizations, 2 * pairs);
    assert_eq!(rows[1].relinearizations, pairs);
    assert!(rows.iter().all(|r| r.chunks == 2 && r.ciphertexts == 10));
    assert!(rows.iter().all(|r| r.divergence.unwrap() < 1e-6));
    let csv = render(&rows, Format::Csv).unwrap();
    assert_eq!(parse_csv(&csv).unwrap(), rows);
    check_golden("ablation_lazy_relin.csv", &csv);
    check_golden("ablation_lazy_relin.jsonl", &render(&rows, Format::Jsonl).unwrap());
}

#[test]
fn rows_are_reproducible() {
    let spec = small_lazy_spec();
    let a = run_ablation(&spec, &mut no_calibration, &Sequential, &NoClock).unwrap();
    let b = run_ablation(&spec, &mut no_calibration, &Sequential, &NoClock).unwrap();
    assert_eq!(a, b);
}

#[test]
fn dynamic_row_uses_the_planner_choice() {
    let mut spec = AblationSpec::new(Toggle::Hoisting);
    spec.clients = 5;
    spec.params = 64;
    spec.repetitions = 1;
    // decomposition cheaper than a hoisted step: unfold as far as memory allows
    spec.memory_budget = 3 * 1000;
    let cal = Calibration { params: spec.base, runs: 1, t_hoist: 2e-3, t_decompose: 1e-3, m_cipher: 1000 };
    let mut calls = 0;
    let mut calibrate = |p: &ParamSpec| {
        calls += 1;
        assert_eq!(*p, spec.base);
        Ok(cal)
    };
    let rows = run_ablation(&spec, &mut calibrate, &Sequential, &NoClock).unwrap();
    let want = plan_unfold(cal.t_hoist, cal.t_decompose, cal.m_cipher, spec.memory_budget, 64).unwrap().k;
    assert_eq!(want, 3);
    let labels: Vec<&str> = rows.iter().map(|r| r.variant.as_str()).collect();
    assert_eq!(labels, ["hoisting=off", "hoisting=full", "hoisting=dynamic"]);
    assert_eq!(rows.iter().map(|r| r.unfold).collect::<Vec<_>>(), [Some(1), Some(7), Some(want)]);
    // relinearizations raise too; beyond those, one slot sum per pair costs a
    // raise per level outside the hoisted batch, plus the batch
    let rotation_modups: Vec<u64> = rows.iter().map(|r| r.modups - r.relinearizations).collect();
    assert_eq!(rotation_modups, [10 * 6, 10, 10 * (1 + 6 - (want as u64 - 1))]);
    assert!(rows.iter().all(|r| r.relinearizations == 10));
    assert_eq!(calls, 1);
    assert!(rows.iter().all(|r| r.divergence.unwrap() < 1e-6));
}

#[test]
fn kgc_side_sums_skip_rotations() {
    let mut spec = small_lazy_spec();
    spec.slot_sum_at_kgc = true;
    spec.hoisting = HoistingMode::Full;
    let rows = run_ablation(&spec, &mut no_calibration, &Sequential, &NoClock).unwrap();
    assert!(rows.iter().all(|r| r.rotations == 0 && r.modups == r.relinearizations && r.unfold.is_none()));
    assert!(rows[0].fingerprint.contains("hoisting=kgc"));
}
