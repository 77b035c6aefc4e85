use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use pufguard_core::harness::{
    fixture, normal_operation, read_log, run_enrollment, run_scenario, write_log, HarnessError,
    PufContext, ScenarioConfig, FIXTURE_NAMES,
};
use pufguard_core::{plc, EnrollmentTable};

fn puf() -> Arc<PufContext> {
    static PUF: OnceLock<Arc<PufContext>> = OnceLock::new();
    PUF.get_or_init(|| Arc::new(PufContext::provision(&normal_operation().puf).unwrap()))
        .clone()
}

fn enrolled(cfg: &ScenarioConfig) -> EnrollmentTable {
    run_enrollment(cfg, puf()).unwrap().table
}

fn workspace_file(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

#[test]
fn default_enrollment_covers_every_window() {
    let out = run_enrollment(&normal_operation(), puf()).unwrap();
    assert_eq!(out.coverage, 1.0);
    assert!(out.table.len() >= 16);
    // a 32-sample window on a pure fill ramp spans 31 steps of 6/15
    let ramp = 6.0 * 31.0 / 15.0;
    let spread = out.table.max_temporal_diff;
    assert!(
        spread >= ramp - 0.3 && spread <= 6.0 * 32.0 / 15.0 + 1.2,
        "{spread}"
    );
    let codes: std::collections::BTreeSet<u8> = out.rows.iter().map(|r| r.code).collect();
    assert!(codes.iter().all(|c| [3, 7].contains(c)), "{codes:?}");
}

#[test]
fn enrollment_without_sweep_is_incomplete() {
    let mut cfg = fixture("spike3").unwrap();
    cfg.enrollment.sweep = false;
    cfg.enrollment.auto_ops_duration = 300.0;
    match run_enrollment(&cfg, puf()) {
        Err(HarnessError::IncompleteEnrollment { coverage }) => assert!(coverage < 1.0),
        other => panic!("expected IncompleteEnrollment, got {other:?}"),
    }
}

#[test]
fn runs_are_bytewise_deterministic() {
    let mut cfg = normal_operation();
    cfg.duration = 120.0;
    let table = enrolled(&cfg);
    let csv = |_: ()| {
        let out = run_scenario(&cfg, &table, puf()).unwrap();
        let mut buf = Vec::new();
        write_log(&out.rows, &mut buf).unwrap();
        buf
    };
    let a = csv(());
    assert_eq!(a, csv(()));
    assert_eq!(read_log(a.as_slice()).unwrap().len(), 1800);
    let mut other = cfg.clone();
    other.seed ^= 1;
    let out = run_scenario(&other, &table, puf()).unwrap();
    let mut b = Vec::new();
    write_log(&out.rows, &mut b).unwrap();
    assert_ne!(a, b);
}

#[test]
fn long_fault_free_run_has_no_temporal_alarm() {
    let mut cfg = normal_operation();
    cfg.duration = 100_000.0 / cfg.tick_hz;
    let table = enrolled(&cfg);
    let out = run_scenario(&cfg, &table, puf()).unwrap();
    assert_eq!(out.rows.len(), 100_000);
    assert_eq!(out.metrics.temporal_failures, 0);
    assert!(out.rows.iter().all(|r| r.temporal_ok()));
}

#[test]
fn spike_fixture_detects_every_event() {
    let cfg = fixture("spike3").unwrap();
    let out = run_scenario(&cfg, &enrolled(&cfg), puf()).unwrap();
    let m = &out.metrics;
    assert_eq!(m.events.len(), 3);
    assert_eq!(m.missed_events, 0);
    for e in &m.events {
        let before = &out.rows[(e.onset_tick - 2) as usize];
        assert_eq!(before.code, 3);
        let alert = &out.rows[(e.onset_tick - 1 + e.latency_ticks.unwrap()) as usize];
        assert_eq!(alert.code, 1);
    }
}

#[test]
fn shipped_scenarios_match_fixtures() {
    for name in FIXTURE_NAMES {
        let path = workspace_file(&format!("scenarios/{name}.json"));
        let shipped = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            shipped,
            fixture(name).unwrap().to_json_pretty() + "\n",
            "{name} drifted"
        );
        assert_eq!(
            ScenarioConfig::from_json_file(&path).unwrap(),
            fixture(name).unwrap()
        );
    }
}

#[test]
fn shipped_register_map_matches_code() {
    let shipped = std::fs::read_to_string(workspace_file("docs/register_map.json")).unwrap();
    let current = serde_json::to_string_pretty(&plc::register_map()).unwrap() + "\n";
    assert_eq!(shipped, current);
}
