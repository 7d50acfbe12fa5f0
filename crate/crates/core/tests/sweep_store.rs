use std::collections::BTreeMap;
use std::fs;

use blendchaos::chaos::Scenario;
use blendchaos::sweep::{
    linspace, load_store, plan_sweep, read_store, run_sweep, run_sweep_with, JobKey, JobStatus,
    RunOptions, SweepError, SweepPlan, SweepRecord,
};

fn short_scenario() -> Scenario {
    Scenario {
        horizon_s: 10.0 * 3600.0,
        samples: 1000,
        ..Scenario::default()
    }
}

fn plan(omegas: Vec<f64>, kappas: Vec<f64>, gains: Vec<f64>, workers: usize) -> SweepPlan {
    plan_sweep(omegas, kappas, gains, short_scenario(), workers).unwrap()
}

fn small_plan(workers: usize) -> SweepPlan {
    plan(vec![0.5, 1.0, 1.5], vec![0.6, 0.8, 1.0], vec![0.0], workers)
}

fn by_key(records: Vec<SweepRecord>) -> BTreeMap<JobKey, SweepRecord> {
    records.into_iter().map(|r| (r.key(), r.without_timing())).collect()
}

#[test]
fn parallelism_does_not_change_records() {
    let dir = tempfile::tempdir().unwrap();
    let (one, four) = (dir.path().join("one.jsonl"), dir.path().join("four.jsonl"));
    let s1 = run_sweep(&small_plan(1), &one).unwrap();
    let s4 = run_sweep(&small_plan(4), &four).unwrap();
    assert_eq!((s1.new_records, s4.new_records), (9, 9));
    assert_eq!(by_key(read_store(&one).unwrap()), by_key(read_store(&four).unwrap()));
}

#[test]
fn completed_store_is_not_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    run_sweep(&small_plan(2), &path).unwrap();
    let again = run_sweep(&small_plan(2), &path).unwrap();
    assert_eq!(again.simulated, 0);
    assert_eq!(again.new_records, 0);
    assert_eq!(again.already_present, 9);
    assert_eq!(again.done + again.failed + again.skipped, 9);
}

#[test]
fn interrupted_sweep_resumes_with_remaining_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    let p = plan(linspace(0.0, 2.0, 7), linspace(0.5, 1.0, 5), vec![0.0, 0.006], 1);
    let first = run_sweep_with(&p, &path, RunOptions { max_new_jobs: Some(10) }).unwrap();
    assert_eq!(first.new_records, 10);
    let rest = run_sweep(&p, &path).unwrap();
    assert_eq!(rest.already_present, 10);
    assert_eq!(rest.new_records, 60);
    assert_eq!(rest.simulated, 60);
    let records = read_store(&path).unwrap();
    assert_eq!(records.len(), 70);
    let zero_freq = records.iter().filter(|r| r.omega_cyc_per_hr == 0.0).count();
    assert_eq!(zero_freq, 10);
    assert!(records
        .iter()
        .filter(|r| r.omega_cyc_per_hr == 0.0)
        .all(|r| r.status == JobStatus::Skipped && r.chaotic == Some(false)));
}

#[test]
fn torn_tail_is_dropped_and_job_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    run_sweep(&small_plan(1), &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let keep: Vec<&str> = text.lines().collect();
    let torn = format!("{}\n{}", keep[..8].join("\n"), &keep[8][..keep[8].len() / 2]);
    fs::write(&path, torn).unwrap();
    assert_eq!(load_store(&path).unwrap().records.len(), 8);

    let resumed = run_sweep(&small_plan(1), &path).unwrap();
    assert_eq!(resumed.new_records, 1);
    assert_eq!(read_store(&path).unwrap().len(), 9);
    assert!(fs::read_to_string(&path).unwrap().ends_with('\n'));
}

#[test]
fn corrupt_line_aborts_with_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    run_sweep(&small_plan(1), &path).unwrap();
    let mut lines: Vec<String> = fs::read_to_string(&path).unwrap().lines().map(String::from).collect();
    lines[3] = "{garbage".into();
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    match run_sweep(&small_plan(1), &path) {
        Err(SweepError::Corrupt { line, .. }) => assert_eq!(line, 4),
        other => panic!("expected corruption error, got {other:?}"),
    }
}

#[test]
fn changed_configuration_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    run_sweep(&small_plan(1), &path).unwrap();
    let mut p = small_plan(1);
    p.scenario.integrator.rel_tol = 1e-7;
    let err = run_sweep(&p, &path).unwrap_err();
    assert!(matches!(err, SweepError::Conflict { .. }));
    assert!(err.to_string().contains("new store path"));
}
