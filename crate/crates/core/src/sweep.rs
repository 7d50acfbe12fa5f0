//! Resumable parallel sweeps of paired chaos experiments over
//! `(ω, κ, μ)`.
//!
//! Results live in a line-delimited JSON store, one self-contained record
//! per line. A run skips every job whose key and fingerprint are already in
//! the store, so an interrupted sweep resumes where it stopped. Workers pull
//! jobs from a shared counter and send finished records to a single writer.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chaos::{pair_simulate, ChaosResult, OperatingPoint, Scenario};
use crate::error::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Invalid(#[from] Error),

    #[error("sweep store {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("sweep store {path} is corrupt at line {line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(
        "store {path} already holds (omega={omega}, kappa={kappa}, mu={mu}) from a different configuration; use a new store path"
    )]
    Conflict {
        path: PathBuf,
        omega: f64,
        kappa: f64,
        mu: f64,
    },
}

/// Grids, gains and the base scenario of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub omega_grid: Vec<f64>,
    pub kappa_grid: Vec<f64>,
    pub gains: Vec<f64>,
    pub scenario: Scenario,
    pub parallelism: usize,
}

/// `count` evenly spaced points on `[a, b]`, endpoints included.
pub fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..count)
            .map(|i| {
                if i == count - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}

pub fn default_omega_grid() -> Vec<f64> {
    linspace(0.0, 2.0, 21)
}

pub fn default_kappa_grid() -> Vec<f64> {
    linspace(0.5, 1.0, 15)
}

/// Validates grids and returns the plan.
pub fn plan_sweep(
    omega_grid: Vec<f64>,
    kappa_grid: Vec<f64>,
    gains: Vec<f64>,
    scenario: Scenario,
    parallelism: usize,
) -> Result<SweepPlan, Error> {
    for (name, grid) in [("omega", &omega_grid), ("kappa", &kappa_grid), ("gain", &gains)] {
        if grid.is_empty() {
            return Err(Error::InvalidArgument(format!("{name} grid is empty")));
        }
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} grid has non-finite values")));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!("{name} grid must be strictly increasing")));
        }
    }
    if omega_grid[0] < 0.0 {
        return Err(Error::InvalidArgument("omega must be >= 0".into()));
    }
    if kappa_grid[0] < 0.0 || *kappa_grid.last().unwrap() > 1.0 {
        return Err(Error::InvalidArgument("kappa must lie in [0, 1]".into()));
    }
    if gains[0] < 0.0 {
        return Err(Error::InvalidArgument("gains must be >= 0".into()));
    }
    if parallelism == 0 {
        return Err(Error::InvalidArgument("parallelism must be >= 1".into()));
    }
    scenario.validate()?;
    Ok(SweepPlan {
        omega_grid,
        kappa_grid,
        gains,
        scenario,
        parallelism,
    })
}

impl SweepPlan {
    /// Jobs in ω-major, then κ, then μ order.
    pub fn jobs(&self) -> Vec<OperatingPoint> {
        let mut out = Vec::with_capacity(self.len());
        for &w in &self.omega_grid {
            for &k in &self.kappa_grid {
                for &m in &self.gains {
                    out.push(OperatingPoint::new(w, k, m));
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.omega_grid.len() * self.kappa_grid.len() * self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Done,
    Failed,
    Skipped,
}

/// One line of the sweep store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub omega_cyc_per_hr: f64,
    pub kappa: f64,
    pub mu: f64,
    pub status: JobStatus,
    #[serde(rename = "C_rho1")]
    pub c_rho1: Option<f64>,
    #[serde(rename = "C_rho2")]
    pub c_rho2: Option<f64>,
    #[serde(rename = "C_p")]
    pub c_p: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub chaotic: Option<bool>,
    pub wall_time_s: f64,
    pub fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SweepRecord {
    pub fn point(&self) -> OperatingPoint {
        OperatingPoint::new(self.omega_cyc_per_hr, self.kappa, self.mu)
    }

    pub fn key(&self) -> JobKey {
        JobKey::from(self.point())
    }

    pub fn result(&self) -> Option<ChaosResult> {
        Some(ChaosResult {
            c_rho1: self.c_rho1?,
            c_rho2: self.c_rho2?,
            c_p: self.c_p?,
            c: self.c?,
            chaotic: self.chaotic?,
        })
    }

    /// Same record with the timing field cleared, for content comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time_s: 0.0,
            ..self.clone()
        }
    }
}

/// Exact bit-level key of a job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JobKey([u64; 3]);

impl From<OperatingPoint> for JobKey {
    fn from(p: OperatingPoint) -> Self {
        Self([p.omega_cyc_per_hr.to_bits(), p.kappa.to_bits(), p.mu.to_bits()])
    }
}

/// Content hash of every input of a job.
pub fn fingerprint(scenario: &Scenario, point: OperatingPoint) -> String {
    let effective = scenario.at(point);
    let json = serde_json::to_string(&effective).expect("scenario serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// Runs one job. `ω = 0` means constant forcing and is recorded as skipped
/// and non-chaotic without simulating.
pub fn execute_job(scenario: &Scenario, point: OperatingPoint) -> SweepRecord {
    let start = Instant::now();
    let fp = fingerprint(scenario, point);
    let mut rec = SweepRecord {
        omega_cyc_per_hr: point.omega_cyc_per_hr,
        kappa: point.kappa,
        mu: point.mu,
        status: JobStatus::Skipped,
        c_rho1: None,
        c_rho2: None,
        c_p: None,
        c: None,
        chaotic: Some(false),
        wall_time_s: 0.0,
        fingerprint: fp,
        error: None,
    };
    if point.omega_cyc_per_hr == 0.0 {
        return rec;
    }
    match pair_simulate(point, scenario) {
        Ok(r) => {
            rec.status = JobStatus::Done;
            rec.c_rho1 = Some(r.c_rho1);
            rec.c_rho2 = Some(r.c_rho2);
            rec.c_p = Some(r.c_p);
            rec.c = Some(r.c);
            rec.chaotic = Some(r.chaotic);
        }
        Err(e) => {
            rec.status = JobStatus::Failed;
            rec.chaotic = None;
            rec.error = Some(e.to_string());
        }
    }
    rec.wall_time_s = start.elapsed().as_secs_f64();
    rec
}

/// Records of a store keyed by job.
#[derive(Debug, Clone, Default)]
pub struct StoreContents {
    pub records: Vec<SweepRecord>,
    index: HashMap<JobKey, usize>,
    /// Byte length of the complete lines; a torn trailing line starts here.
    valid_len: u64,
}

impl StoreContents {
    pub fn get(&self, key: JobKey) -> Option<&SweepRecord> {
        self.index.get(&key).map(|&i| &self.records[i])
    }
}

/// Reads a store. A missing file is an empty store; an unterminated final
/// line that does not parse is treated as a torn write and ignored.
pub fn load_store(path: &Path) -> Result<StoreContents, SweepError> {
    let io = |source| SweepError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(StoreContents::default()),
        Err(e) => return Err(io(e)),
    };
    let mut reader = BufReader::new(file);
    let mut contents = StoreContents::default();
    let mut line = String::new();
    let mut line_no = 0;
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(io)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let terminated = line.ends_with('\n');
        let text = line.trim();
        if text.is_empty() {
            if terminated {
                contents.valid_len += n as u64;
            }
            continue;
        }
        match serde_json::from_str::<SweepRecord>(text) {
            Ok(rec) => {
                let key = rec.key();
                if contents.index.contains_key(&key) {
                    return Err(SweepError::Corrupt {
                        path: path.to_path_buf(),
                        line: line_no,
                        message: "duplicate job key".into(),
                    });
                }
                contents.index.insert(key, contents.records.len());
                contents.records.push(rec);
                if terminated {
                    contents.valid_len += n as u64;
                } else {
                    // complete record missing only its newline
                    contents.valid_len += n as u64;
                }
            }
            Err(_) if !terminated => {
                log::warn!("ignoring torn final line {line_no} of {}", path.display());
            }
            Err(e) => {
                return Err(SweepError::Corrupt {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(contents)
}

/// Reads every record of a store.
pub fn read_store(path: &Path) -> Result<Vec<SweepRecord>, SweepError> {
    load_store(path).map(|c| c.records)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    /// Stop after writing this many new records.
    pub max_new_jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SweepSummary {
    pub total_jobs: usize,
    /// Jobs already present in the store before this run.
    pub already_present: usize,
    /// Records written by this run.
    pub new_records: usize,
    /// Paired simulations performed by this run.
    pub simulated: usize,
    /// Status counts over every plan job present in the store after the run.
    pub done: usize,
    pub failed: usize,
    pub skipped: usize,
    pub wall_time_s: f64,
}

impl std::fmt::Display for SweepSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "jobs {} | already in store {} | new records {} | simulated {} | done {} | failed {} | skipped {} | wall time {:.1} s",
            self.total_jobs,
            self.already_present,
            self.new_records,
            self.simulated,
            self.done,
            self.failed,
            self.skipped,
            self.wall_time_s
        )
    }
}

pub fn run_sweep(plan: &SweepPlan, store_path: &Path) -> Result<SweepSummary, SweepError> {
    run_sweep_with(plan, store_path, RunOptions::default())
}

/// Executes every job of `plan` missing from the store at `store_path`.
pub fn run_sweep_with(
    plan: &SweepPlan,
    store_path: &Path,
    opts: RunOptions,
) -> Result<SweepSummary, SweepError> {
    let start = Instant::now();
    plan.scenario.validate()?;
    let io = |source| SweepError::Io {
        path: store_path.to_path_buf(),
        source,
    };
    let existing = load_store(store_path)?;

    let mut summary = SweepSummary {
        total_jobs: plan.len(),
        ..SweepSummary::default()
    };
    let mut pending = Vec::new();
    let mut statuses: Vec<JobStatus> = Vec::new();
    for point in plan.jobs() {
        let fp = fingerprint(&plan.scenario, point);
        match existing.get(JobKey::from(point)) {
            Some(rec) if rec.fingerprint == fp => {
                summary.already_present += 1;
                statuses.push(rec.status);
            }
            Some(_) => {
                return Err(SweepError::Conflict {
                    path: store_path.to_path_buf(),
                    omega: point.omega_cyc_per_hr,
                    kappa: point.kappa,
                    mu: point.mu,
                })
            }
            None => pending.push(point),
        }
    }
    if let Some(limit) = opts.max_new_jobs {
        pending.truncate(limit);
    }

    let mut file = OpenOptions::new()
        .create(true)
        .read(true)
        .append(true)
        .open(store_path)
        .map_err(io)?;
    // drop a torn trailing line before appending
    let len = file.metadata().map_err(io)?.len();
    if len > existing.valid_len {
        file.set_len(existing.valid_len).map_err(io)?;
    }
    if existing.valid_len > 0 {
        let mut last = [0u8; 1];
        file.seek(SeekFrom::Start(existing.valid_len - 1)).map_err(io)?;
        file.read_exact(&mut last).map_err(io)?;
        if last[0] != b'\n' {
            file.write_all(b"\n").map_err(io)?;
        }
    }

    let workers = plan.parallelism.min(pending.len()).max(1);
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<SweepRecord>();
    let scenario = plan.scenario;
    let pending_ref = &pending;

    let write_result: Result<(), SweepError> = std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&point) = pending_ref.get(i) else {
                    break;
                };
                let rec = execute_job(&scenario, point);
                if tx.send(rec).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        for rec in rx {
            let mut line = serde_json::to_string(&rec).expect("record serializes");
            line.push('\n');
            if let Err(e) = file.write_all(line.as_bytes()).and_then(|_| file.flush()) {
                // stop handing out work; workers exit once the queue drains
                next.store(usize::MAX / 2, Ordering::SeqCst);
                return Err(io(e));
            }
            log::info!(
                "omega={} kappa={} mu={} -> {:?} C={:?}",
                rec.omega_cyc_per_hr,
                rec.kappa,
                rec.mu,
                rec.status,
                rec.c
            );
            summary.new_records += 1;
            if rec.status != JobStatus::Skipped {
                summary.simulated += 1;
            }
            statuses.push(rec.status);
        }
        Ok(())
    });
    write_result?;
    file.sync_all().map_err(io)?;

    for s in statuses {
        match s {
            JobStatus::Done => summary.done += 1,
            JobStatus::Failed => summary.failed += 1,
            JobStatus::Skipped => summary.skipped += 1,
        }
    }
    summary.wall_time_s = start.elapsed().as_secs_f64();
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn job_counts_and_order() {
        let sc = Scenario::default();
        let p = plan_sweep(default_omega_grid(), default_kappa_grid(), vec![0.0, 0.0025, 0.006], sc, 1)
            .unwrap();
        assert_eq!(p.jobs().len(), 945);
        let p = plan_sweep(vec![1.0], vec![0.9], vec![0.0], sc, 1).unwrap();
        assert_eq!(p.jobs().len(), 1);
        let p = plan_sweep(linspace(0.0, 2.0, 7), linspace(0.5, 1.0, 5), vec![0.0, 0.006], sc, 1).unwrap();
        let jobs = p.jobs();
        assert_eq!(jobs.len(), 70);
        assert_eq!(jobs[0], OperatingPoint::new(0.0, 0.5, 0.0));
        assert_eq!(jobs[1], OperatingPoint::new(0.0, 0.5, 0.006));
        assert_eq!(jobs[2], OperatingPoint::new(0.0, 0.625, 0.0));
        assert_eq!(jobs[10], OperatingPoint::new(2.0 / 6.0, 0.5, 0.0));
    }

    #[test]
    fn invalid_grids_are_rejected() {
        let sc = Scenario::default();
        assert!(plan_sweep(vec![], vec![0.5], vec![0.0], sc, 1).is_err());
        assert!(plan_sweep(vec![1.0, 0.5], vec![0.5], vec![0.0], sc, 1).is_err());
        assert!(plan_sweep(vec![1.0], vec![0.5, 1.5], vec![0.0], sc, 1).is_err());
        assert!(plan_sweep(vec![1.0], vec![0.5], vec![0.0], sc, 0).is_err());
    }

    #[test]
    fn default_grids() {
        let w = default_omega_grid();
        assert_eq!(w.len(), 21);
        assert_eq!(w[0], 0.0);
        assert_eq!(w[20], 2.0);
        assert!((w[5] - 0.5).abs() < 1e-15);
        let k = default_kappa_grid();
        assert_eq!(k.len(), 15);
        assert_eq!((k[0], k[14]), (0.5, 1.0));
    }

    #[test]
    fn fingerprint_tracks_every_input() {
        let sc = Scenario::default();
        let p = OperatingPoint::new(0.5, 0.85, 0.0);
        let base = fingerprint(&sc, p);
        assert_eq!(base, fingerprint(&sc, p));
        let mut other = sc;
        other.integrator.rel_tol *= 0.5;
        assert_ne!(base, fingerprint(&other, p));
        let mut other = sc;
        other.pipe.friction = 0.012;
        assert_ne!(base, fingerprint(&other, p));
        assert_ne!(base, fingerprint(&sc, OperatingPoint::new(0.5, 0.85, 0.006)));
    }

    #[test]
    fn zero_frequency_is_skipped_without_simulation() {
        let rec = execute_job(&Scenario::default(), OperatingPoint::new(0.0, 0.9, 0.0));
        assert_eq!(rec.status, JobStatus::Skipped);
        assert_eq!(rec.chaotic, Some(false));
        assert_eq!(rec.c, None);
    }

    fn record_line(omega: f64) -> String {
        let rec = execute_job(&Scenario::default(), OperatingPoint::new(omega, 0.9, 0.0));
        serde_json::to_string(&rec).unwrap()
    }

    #[test]
    fn corrupt_line_is_reported_with_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        std::fs::write(&path, format!("{}\nnot json\n", record_line(0.0))).unwrap();
        match load_store(&path) {
            Err(SweepError::Corrupt { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn torn_final_line_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        std::fs::write(&path, format!("{}\n{{\"omega_cyc", record_line(0.0))).unwrap();
        let c = load_store(&path).unwrap();
        assert_eq!(c.records.len(), 1);
    }

    #[test]
    fn record_round_trips_through_json() {
        let rec = SweepRecord {
            omega_cyc_per_hr: 0.1 + 0.2,
            kappa: 0.85,
            mu: 0.0025,
            status: JobStatus::Done,
            c_rho1: Some(-1.234567890123456),
            c_rho2: Some(0.1),
            c_p: Some(1e-300),
            c: Some(1e-300),
            chaotic: Some(false),
            wall_time_s: 1.5,
            fingerprint: "ab".into(),
            error: None,
        };
        let line = serde_json::to_string(&rec).unwrap();
        assert!(line.contains("\"C_rho1\""));
        assert!(line.contains("\"status\":\"done\""));
        let back: SweepRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, rec);
    }
}
