use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use blendchaos::chaos::{simulate as run_simulation, Scenario};
use blendchaos::interface::{interface_extract, KappaStar};
use blendchaos::sweep::{
    execute_job, linspace, plan_sweep, read_store, run_sweep, JobStatus, SweepError,
};

use crate::config::RunConfig;
use crate::output::{self, parse_trajectory_csv, trajectory_csv, write_atomic};
use crate::svg::{self, Panel, Series};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_SIMULATION: u8 = 2;
pub const EXIT_PARTIAL_SWEEP: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn simulation(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_SIMULATION,
        message: message.into(),
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    usage(format!("cannot write {}: {e}", path.display()))
}

pub type CmdResult = Result<(), Failure>;

#[derive(Debug, Default)]
pub struct RunOverrides {
    pub config: Option<PathBuf>,
    pub omega: Option<f64>,
    pub kappa: Option<f64>,
    pub mu: Option<f64>,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => RunConfig::load(p).map_err(|e| usage(e.to_string())),
        None => Ok(RunConfig::default()),
    }
}

fn scenario(o: &RunOverrides) -> Result<Scenario, Failure> {
    let mut cfg = load_config(o.config.as_deref())?;
    if let Some(v) = o.omega {
        cfg.omega_cyc_per_hr = v;
    }
    if let Some(v) = o.kappa {
        cfg.kappa = v;
    }
    if let Some(v) = o.mu {
        cfg.mu_m2s_per_kg = v;
    }
    cfg.to_scenario().map_err(|e| usage(e.to_string()))
}

pub fn simulate(o: &RunOverrides, out: &Path) -> CmdResult {
    let sc = scenario(o)?;
    let traj = run_simulation(&sc).map_err(|e| simulation(e.to_string()))?;
    let rows = output::rows(&traj);
    write_atomic(out, trajectory_csv(&rows).as_bytes()).map_err(|e| io_failure(out, e))?;
    println!(
        "wrote {} samples to {} ({} steps, {} rejected)",
        rows.len(),
        out.display(),
        traj.stats.accepted,
        traj.stats.rejected
    );
    Ok(())
}

pub fn chaos(o: &RunOverrides) -> CmdResult {
    let sc = scenario(o)?;
    let rec = execute_job(&sc, sc.point());
    match rec.status {
        JobStatus::Failed => {
            println!("{}", serde_json::to_string(&rec).expect("record serializes"));
            Err(simulation(rec.error.unwrap_or_else(|| "pair simulation failed".into())))
        }
        JobStatus::Skipped => {
            println!("omega = 0: constant forcing, not chaotic (no simulation)");
            println!("chaotic = false");
            println!("{}", serde_json::to_string(&rec).expect("record serializes"));
            Ok(())
        }
        JobStatus::Done => {
            let r = rec.result().expect("done records carry a result");
            println!("C_rho1  = {}", r.c_rho1);
            println!("C_rho2  = {}", r.c_rho2);
            println!("C_p     = {}", r.c_p);
            println!("C       = {}", r.c);
            println!("chaotic = {}", r.chaotic);
            println!("{}", serde_json::to_string(&rec).expect("record serializes"));
            Ok(())
        }
    }
}

#[derive(Debug)]
pub struct SweepArgs {
    pub config: Option<PathBuf>,
    pub grid_omega: String,
    pub grid_kappa: String,
    pub gains: String,
    pub jobs: Option<usize>,
    pub store: PathBuf,
    pub resume: bool,
}

/// Parses `start:end:count` into an inclusive uniform grid.
pub fn parse_grid(spec: &str, flag: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || usage(format!("--{flag} expects start:end:count, got `{spec}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || (n > 1 && b <= a) || (n == 1 && a != b) {
        return Err(bad());
    }
    Ok(linspace(a, b, n))
}

pub fn parse_list(spec: &str, flag: &str) -> Result<Vec<f64>, Failure> {
    let mut v = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| usage(format!("--{flag} expects comma-separated numbers, got `{spec}`")))?;
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

pub fn sweep(a: &SweepArgs) -> CmdResult {
    let base = load_config(a.config.as_deref())?
        .to_scenario()
        .map_err(|e| usage(e.to_string()))?;
    let omegas = parse_grid(&a.grid_omega, "grid-omega")?;
    let kappas = parse_grid(&a.grid_kappa, "grid-kappa")?;
    let gains = parse_list(&a.gains, "gains")?;
    let workers = match a.jobs {
        Some(0) => return Err(usage("--jobs must be >= 1")),
        Some(k) => k,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let existing = std::fs::metadata(&a.store).map(|m| m.len() > 0).unwrap_or(false);
    if existing && !a.resume {
        return Err(usage(format!(
            "store {} already exists; pass --resume to continue it or choose a new path",
            a.store.display()
        )));
    }
    let plan = plan_sweep(omegas, kappas, gains, base, workers).map_err(|e| usage(e.to_string()))?;
    log::info!("sweep of {} jobs on {workers} workers into {}", plan.len(), a.store.display());
    let summary = run_sweep(&plan, &a.store).map_err(|e| match e {
        SweepError::Invalid(e) => usage(e.to_string()),
        other => usage(other.to_string()),
    })?;
    println!("{summary}");
    if summary.failed > 0 {
        return Err(Failure {
            code: EXIT_PARTIAL_SWEEP,
            message: format!("{} of {} jobs failed", summary.failed, summary.total_jobs),
        });
    }
    Ok(())
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

pub fn interface(store: &Path, threshold: f64, prefix: &str) -> CmdResult {
    if !threshold.is_finite() {
        return Err(usage("--threshold must be finite"));
    }
    if !store.exists() {
        return Err(usage(format!("store {} does not exist", store.display())));
    }
    let records = read_store(store).map_err(|e| usage(e.to_string()))?;
    if records.is_empty() {
        return Err(usage(format!("store {} holds no records", store.display())));
    }
    let omegas = sorted_unique(records.iter().map(|r| r.omega_cyc_per_hr).collect());
    let kappas = sorted_unique(records.iter().map(|r| r.kappa).collect());
    let gains = sorted_unique(records.iter().map(|r| r.mu).collect());

    let mut series = Vec::new();
    for (i, &mu) in gains.iter().enumerate() {
        let subset: Vec<_> = records.iter().filter(|r| r.mu == mu).cloned().collect();
        let curve = interface_extract(&subset, mu, &omegas, &kappas, threshold)
            .map_err(|e| usage(e.to_string()))?;
        let mut csv = String::from("omega,kappa_star,status\n");
        for (w, k) in curve.omegas.iter().zip(&curve.kappa_star) {
            let value = k.value().map(|v| v.to_string()).unwrap_or_default();
            writeln!(csv, "{w},{value},{}", k.status_label()).unwrap();
        }
        let path = PathBuf::from(format!("{prefix}_mu_{mu}.csv"));
        write_atomic(&path, csv.as_bytes()).map_err(|e| io_failure(&path, e))?;

        let points = match (&curve.spline, curve.knots()) {
            (Some(s), _) => s.sample(200),
            (None, (x, y)) => x.into_iter().zip(y).collect(),
        };
        let decided = curve.kappa_star.iter().filter(|k| matches!(k, KappaStar::Value(_))).count();
        println!(
            "mu = {mu}: {decided} of {} columns with an interface, wrote {}",
            curve.omegas.len(),
            path.display()
        );
        series.push(Series {
            label: Some(format!("μ = {mu}")),
            points,
            color: svg::PALETTE[i % svg::PALETTE.len()].to_string(),
        });
    }

    let pad = |lo: f64, hi: f64| {
        let w = if hi > lo { 0.02 * (hi - lo) } else { 0.5 };
        (lo - w, hi + w)
    };
    let panel = Panel {
        title: format!("Chaotic interface κ*(ω), threshold {threshold}"),
        x_label: "forcing frequency ω [cycles/hr]".into(),
        y_label: "forcing amplitude κ".into(),
        series,
        x_range: Some(pad(omegas[0], *omegas.last().unwrap())),
        y_range: Some(pad(kappas[0], *kappas.last().unwrap())),
    };
    let path = PathBuf::from(format!("{prefix}.svg"));
    write_atomic(&path, svg::render(&[panel], 640.0, 440.0).as_bytes())
        .map_err(|e| io_failure(&path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn phase_portrait(traj: &Path, t_start: f64, t_end: f64, out: &Path) -> CmdResult {
    let text = std::fs::read_to_string(traj)
        .map_err(|e| usage(format!("cannot read {}: {e}", traj.display())))?;
    let rows = parse_trajectory_csv(&text).map_err(|e| usage(format!("{}: {e}", traj.display())))?;
    let (first, last) = match (rows.first(), rows.last()) {
        (Some(a), Some(b)) => (a.t_hr, b.t_hr),
        _ => return Err(usage("trajectory has no samples")),
    };
    let slack = 1e-9 * last.abs().max(1.0);
    if !(t_start < t_end) || t_start < first - slack || t_end > last + slack {
        return Err(usage(format!(
            "window [{t_start}, {t_end}] h is not inside the trajectory span [{first}, {last}] h"
        )));
    }
    let window: Vec<_> = rows
        .iter()
        .filter(|r| r.t_hr >= t_start - slack && r.t_hr <= t_end + slack)
        .collect();
    if window.is_empty() {
        return Err(usage("no samples inside the window"));
    }
    let panel = |title: &str, y_label: &str, y: fn(&output::Row) -> f64| Panel {
        title: title.into(),
        x_label: "outlet ρ₂ [kg/m³]".into(),
        y_label: y_label.into(),
        series: vec![Series {
            label: None,
            points: window.iter().map(|r| (r.rho2_out, y(r))).collect(),
            color: svg::PALETTE[0].into(),
        }],
        x_range: None,
        y_range: None,
    };
    let doc = svg::render(
        &[
            panel("Outlet pressure vs hydrogen density", "outlet p [MPa]", |r| r.p_out_mpa),
            panel("Outlet densities", "outlet ρ₁ [kg/m³]", |r| r.rho1_out),
        ],
        520.0,
        440.0,
    );
    write_atomic(out, doc.as_bytes()).map_err(|e| io_failure(out, e))?;
    println!(
        "wrote {} ({} samples over [{t_start}, {t_end}] h)",
        out.display(),
        window.len()
    );
    Ok(())
}
