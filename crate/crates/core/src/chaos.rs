//! Divergence of paired trajectories, chaos classification and orbit
//! period multipliers.

use serde::{Deserialize, Serialize};

use crate::chebyshev::GridOperators;
use crate::error::{invalid, Error, Result};
use crate::integrator::{integrate, IntegratorConfig, Trajectory};
use crate::model::{solve_steady, ControlParams, ForcingParams, PipeConfig, PipeModel};
use crate::units;

/// Paired-run protocol and the windows over which divergence is averaged.
///
/// Windows are fractions of the sample count N and resolve to inclusive
/// index ranges `[round(a·N), round(b·N)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosExperimentConfig {
    /// Withdrawal-flux offset of the second steady initial state.
    pub delta_q: f64,
    pub early_window: [f64; 2],
    pub late_window: [f64; 2],
    pub threshold: f64,
    pub log_floor: f64,
}

impl Default for ChaosExperimentConfig {
    fn default() -> Self {
        Self {
            delta_q: 0.1,
            early_window: [0.08, 0.15],
            late_window: [0.5, 0.8],
            threshold: 0.5,
            log_floor: 1e-30,
        }
    }
}

impl ChaosExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_q.is_finite() && self.delta_q > 0.0) {
            return Err(invalid(format!("delta_q must be positive, got {}", self.delta_q)));
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(invalid(format!("threshold must be positive, got {}", self.threshold)));
        }
        if !(self.log_floor > 0.0) {
            return Err(invalid("log floor must be positive"));
        }
        let [a, b] = self.early_window;
        let [c, d] = self.late_window;
        if !(0.0 <= a && a < b && b < c && c < d && d <= 1.0) {
            return Err(invalid(format!(
                "windows must satisfy 0 <= n0 < n1 < n2 < n3 <= N, got {:?} {:?}",
                self.early_window, self.late_window
            )));
        }
        Ok(())
    }

    /// Inclusive index ranges `([n0, n1], [n2, n3])` for N sample intervals.
    pub fn window_indices(&self, n: usize) -> Result<([usize; 2], [usize; 2])> {
        let idx = |f: f64| (f * n as f64).round() as usize;
        let early = [idx(self.early_window[0]), idx(self.early_window[1])];
        let late = [idx(self.late_window[0]), idx(self.late_window[1])];
        if !(early[0] < early[1] && early[1] < late[0] && late[0] < late[1] && late[1] <= n) {
            return Err(invalid(format!(
                "windows collapse for N = {n}: {early:?} {late:?}"
            )));
        }
        Ok((early, late))
    }
}

/// Per-channel divergence measures and the combined classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosResult {
    pub c_rho1: f64,
    pub c_rho2: f64,
    pub c_p: f64,
    pub c: f64,
    pub chaotic: bool,
}

impl ChaosResult {
    pub fn from_channels(c_rho1: f64, c_rho2: f64, c_p: f64, threshold: f64) -> Self {
        let c = c_rho1.min(c_rho2).min(c_p);
        Self {
            c_rho1,
            c_rho2,
            c_p,
            c,
            chaotic: c > threshold,
        }
    }
}

/// Mean of `log|ψ₂ − ψ₁|` over the late window minus its mean over the early
/// window. Differences are floored at `log_floor` before the logarithm.
pub fn divergence_measure(psi1: &[f64], psi2: &[f64], ecfg: &ChaosExperimentConfig) -> Result<f64> {
    if psi1.len() != psi2.len() {
        return Err(invalid("series lengths differ"));
    }
    if psi1.len() < 2 {
        return Err(invalid("series too short"));
    }
    let (early, late) = ecfg.window_indices(psi1.len() - 1)?;
    Ok(divergence_over(psi1, psi2, early, late, ecfg.log_floor))
}

/// [`divergence_measure`] with explicit inclusive index windows.
pub fn divergence_over(
    psi1: &[f64],
    psi2: &[f64],
    early: [usize; 2],
    late: [usize; 2],
    log_floor: f64,
) -> f64 {
    // logs are taken relative to the floor so floored samples add exact zeros
    let ln_floor = log_floor.ln();
    let mean_log = |[a, b]: [usize; 2]| {
        let sum: f64 = (a..=b)
            .map(|k| (psi2[k] - psi1[k]).abs().max(log_floor).ln() - ln_floor)
            .sum();
        sum / (b - a + 1) as f64
    };
    mean_log(late) - mean_log(early)
}

/// Divergence of the outlet density and pressure channels of two runs.
pub fn chaos_measure(
    traj1: &Trajectory,
    traj2: &Trajectory,
    ecfg: &ChaosExperimentConfig,
) -> Result<ChaosResult> {
    if traj1.sample_times_s != traj2.sample_times_s {
        return Err(invalid("trajectories do not share a sample grid"));
    }
    let c_rho1 = divergence_measure(&traj1.rho1_out, &traj2.rho1_out, ecfg)?;
    let c_rho2 = divergence_measure(&traj1.rho2_out, &traj2.rho2_out, ecfg)?;
    let c_p = divergence_measure(&traj1.p_out, &traj2.p_out, ecfg)?;
    Ok(ChaosResult::from_channels(c_rho1, c_rho2, c_p, ecfg.threshold))
}

/// Everything one simulation needs, in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub pipe: PipeConfig,
    pub forcing: ForcingParams,
    pub control: ControlParams,
    pub integrator: IntegratorConfig,
    pub chaos: ChaosExperimentConfig,
    /// Polynomial order M of the collocation grid.
    pub order: usize,
    pub horizon_s: f64,
    /// Number of sample intervals N.
    pub samples: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            pipe: PipeConfig::default(),
            forcing: ForcingParams::default(),
            control: ControlParams::default(),
            integrator: IntegratorConfig::default(),
            chaos: ChaosExperimentConfig::default(),
            order: 16,
            horizon_s: units::hr_to_s(100.0),
            samples: 10_000,
        }
    }
}

/// A point of the forcing/gain parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub omega_cyc_per_hr: f64,
    pub kappa: f64,
    pub mu: f64,
}

impl OperatingPoint {
    pub fn new(omega_cyc_per_hr: f64, kappa: f64, mu: f64) -> Self {
        Self {
            omega_cyc_per_hr,
            kappa,
            mu,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.pipe.validate()?;
        self.forcing.validate()?;
        self.control.validate()?;
        self.integrator.validate()?;
        self.chaos.validate()?;
        if self.order < 2 {
            return Err(invalid(format!("polynomial order must be >= 2, got {}", self.order)));
        }
        if !(self.horizon_s.is_finite() && self.horizon_s > 0.0) {
            return Err(invalid("horizon must be positive"));
        }
        if self.samples < 2 {
            return Err(invalid("need at least 2 sample intervals"));
        }
        Ok(())
    }

    pub fn at(&self, point: OperatingPoint) -> Self {
        let mut s = *self;
        s.forcing.omega_cyc_per_hr = point.omega_cyc_per_hr;
        s.forcing.kappa = point.kappa;
        s.control.mu = point.mu;
        s
    }

    pub fn point(&self) -> OperatingPoint {
        OperatingPoint::new(self.forcing.omega_cyc_per_hr, self.forcing.kappa, self.control.mu)
    }

    pub fn grid(&self) -> Result<GridOperators> {
        GridOperators::new(self.order, self.pipe.length_m)
    }
}

/// Simulates from the steady state carrying `q_init`; the model regulates
/// towards `phi_ref` (`None` uses the run's own inlet flux at t = 0).
pub fn simulate_from_steady(
    scenario: &Scenario,
    q_init: f64,
    phi_ref: Option<f64>,
) -> Result<(PipeModel, Trajectory)> {
    scenario.validate()?;
    let grid = scenario.grid()?;
    let init = solve_steady(&scenario.forcing, &scenario.control, &grid, &scenario.pipe, q_init)?;
    let mut model = match phi_ref {
        Some(r) => PipeModel::new(grid, scenario.pipe, scenario.forcing, scenario.control, r)?,
        None => PipeModel::from_initial_state(
            grid,
            scenario.pipe,
            scenario.forcing,
            scenario.control,
            &init,
        )?,
    };
    model.positivity = scenario.integrator.positivity;
    let traj = integrate(
        &model,
        &init.interior(),
        scenario.horizon_s,
        scenario.samples,
        &scenario.integrator,
    )?;
    Ok((model, traj))
}

/// Single run from the steady state at the configured withdrawal flux.
pub fn simulate(scenario: &Scenario) -> Result<Trajectory> {
    simulate_from_steady(scenario, scenario.pipe.withdrawal_flux, None).map(|(_, t)| t)
}

/// A paired run that could not be completed.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFailure {
    /// 1 for the reference run, 2 for the perturbed run.
    pub member: u8,
    pub error: Error,
}

impl std::fmt::Display for PairFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run {} failed: {}", self.member, self.error)
    }
}

impl std::error::Error for PairFailure {}

/// Reference and perturbed trajectories for one operating point.
///
/// Both runs see the same forcing, withdrawal and feedback reference; only
/// the initial steady states differ (withdrawal `q̄` versus `q̄ + δq`).
pub fn pair_trajectories(
    point: OperatingPoint,
    scenario: &Scenario,
) -> std::result::Result<(Trajectory, Trajectory), PairFailure> {
    let sc = scenario.at(point);
    let q = sc.pipe.withdrawal_flux;
    let (model, first) =
        simulate_from_steady(&sc, q, None).map_err(|error| PairFailure { member: 1, error })?;
    let (_, second) = simulate_from_steady(&sc, q + sc.chaos.delta_q, Some(model.phi_ref))
        .map_err(|error| PairFailure { member: 2, error })?;
    Ok((first, second))
}

pub fn pair_simulate(
    point: OperatingPoint,
    scenario: &Scenario,
) -> std::result::Result<ChaosResult, PairFailure> {
    let (a, b) = pair_trajectories(point, scenario)?;
    chaos_measure(&a, &b, &scenario.chaos).map_err(|error| PairFailure { member: 1, error })
}

const STROBE_PHASES: usize = 8;
const MAX_CLUSTERS: usize = 8;
const CLUSTER_TOL: f64 = 1e-3;

/// Number of forcing periods after which the outlet pressure repeats inside
/// `[t_a, t_b]` (seconds), or 0 when the strobed values do not settle.
///
/// The series is strobed once per forcing period at the nearest sample, at
/// several phase offsets across the period; strobe values within `1e-3` of
/// the in-window signal range share a cluster. The largest cluster count
/// over the phases is the multiplier.
pub fn orbit_period_multiplier(traj: &Trajectory, omega_cyc_per_hr: f64, window_s: [f64; 2]) -> Result<usize> {
    period_multiplier(&traj.sample_times_s, &traj.p_out, omega_cyc_per_hr, window_s)
}

/// [`orbit_period_multiplier`] on a raw uniformly sampled series.
pub fn period_multiplier(times: &[f64], values: &[f64], omega_cyc_per_hr: f64, window_s: [f64; 2]) -> Result<usize> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(invalid("times and values must have equal length >= 2"));
    }
    if !(omega_cyc_per_hr > 0.0) {
        return Err(invalid("forcing frequency must be positive"));
    }
    let [ta, tb] = window_s;
    let t_end = *times.last().unwrap();
    if !(ta >= times[0] && tb <= t_end * (1.0 + 1e-12) && ta < tb) {
        return Err(invalid(format!("window [{ta}, {tb}] s lies outside the data")));
    }
    let period = units::S_PER_HR / omega_cyc_per_hr;
    let periods = (tb - ta) / period;
    if periods < 8.0 - 1e-9 {
        return Err(invalid(format!(
            "window spans {periods:.3} forcing periods; at least 8 are required"
        )));
    }
    let dt = (t_end - times[0]) / (times.len() - 1) as f64;
    let nearest = |t: f64| (((t - times[0]) / dt).round() as usize).min(times.len() - 1);

    let (lo, hi) = (nearest(ta), nearest(tb));
    let (vmin, vmax) = values[lo..=hi]
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let range = vmax - vmin;
    if range <= 0.0 {
        return Ok(1);
    }
    let tol = CLUSTER_TOL * range;

    let mut best = 0;
    for phase in 0..STROBE_PHASES {
        let offset = phase as f64 * period / STROBE_PHASES as f64;
        let mut clusters: Vec<f64> = Vec::new();
        let mut k = 0usize;
        loop {
            let t = ta + offset + k as f64 * period;
            if t > tb * (1.0 + 1e-12) {
                break;
            }
            let v = values[nearest(t)];
            if !clusters.iter().any(|c| (c - v).abs() <= tol) {
                clusters.push(v);
                if clusters.len() > MAX_CLUSTERS {
                    return Ok(0);
                }
            }
            k += 1;
        }
        best = best.max(clusters.len());
    }
    Ok(best)
}
