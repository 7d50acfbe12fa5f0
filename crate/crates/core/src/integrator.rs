//! Adaptive TR-BDF2 integration of stiff systems with uniform dense output.
//!
//! Each step is a trapezoidal stage to `t + γh` followed by a second-order
//! backward-difference stage to `t + h`, with `γ = 2 − √2` so that both
//! stages share the iteration matrix `I − (γ/2)hJ`. Stage equations are
//! solved by simplified Newton with a finite-difference Jacobian. The local
//! error estimate is the third-derivative estimate built from the three
//! stage slopes, filtered through the iteration matrix.

use nalgebra::{DMatrix, DVector, LU, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{PipeModel, SimState};

const GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;
const STAGE_COEF: f64 = GAMMA / 2.0;
const MIN_STEP_S: f64 = 1e-6;
const MAX_GROWTH: f64 = 5.0;
const MIN_SHRINK: f64 = 0.2;
const SAFETY: f64 = 0.9;

/// Tolerances and step limits for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    /// Absolute tolerance in kg/m³.
    pub abs_tol: f64,
    pub max_step_s: f64,
    /// Convergence threshold of the stage Newton iterations, measured in the
    /// relative norm `rms(Δ / (|y| + abs_tol))`.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Which densities must stay positive for a step to be accepted.
    #[serde(default)]
    pub positivity: Positivity,
}

/// Step-rejection policy for density positivity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Positivity {
    /// Mixture density and pressure at every node.
    #[default]
    Mixture,
    /// Each species density at every node.
    Species,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-8,
            max_step_s: 900.0,
            newton_tol: 1e-12,
            max_newton_iters: 12,
            positivity: Positivity::Mixture,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step_s", self.max_step_s),
            ("newton_tol", self.newton_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_newton_iters == 0 {
            return Err(invalid("max_newton_iters must be positive"));
        }
        if self.newton_tol >= self.rel_tol {
            return Err(invalid("newton_tol must be smaller than rel_tol"));
        }
        Ok(())
    }

    /// Same configuration with both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            newton_tol: self.newton_tol.min(self.rel_tol * factor * 1e-3),
            ..*self
        }
    }
}

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()>;

    /// Whether `y` lies in the admissible set; inadmissible stage values
    /// cause the step to be rejected.
    fn admissible(&self, _y: &[f64]) -> bool {
        true
    }
}

impl OdeSystem for PipeModel {
    fn dim(&self) -> usize {
        PipeModel::dim(self)
    }

    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()> {
        PipeModel::rhs(self, t, y, dydt)
    }

    fn admissible(&self, y: &[f64]) -> bool {
        let m = self.order();
        let (r1, r2) = y.split_at(m);
        match self.positivity {
            Positivity::Species => y.iter().all(|v| *v > 0.0),
            Positivity::Mixture => {
                let (a, b) = (self.pipe.sigma1_mps.powi(2), self.pipe.sigma2_mps.powi(2));
                r1.iter().zip(r2).all(|(x, z)| x + z > 0.0 && a * x + b * z > 0.0)
            }
        }
    }
}

/// Counters from one integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub jacobians: usize,
}

/// One-sided finite-difference Jacobian of `f` at `(t, y)`.
///
/// Column `j` uses the increment `max(1e-7·|y_j|, 1e-9·scale_j)`; `f0` must
/// hold `f(t, y)`.
pub fn jacobian_fd<F>(mut f: F, t: f64, y: &[f64], f0: &[f64], scale: &[f64]) -> Result<DMatrix<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    if f0.len() != n || scale.len() != n {
        return Err(invalid("jacobian_fd: inconsistent lengths"));
    }
    let mut jac = DMatrix::zeros(n, n);
    let mut yp = y.to_vec();
    let mut fp = vec![0.0; n];
    for j in 0..n {
        let delta = (1e-7 * y[j].abs()).max(1e-9 * scale[j]);
        if !(delta > 0.0) {
            return Err(invalid(format!("jacobian_fd: zero increment in column {j}")));
        }
        yp[j] = y[j] + delta;
        let step = yp[j] - y[j];
        f(t, &yp, &mut fp)?;
        for i in 0..n {
            let v = (fp[i] - f0[i]) / step;
            if !v.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "non-finite Jacobian entry ({i}, {j})"
                )));
            }
            jac[(i, j)] = v;
        }
        yp[j] = y[j];
    }
    Ok(jac)
}

struct Counted<'a, S: OdeSystem> {
    sys: &'a S,
    evals: usize,
}

impl<S: OdeSystem> Counted<'_, S> {
    fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.evals += 1;
        self.sys.rhs(t, y, out)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!("non-finite derivative at t = {t}")));
        }
        Ok(())
    }
}

enum StageFailure {
    Diverged,
    Inadmissible,
    Model(Error),
}

enum StepOutcome {
    Accepted { y: Vec<f64>, f: Vec<f64>, err: f64 },
    ErrorTooLarge { err: f64 },
    NewtonFailed(Option<Error>),
    Inadmissible,
}

struct Stepper<'a, S: OdeSystem> {
    sys: Counted<'a, S>,
    cfg: IntegratorConfig,
    scale: Vec<f64>,
    jac: Option<DMatrix<f64>>,
    /// Jacobian was evaluated at the current step start.
    jac_current: bool,
    /// Last step needed many Newton iterations.
    slow: bool,
    stats: IntegrationStats,
}

impl<'a, S: OdeSystem> Stepper<'a, S> {
    fn refresh_jacobian(&mut self, t: f64, y: &[f64], f0: &[f64]) -> Result<()> {
        let sys = &mut self.sys;
        let jac = jacobian_fd(|t, y, out| sys.eval(t, y, out), t, y, f0, &self.scale)?;
        self.jac = Some(jac);
        self.jac_current = true;
        self.slow = false;
        self.stats.jacobians += 1;
        Ok(())
    }

    fn newton_norm(&self, delta: &[f64], y: &[f64]) -> f64 {
        rms(delta.iter().zip(y).map(|(d, v)| d / (v.abs() + self.cfg.abs_tol)))
    }

    /// Solves `z = base + c·h·f(t, z)` starting from `z`.
    fn solve_stage(
        &mut self,
        lu: &LU<f64, Dyn, Dyn>,
        t: f64,
        h: f64,
        base: &[f64],
        z: &mut [f64],
        fz: &mut [f64],
    ) -> std::result::Result<usize, StageFailure> {
        let n = z.len();
        let mut prev_norm = f64::INFINITY;
        let mut residual = DVector::zeros(n);
        for iter in 0..self.cfg.max_newton_iters {
            if !self.sys.sys.admissible(z) {
                return Err(StageFailure::Inadmissible);
            }
            self.sys.eval(t, z, fz).map_err(StageFailure::Model)?;
            for i in 0..n {
                residual[i] = -(z[i] - base[i] - STAGE_COEF * h * fz[i]);
            }
            let delta = lu
                .solve(&residual)
                .ok_or_else(|| {
                    StageFailure::Model(Error::NumericalFailure("singular iteration matrix".into()))
                })?;
            for i in 0..n {
                z[i] += delta[i];
            }
            let norm = self.newton_norm(delta.as_slice(), z);
            if !norm.is_finite() {
                return Err(StageFailure::Diverged);
            }
            let rate = norm / prev_norm;
            if iter > 0 && rate >= 0.9 {
                return Err(StageFailure::Diverged);
            }
            let converged = if iter == 0 {
                norm <= self.cfg.newton_tol
            } else {
                rate / (1.0 - rate) * norm <= self.cfg.newton_tol
            };
            if converged || norm <= 1e-15 {
                if !self.sys.sys.admissible(z) {
                    return Err(StageFailure::Inadmissible);
                }
                self.sys.eval(t, z, fz).map_err(StageFailure::Model)?;
                return Ok(iter + 1);
            }
            prev_norm = norm;
        }
        Err(StageFailure::Diverged)
    }

    fn step(&mut self, t: f64, h: f64, y: &[f64], f0: &[f64]) -> StepOutcome {
        let n = y.len();
        let jac = self.jac.as_ref().expect("jacobian initialised");
        let mut w = DMatrix::identity(n, n);
        w -= jac * (STAGE_COEF * h);
        let lu = w.lu();

        // trapezoidal stage to t + γh
        let mut zg: Vec<f64> = y.iter().zip(f0).map(|(v, d)| v + GAMMA * h * d).collect();
        let base_g: Vec<f64> = y.iter().zip(f0).map(|(v, d)| v + STAGE_COEF * h * d).collect();
        let mut fg = vec![0.0; n];
        let it1 = match self.solve_stage(&lu, t + GAMMA * h, h, &base_g, &mut zg, &mut fg) {
            Ok(k) => k,
            Err(e) => return newton_failure(e),
        };

        // BDF2 stage to t + h
        let a = 1.0 / (GAMMA * (2.0 - GAMMA));
        let b = (1.0 - GAMMA) * (1.0 - GAMMA) / (GAMMA * (2.0 - GAMMA));
        let base: Vec<f64> = zg.iter().zip(y).map(|(g, v)| a * g - b * v).collect();
        let mut y1: Vec<f64> = zg
            .iter()
            .zip(&fg)
            .map(|(g, d)| g + (1.0 - GAMMA) * h * d)
            .collect();
        let mut f1 = vec![0.0; n];
        let it2 = match self.solve_stage(&lu, t + h, h, &base, &mut y1, &mut f1) {
            Ok(k) => k,
            Err(e) => return newton_failure(e),
        };
        self.slow = it1 + it2 > 8;

        let c = (-3.0 * GAMMA * GAMMA + 4.0 * GAMMA - 2.0) / (12.0 * (2.0 - GAMMA));
        let est = DVector::from_fn(n, |i, _| {
            2.0 * c
                * h
                * ((f1[i] - fg[i]) / (1.0 - GAMMA) - (fg[i] - f0[i]) / GAMMA)
        });
        let est = lu.solve(&est).unwrap_or(est);
        let err = rms((0..n).map(|i| {
            let w = self.cfg.abs_tol + self.cfg.rel_tol * y[i].abs().max(y1[i].abs());
            est[i] / w
        }));
        if !err.is_finite() {
            return StepOutcome::NewtonFailed(None);
        }
        if err <= 1.0 {
            StepOutcome::Accepted { y: y1, f: f1, err }
        } else {
            StepOutcome::ErrorTooLarge { err }
        }
    }
}

fn newton_failure(e: StageFailure) -> StepOutcome {
    match e {
        StageFailure::Diverged => StepOutcome::NewtonFailed(None),
        StageFailure::Inadmissible => StepOutcome::Inadmissible,
        StageFailure::Model(e) => StepOutcome::NewtonFailed(Some(e)),
    }
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

fn hermite(t0: f64, h: f64, y0: &[f64], f0: &[f64], y1: &[f64], f1: &[f64], t: f64, out: &mut [f64]) {
    let s = (t - t0) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    for i in 0..out.len() {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
}

/// Uniform sample time `k·t_end/n`.
pub fn sample_time(k: usize, n: usize, t_end: f64) -> f64 {
    if k == n {
        t_end
    } else {
        (k as f64 / n as f64) * t_end
    }
}

/// Integrates `sys` from `y0` at t = 0 to `t_end` and hands the state at each
/// of the `n + 1` uniform sample times to `sink`.
pub fn integrate_system<S, F>(
    sys: &S,
    y0: &[f64],
    t_end: f64,
    n: usize,
    cfg: &IntegratorConfig,
    mut sink: F,
) -> Result<IntegrationStats>
where
    S: OdeSystem,
    F: FnMut(usize, f64, &[f64]) -> Result<()>,
{
    cfg.validate()?;
    let dim = sys.dim();
    if y0.len() != dim {
        return Err(invalid(format!("initial state has length {}, expected {dim}", y0.len())));
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(invalid(format!("horizon must be positive, got {t_end}")));
    }
    if n < 2 {
        return Err(invalid("need at least 2 sample intervals"));
    }
    if !sys.admissible(y0) {
        return Err(invalid("initial state is not admissible"));
    }

    let mut stepper = Stepper {
        sys: Counted { sys, evals: 0 },
        cfg: *cfg,
        scale: y0.iter().map(|v| v.abs().max(1.0)).collect(),
        jac: None,
        jac_current: false,
        slow: false,
        stats: IntegrationStats::default(),
    };

    let mut t = 0.0;
    let mut y = y0.to_vec();
    let mut f = vec![0.0; dim];
    stepper
        .sys
        .eval(t, &y, &mut f)
        .map_err(|e| Error::IntegrationFailure { t_s: t, reason: e.to_string() })?;
    stepper
        .refresh_jacobian(t, &y, &f)
        .map_err(|e| Error::IntegrationFailure { t_s: t, reason: e.to_string() })?;

    sink(0, 0.0, &y)?;
    let mut next_sample = 1;
    let mut buf = vec![0.0; dim];

    let mut h = (1.0f64).min(cfg.max_step_s).min(t_end);
    while next_sample <= n {
        let remaining = t_end - t;
        let mut last = false;
        if h >= remaining * (1.0 - 1e-12) {
            h = remaining;
            last = true;
        }
        match stepper.step(t, h, &y, &f) {
            StepOutcome::Accepted { y: y1, f: f1, err } => {
                stepper.stats.accepted += 1;
                let t1 = if last { t_end } else { t + h };
                while next_sample <= n {
                    let ts = sample_time(next_sample, n, t_end);
                    if ts > t1 {
                        break;
                    }
                    if ts == t1 {
                        sink(next_sample, ts, &y1)?;
                    } else {
                        hermite(t, t1 - t, &y, &f, &y1, &f1, ts, &mut buf);
                        sink(next_sample, ts, &buf)?;
                    }
                    next_sample += 1;
                }
                t = t1;
                y = y1;
                f = f1;
                stepper.jac_current = false;
                if stepper.slow {
                    stepper
                        .refresh_jacobian(t, &y, &f)
                        .map_err(|e| Error::IntegrationFailure { t_s: t, reason: e.to_string() })?;
                }
                let factor = (SAFETY * err.max(1e-10).powf(-1.0 / 3.0)).clamp(MIN_SHRINK, MAX_GROWTH);
                h = (h * factor).min(cfg.max_step_s);
            }
            outcome => {
                stepper.stats.rejected += 1;
                let (shrink, reason) = match outcome {
                    StepOutcome::ErrorTooLarge { err } => (
                        (SAFETY * err.powf(-1.0 / 3.0)).clamp(MIN_SHRINK, 0.9),
                        "local error test failed".to_string(),
                    ),
                    StepOutcome::NewtonFailed(e) => (
                        0.25,
                        e.map(|e| e.to_string())
                            .unwrap_or_else(|| "Newton iteration did not converge".into()),
                    ),
                    StepOutcome::Inadmissible => (0.25, "positivity loss".to_string()),
                    StepOutcome::Accepted { .. } => unreachable!(),
                };
                h *= shrink;
                if h < MIN_STEP_S {
                    return Err(Error::IntegrationFailure { t_s: t, reason });
                }
                if !stepper.jac_current {
                    stepper
                        .refresh_jacobian(t, &y, &f)
                        .map_err(|e| Error::IntegrationFailure { t_s: t, reason: e.to_string() })?;
                }
            }
        }
    }
    stepper.stats.rhs_evals = stepper.sys.evals;
    Ok(stepper.stats)
}

/// Uniformly sampled outlet/inlet observables of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub sample_times_s: Vec<f64>,
    pub rho1_out: Vec<f64>,
    pub rho2_out: Vec<f64>,
    /// Outlet pressure in Pa.
    pub p_out: Vec<f64>,
    pub phi_in: Vec<f64>,
    pub u: Vec<f64>,
    /// Full nodal states at a coarser cadence, if requested.
    pub snapshots: Vec<SimState>,
    pub stats: IntegrationStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.sample_times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_times_s.is_empty()
    }

    /// Number of sample intervals N.
    pub fn intervals(&self) -> usize {
        self.len().saturating_sub(1)
    }

    pub fn horizon_s(&self) -> f64 {
        self.sample_times_s.last().copied().unwrap_or(0.0)
    }
}

/// Integrates the pipe model over `[0, t_end_s]` and records observables at
/// `n + 1` uniform times.
pub fn integrate(
    model: &PipeModel,
    y0: &[f64],
    t_end_s: f64,
    n: usize,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    integrate_with_snapshots(model, y0, t_end_s, n, cfg, None)
}

/// As [`integrate`], additionally storing the full nodal state every
/// `snapshot_every` samples.
pub fn integrate_with_snapshots(
    model: &PipeModel,
    y0: &[f64],
    t_end_s: f64,
    n: usize,
    cfg: &IntegratorConfig,
    snapshot_every: Option<usize>,
) -> Result<Trajectory> {
    let mut traj = Trajectory {
        sample_times_s: Vec::with_capacity(n + 1),
        rho1_out: Vec::with_capacity(n + 1),
        rho2_out: Vec::with_capacity(n + 1),
        p_out: Vec::with_capacity(n + 1),
        phi_in: Vec::with_capacity(n + 1),
        u: Vec::with_capacity(n + 1),
        snapshots: Vec::new(),
        stats: IntegrationStats::default(),
    };
    let stats = integrate_system(model, y0, t_end_s, n, cfg, |k, t, y| {
        let obs = model
            .observe(t, y)
            .map_err(|e| Error::IntegrationFailure { t_s: t, reason: e.to_string() })?;
        traj.sample_times_s.push(t);
        traj.rho1_out.push(obs.rho1_out);
        traj.rho2_out.push(obs.rho2_out);
        traj.p_out.push(obs.p_out);
        traj.phi_in.push(obs.phi_in);
        traj.u.push(obs.u);
        if let Some(every) = snapshot_every.filter(|e| *e > 0) {
            if k % every == 0 {
                let (state, _) = model.reconstruct(t, y)?;
                traj.snapshots.push(state);
            }
        }
        Ok(())
    })?;
    traj.stats = stats;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Linear(DMatrix<f64>);

    impl OdeSystem for Linear {
        fn dim(&self) -> usize {
            self.0.nrows()
        }
        fn rhs(&self, _t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
            let v = &self.0 * DVector::from_column_slice(y);
            out.copy_from_slice(v.as_slice());
            Ok(())
        }
    }

    #[test]
    fn fd_jacobian_recovers_linear_map() {
        let a = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.5, 0.0, -30.0, 4.0, 1.5, 0.0, -0.1]);
        let sys = Linear(a.clone());
        let y = [1.0, 2.0, -0.5];
        let mut f0 = [0.0; 3];
        sys.rhs(0.0, &y, &mut f0).unwrap();
        let j = jacobian_fd(|t, y, o| sys.rhs(t, y, o), 0.0, &y, &f0, &[1.0; 3]).unwrap();
        for (got, want) in j.iter().zip(a.iter()) {
            assert!((got - want).abs() <= 1e-6 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn fd_jacobian_of_constant_is_zero() {
        let j = jacobian_fd(
            |_, _, o: &mut [f64]| {
                o.fill(3.0);
                Ok(())
            },
            0.0,
            &[1.0, 2.0],
            &[3.0, 3.0],
            &[1.0, 1.0],
        )
        .unwrap();
        assert!(j.iter().all(|v| *v == 0.0));
    }

    struct Stiff;

    impl OdeSystem for Stiff {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = -1000.0 * (y[0] - t.cos());
            Ok(())
        }
    }

    fn stiff_exact(t: f64) -> f64 {
        // y' = -k(y - cos t), y(0) = 0
        let k = 1000.0;
        let c = k / (k * k + 1.0);
        c * (k * t.cos() + t.sin()) - c * k * (-k * t).exp()
    }

    fn stiff_end_error(cfg: &IntegratorConfig) -> f64 {
        let mut end = 0.0;
        integrate_system(&Stiff, &[0.0], 10.0, 100, cfg, |_, t, y| {
            if t == 10.0 {
                end = y[0];
            }
            Ok(())
        })
        .unwrap();
        (end - stiff_exact(10.0)).abs()
    }

    #[test]
    fn scalar_stiff_problem_matches_closed_form() {
        let cfg = IntegratorConfig {
            max_step_s: 1.0,
            ..IntegratorConfig::default()
        };
        let mut worst: f64 = 0.0;
        integrate_system(&Stiff, &[0.0], 10.0, 1000, &cfg, |_, t, y| {
            worst = worst.max((y[0] - stiff_exact(t)).abs());
            Ok(())
        })
        .unwrap();
        assert!(worst < 1e-4, "max error {worst}");
    }

    #[test]
    fn tighter_tolerances_reduce_error() {
        let base = IntegratorConfig {
            rel_tol: 1e-4,
            abs_tol: 1e-6,
            newton_tol: 1e-10,
            max_step_s: 1.0,
            ..IntegratorConfig::default()
        };
        let errs: Vec<f64> = [1.0, 0.1, 0.01]
            .iter()
            .map(|s| stiff_end_error(&base.scaled(*s)))
            .collect();
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    }

    #[test]
    fn samples_are_uniform_and_complete() {
        let mut times = Vec::new();
        integrate_system(&Stiff, &[0.0], 10.0, 37, &IntegratorConfig::default(), |k, t, _| {
            assert_eq!(k, times.len());
            times.push(t);
            Ok(())
        })
        .unwrap();
        assert_eq!(times.len(), 38);
        assert_eq!(times[37], 10.0);
        for (k, t) in times.iter().enumerate() {
            let want = 10.0 * k as f64 / 37.0;
            assert!((t - want).abs() <= 4.0 * f64::EPSILON * want.max(1.0));
        }
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut v = Vec::new();
            integrate_system(&Stiff, &[0.0], 5.0, 50, &IntegratorConfig::default(), |_, _, y| {
                v.push(y[0].to_bits());
                Ok(())
            })
            .unwrap();
            v
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = IntegratorConfig::default();
        let ok = |_: usize, _: f64, _: &[f64]| Ok(());
        assert!(integrate_system(&Stiff, &[0.0], 0.0, 10, &cfg, ok).is_err());
        assert!(integrate_system(&Stiff, &[0.0], 1.0, 1, &cfg, ok).is_err());
        assert!(integrate_system(&Stiff, &[0.0, 1.0], 1.0, 10, &cfg, ok).is_err());
        let bad = IntegratorConfig { newton_tol: 1.0, ..cfg };
        assert!(integrate_system(&Stiff, &[0.0], 1.0, 10, &bad, ok).is_err());
    }

    struct Blowup;

    impl OdeSystem for Blowup {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = -1.0 / y[0];
            Ok(())
        }
        fn admissible(&self, y: &[f64]) -> bool {
            y[0] > 0.0
        }
    }

    #[test]
    fn positivity_loss_aborts_with_time() {
        // y = sqrt(1 - 2t) reaches zero at t = 0.5
        let err = integrate_system(&Blowup, &[1.0], 2.0, 10, &IntegratorConfig::default(), |_, _, _| Ok(()))
            .unwrap_err();
        match err {
            Error::IntegrationFailure { t_s, .. } => assert!(t_s > 0.4 && t_s <= 0.5, "{t_s}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
