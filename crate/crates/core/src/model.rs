//! Semi-discrete two-gas pipe flow with boundary concentration forcing and
//! proportional inlet-flux feedback.
//!
//! State: natural-gas and hydrogen densities at the Chebyshev nodes. The
//! inlet node is prescribed (`u(t)·s(t)`), the outlet flux is prescribed
//! (`q̄`), and the nodal mass flux is recovered in closed form from the
//! steady momentum balance, so the unknowns reduce to the `2M` interior
//! densities.
//!
//! All quantities are SI: metres, seconds, pascal, kg/m³ and kg/(m²·s).
//! Forcing frequency is the one exception and stays in cycles per hour.

use std::cell::Cell;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chebyshev::GridOperators;
use crate::error::{invalid, Error, Result};
use crate::integrator::Positivity;
use crate::units;

const CONTROL_BRACKET: (f64, f64) = (1e-3, 1e3);
const CONTROL_MAX_ITERS: usize = 200;
const STEADY_MAX_ITERS: usize = 50;

/// Physical pipe and gas parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipeConfig {
    pub length_m: f64,
    pub diameter_m: f64,
    /// Darcy friction factor λ.
    pub friction: f64,
    /// Isothermal wave speed of natural gas.
    pub sigma1_mps: f64,
    /// Isothermal wave speed of hydrogen.
    pub sigma2_mps: f64,
    /// Source pressure p̄ ahead of the inlet compressor.
    pub source_pressure_pa: f64,
    /// Outlet withdrawal flux q̄.
    pub withdrawal_flux: f64,
}

impl Default for PipeConfig {
    fn default() -> Self {
        Self {
            length_m: units::km_to_m(50.0),
            diameter_m: 0.5,
            friction: 0.011,
            sigma1_mps: 338.0,
            sigma2_mps: 4.0 * 338.0,
            source_pressure_pa: units::mpa_to_pa(4.0),
            withdrawal_flux: 75.0,
        }
    }
}

impl PipeConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("length_m", self.length_m),
            ("diameter_m", self.diameter_m),
            ("friction", self.friction),
            ("sigma1_mps", self.sigma1_mps),
            ("sigma2_mps", self.sigma2_mps),
            ("source_pressure_pa", self.source_pressure_pa),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        // zero withdrawal is the no-flow equilibrium
        if !(self.withdrawal_flux.is_finite() && self.withdrawal_flux >= 0.0) {
            return Err(invalid(format!(
                "withdrawal_flux must be >= 0, got {}",
                self.withdrawal_flux
            )));
        }
        if self.sigma2_mps <= self.sigma1_mps {
            return Err(invalid(format!(
                "hydrogen wave speed ({}) must exceed natural-gas wave speed ({})",
                self.sigma2_mps, self.sigma1_mps
            )));
        }
        Ok(())
    }

    /// `2·diameter/λ`, the coefficient of the closed-form flux.
    fn closure_coefficient(&self) -> f64 {
        2.0 * self.diameter_m / self.friction
    }
}

/// Sinusoidal hydrogen fraction at the inlet: `γ(t) = γ̄(1 + κ sin(2πωt))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingParams {
    pub omega_cyc_per_hr: f64,
    pub kappa: f64,
    pub gamma_bar: f64,
}

impl Default for ForcingParams {
    fn default() -> Self {
        Self {
            omega_cyc_per_hr: 0.5,
            kappa: 0.85,
            gamma_bar: 0.2,
        }
    }
}

impl ForcingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_cyc_per_hr.is_finite() && self.omega_cyc_per_hr >= 0.0) {
            return Err(invalid(format!("omega must be >= 0, got {}", self.omega_cyc_per_hr)));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(invalid(format!("kappa must lie in [0, 1], got {}", self.kappa)));
        }
        if !(self.gamma_bar > 0.0 && self.gamma_bar < 1.0) {
            return Err(invalid(format!("gamma_bar must lie in (0, 1), got {}", self.gamma_bar)));
        }
        if self.gamma_bar * (1.0 + self.kappa) > 1.0 {
            return Err(invalid(format!(
                "gamma_bar*(1+kappa) = {} exceeds 1",
                self.gamma_bar * (1.0 + self.kappa)
            )));
        }
        Ok(())
    }
}

/// Inlet compressor setting `u = μ̄ − μ(φ(t,0) − φ(0,0))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    pub mu_bar: f64,
    /// Feedback gain in m²·s/kg.
    pub mu: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self { mu_bar: 1.75, mu: 0.0 }
    }
}

impl ControlParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_bar.is_finite() && self.mu_bar >= 1.0) {
            return Err(invalid(format!("mu_bar must be >= 1, got {}", self.mu_bar)));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(invalid(format!("feedback gain mu must be >= 0, got {}", self.mu)));
        }
        Ok(())
    }
}

/// Nodal densities at one instant, nodes `0..=M` for each species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t_s: f64,
    pub rho1: Vec<f64>,
    pub rho2: Vec<f64>,
}

impl SimState {
    /// Interior densities stacked as `[ρ1_1..ρ1_M, ρ2_1..ρ2_M]`.
    pub fn interior(&self) -> Vec<f64> {
        self.rho1[1..].iter().chain(&self.rho2[1..]).copied().collect()
    }

    pub fn pressure(&self, cfg: &PipeConfig) -> Vec<f64> {
        pressure(&self.rho1, &self.rho2, cfg)
    }
}

/// Total mass flux at every node together with the control value that
/// produced the inlet densities.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxProfile {
    pub phi: Vec<f64>,
    pub u: f64,
}

/// Outlet and inlet quantities recorded along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub rho1_out: f64,
    pub rho2_out: f64,
    pub p_out: f64,
    pub phi_in: f64,
    pub u: f64,
}

pub fn forcing_gamma(t_s: f64, f: &ForcingParams) -> Result<f64> {
    let t_hr = units::s_to_hr(t_s);
    let gamma = f.gamma_bar
        * (1.0 + f.kappa * (2.0 * std::f64::consts::PI * f.omega_cyc_per_hr * t_hr).sin());
    // κ = 1 touches γ = 0 at the trough; the pure-gas endpoints are valid
    if (0.0..=1.0).contains(&gamma) {
        Ok(gamma)
    } else {
        Err(Error::InvalidForcing { t_s, gamma })
    }
}

/// Source partial densities `(s1, s2)` for hydrogen fraction `gamma`, chosen
/// so that `σ₁²s1 + σ₂²s2 = p̄`.
pub fn inlet_partial_densities(gamma: f64, cfg: &PipeConfig) -> (f64, f64) {
    let s1 = (1.0 - gamma) * cfg.source_pressure_pa / (cfg.sigma1_mps * cfg.sigma1_mps);
    let s2 = gamma * cfg.source_pressure_pa / (cfg.sigma2_mps * cfg.sigma2_mps);
    (s1, s2)
}

/// Dalton's law with ideal partial pressures.
pub fn pressure(rho1: &[f64], rho2: &[f64], cfg: &PipeConfig) -> Vec<f64> {
    let (a, b) = wave_speeds_sq(cfg);
    rho1.iter().zip(rho2).map(|(r1, r2)| a * r1 + b * r2).collect()
}

fn wave_speeds_sq(cfg: &PipeConfig) -> (f64, f64) {
    (cfg.sigma1_mps * cfg.sigma1_mps, cfg.sigma2_mps * cfg.sigma2_mps)
}

/// Nodal flux from the momentum balance `D p = −(λ/2d) φ|φ|/ρ` at nodes
/// `0..M−1`; the outlet node carries the withdrawal flux.
pub fn flux_closure(
    state: &SimState,
    u: f64,
    g: &GridOperators,
    cfg: &PipeConfig,
) -> Result<FluxProfile> {
    if state.rho1.len() != g.len() || state.rho2.len() != g.len() {
        return Err(invalid("state length does not match grid"));
    }
    let p = pressure(&state.rho1, &state.rho2, cfg);
    let mut grad = vec![0.0; g.len()];
    g.derivative_into(&p, &mut grad);
    let mut phi = vec![0.0; g.len()];
    closure_into(&state.rho1, &state.rho2, &grad, cfg, &mut phi)?;
    Ok(FluxProfile { phi, u })
}

fn closed_form_flux(rho_total: f64, grad: f64, k: f64) -> f64 {
    let mag = (k * rho_total * grad.abs()).sqrt();
    if grad > 0.0 {
        -mag
    } else {
        mag
    }
}

fn closure_into(
    rho1: &[f64],
    rho2: &[f64],
    grad: &[f64],
    cfg: &PipeConfig,
    phi: &mut [f64],
) -> Result<()> {
    let k = cfg.closure_coefficient();
    let m = phi.len() - 1;
    for i in 0..m {
        if !grad[i].is_finite() {
            return Err(Error::NumericalFailure(format!(
                "non-finite pressure gradient at node {i}"
            )));
        }
        phi[i] = closed_form_flux(rho1[i] + rho2[i], grad[i], k);
    }
    phi[m] = cfg.withdrawal_flux;
    Ok(())
}

/// Everything needed to evaluate the semi-discrete right-hand side.
///
/// `phi_ref` is the inlet flux the feedback law regulates towards. The last
/// accepted control value is cached to warm-start the next scalar solve.
#[derive(Debug, Clone)]
pub struct PipeModel {
    pub grid: GridOperators,
    pub pipe: PipeConfig,
    pub forcing: ForcingParams,
    pub control: ControlParams,
    pub phi_ref: f64,
    pub positivity: Positivity,
    last_u: Cell<f64>,
}

impl PipeModel {
    pub fn new(
        grid: GridOperators,
        pipe: PipeConfig,
        forcing: ForcingParams,
        control: ControlParams,
        phi_ref: f64,
    ) -> Result<Self> {
        pipe.validate()?;
        forcing.validate()?;
        control.validate()?;
        if !phi_ref.is_finite() {
            return Err(invalid("reference flux must be finite"));
        }
        if (grid.length_m() - pipe.length_m).abs() > 1e-9 * pipe.length_m {
            return Err(invalid("grid length differs from pipe length"));
        }
        Ok(Self {
            grid,
            pipe,
            forcing,
            control,
            phi_ref,
            positivity: Positivity::default(),
            last_u: Cell::new(control.mu_bar),
        })
    }

    /// Builds the model with the reference flux taken from `initial` at t = 0,
    /// where the feedback law gives `u = μ̄`.
    pub fn from_initial_state(
        grid: GridOperators,
        pipe: PipeConfig,
        forcing: ForcingParams,
        control: ControlParams,
        initial: &SimState,
    ) -> Result<Self> {
        let gamma = forcing_gamma(initial.t_s, &forcing)?;
        let (s1, s2) = inlet_partial_densities(gamma, &pipe);
        let mut st = initial.clone();
        st.rho1[0] = control.mu_bar * s1;
        st.rho2[0] = control.mu_bar * s2;
        let phi0 = flux_closure(&st, control.mu_bar, &grid, &pipe)?.phi[0];
        Self::new(grid, pipe, forcing, control, phi0)
    }

    pub fn order(&self) -> usize {
        self.grid.order()
    }

    /// Number of unknowns, `2M`.
    pub fn dim(&self) -> usize {
        2 * self.grid.order()
    }

    /// Solves `u = μ̄ − μ(φ₀(u) − φ_ref)` for the control value and returns it
    /// with the consistent inlet flux.
    pub fn control_input(&self, t_s: f64, interior: &[f64]) -> Result<(f64, f64)> {
        let m = self.order();
        if interior.len() != 2 * m {
            return Err(invalid(format!(
                "expected {} interior densities, got {}",
                2 * m,
                interior.len()
            )));
        }
        let gamma = forcing_gamma(t_s, &self.forcing)?;
        let (s1, s2) = inlet_partial_densities(gamma, &self.pipe);
        let (a1, a2) = wave_speeds_sq(&self.pipe);
        let d = self.grid.diff();

        // g0(u) = slope·u + offset is the inlet pressure gradient.
        let slope = d[(0, 0)] * (a1 * s1 + a2 * s2);
        let offset: f64 = (1..=m)
            .map(|j| d[(0, j)] * (a1 * interior[j - 1] + a2 * interior[m + j - 1]))
            .sum();
        if !offset.is_finite() {
            return Err(Error::NumericalFailure("non-finite inlet pressure gradient".into()));
        }
        let k = self.pipe.closure_coefficient();
        let s_tot = s1 + s2;
        let phi0 = |u: f64| closed_form_flux(u * s_tot, slope * u + offset, k);

        let ControlParams { mu_bar, mu } = self.control;
        if mu == 0.0 {
            return Ok((mu_bar, phi0(mu_bar)));
        }

        let residual = |u: f64| u - mu_bar + mu * (phi0(u) - self.phi_ref);
        // dφ₀/du for the Newton step; φ₀² = k·s·u·|g0| away from the kink.
        let dresidual = |u: f64| {
            let g0 = slope * u + offset;
            let inner = k * s_tot * u * g0.abs();
            if inner <= 0.0 {
                return f64::INFINITY;
            }
            let dinner = k * s_tot * (g0.abs() + u * g0.signum() * slope);
            let dmag = dinner / (2.0 * inner.sqrt());
            1.0 + mu * if g0 > 0.0 { -dmag } else { dmag }
        };

        let (mut lo, mut hi) = CONTROL_BRACKET;
        if residual(lo) > 0.0 || residual(hi) < 0.0 {
            return Err(Error::ControllerInfeasible { t_s, mu });
        }
        let mut u = self.last_u.get().clamp(lo, hi);
        for _ in 0..CONTROL_MAX_ITERS {
            let r = residual(u);
            if !r.is_finite() {
                return Err(Error::NumericalFailure("non-finite feedback residual".into()));
            }
            if r.abs() <= 1e-12 * u.abs().max(1.0) || hi - lo <= 4.0 * f64::EPSILON * u.abs() {
                self.last_u.set(u);
                return Ok((u, phi0(u)));
            }
            // the residual is increasing in u
            if r > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let dr = dresidual(u);
            let newton = u - r / dr;
            u = if dr.is_finite() && dr > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        Err(Error::ControllerInfeasible { t_s, mu })
    }

    /// Full nodal state (inlet node filled from the boundary law) and the
    /// flux profile for interior densities `y` at time `t_s`.
    pub fn reconstruct(&self, t_s: f64, y: &[f64]) -> Result<(SimState, FluxProfile)> {
        let m = self.order();
        let (u, _) = self.control_input(t_s, y)?;
        let gamma = forcing_gamma(t_s, &self.forcing)?;
        let (s1, s2) = inlet_partial_densities(gamma, &self.pipe);
        let mut rho1 = Vec::with_capacity(m + 1);
        let mut rho2 = Vec::with_capacity(m + 1);
        rho1.push(u * s1);
        rho2.push(u * s2);
        rho1.extend_from_slice(&y[..m]);
        rho2.extend_from_slice(&y[m..]);
        let state = SimState { t_s, rho1, rho2 };
        let flux = flux_closure(&state, u, &self.grid, &self.pipe)?;
        Ok((state, flux))
    }

    /// Time derivative of the interior densities.
    pub fn rhs(&self, t_s: f64, y: &[f64], dydt: &mut [f64]) -> Result<()> {
        let m = self.order();
        if dydt.len() != 2 * m {
            return Err(invalid("derivative buffer has wrong length"));
        }
        let (state, flux) = self.reconstruct(t_s, y)?;
        let n = m + 1;
        let mut carried = vec![0.0; n];
        let mut div = vec![0.0; n];
        for (species, rho) in [&state.rho1, &state.rho2].into_iter().enumerate() {
            for i in 0..n {
                let total = state.rho1[i] + state.rho2[i];
                carried[i] = rho[i] / total * flux.phi[i];
            }
            self.grid.derivative_into(&carried, &mut div);
            for i in 1..n {
                let v = -div[i];
                if !v.is_finite() {
                    return Err(Error::NumericalFailure(format!(
                        "non-finite transport term at node {i}"
                    )));
                }
                dydt[species * m + i - 1] = v;
            }
        }
        Ok(())
    }

    pub fn rhs_vec(&self, t_s: f64, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.rhs(t_s, y, &mut out)?;
        Ok(out)
    }

    pub fn observe(&self, t_s: f64, y: &[f64]) -> Result<Observables> {
        let m = self.order();
        let (state, flux) = self.reconstruct(t_s, y)?;
        let (a1, a2) = wave_speeds_sq(&self.pipe);
        Ok(Observables {
            rho1_out: state.rho1[m],
            rho2_out: state.rho2[m],
            p_out: a1 * state.rho1[m] + a2 * state.rho2[m],
            phi_in: flux.phi[0],
            u: flux.u,
        })
    }
}

/// Scalar feedback solve as a free function.
#[allow(clippy::too_many_arguments)]
pub fn control_input(
    interior: &[f64],
    t_s: f64,
    f: &ForcingParams,
    c: &ControlParams,
    g: &GridOperators,
    cfg: &PipeConfig,
    phi_ref: f64,
) -> Result<(f64, f64)> {
    PipeModel::new(g.clone(), *cfg, *f, *c, phi_ref)?.control_input(t_s, interior)
}

#[allow(clippy::too_many_arguments)]
pub fn rhs(
    t_s: f64,
    y: &[f64],
    f: &ForcingParams,
    c: &ControlParams,
    g: &GridOperators,
    cfg: &PipeConfig,
    phi_ref: f64,
) -> Result<Vec<f64>> {
    PipeModel::new(g.clone(), *cfg, *f, *c, phi_ref)?.rhs_vec(t_s, y)
}

/// Steady state at t = 0 carrying the uniform flux `q_init`, with inlet
/// pressure `μ̄·p̄` and the t = 0 inlet composition throughout.
pub fn solve_steady(
    f: &ForcingParams,
    c: &ControlParams,
    g: &GridOperators,
    cfg: &PipeConfig,
    q_init: f64,
) -> Result<SimState> {
    cfg.validate()?;
    f.validate()?;
    c.validate()?;
    if !(q_init.is_finite() && q_init >= 0.0) {
        return Err(invalid(format!("steady flux must be >= 0, got {q_init}")));
    }
    let m = g.order();
    let gamma = forcing_gamma(0.0, f)?;
    let (s1, s2) = inlet_partial_densities(gamma, cfg);
    let (a1, a2) = wave_speeds_sq(cfg);
    let source = a1 * s1 + a2 * s2;
    let c2 = source / (s1 + s2);
    let p_in = c.mu_bar * cfg.source_pressure_pa;
    let x = g.nodes_m();

    // p·dp/dx = −λc²q²/(2d) integrates to p² = p_in² − (λc²q²/d)·x.
    let drop = cfg.friction * c2 * q_init * q_init / cfg.diameter_m;
    let mut p = Vec::with_capacity(m + 1);
    for &xi in x {
        let sq = p_in * p_in - drop * xi;
        if sq <= 0.0 {
            return Err(Error::ChokedFlow { x_m: xi, q: q_init });
        }
        p.push(sq.sqrt());
    }

    let d = g.diff();
    // friction term λq²c²/(2d·p)
    let fric = cfg.friction * q_init * q_init * c2 / (2.0 * cfg.diameter_m);
    let residual = |p: &[f64]| -> DVector<f64> {
        DVector::from_fn(m, |i, _| g.derivative_at(i, p) + fric / p[i])
    };
    let scale = p_in * d.row(0).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut converged = false;
    let mut res_norm = f64::INFINITY;
    for _ in 0..STEADY_MAX_ITERS {
        let r = residual(&p);
        res_norm = r.amax();
        if !res_norm.is_finite() {
            return Err(Error::NumericalFailure("non-finite steady residual".into()));
        }
        let jac = DMatrix::from_fn(m, m, |i, col| {
            let j = col + 1;
            let mut v = d[(i, j)];
            if i == j {
                v -= fric / (p[i] * p[i]);
            }
            v
        });
        let step = jac
            .lu()
            .solve(&(-r))
            .ok_or_else(|| Error::NumericalFailure("singular steady Jacobian".into()))?;
        for (pi, dp) in p[1..].iter_mut().zip(step.iter()) {
            *pi += dp;
        }
        if let Some(i) = p.iter().position(|v| *v <= 0.0) {
            return Err(Error::ChokedFlow { x_m: x[i], q: q_init });
        }
        if step.amax() <= 1e-14 * p_in {
            res_norm = residual(&p).amax();
            converged = res_norm <= 1e-10 * scale.max(f64::MIN_POSITIVE) || q_init == 0.0;
            break;
        }
    }
    if !converged {
        return Err(Error::SteadySolveFailure {
            iterations: STEADY_MAX_ITERS,
            residual: res_norm,
        });
    }

    let mut rho1: Vec<f64> = p.iter().map(|pi| pi * s1 / source).collect();
    let mut rho2: Vec<f64> = p.iter().map(|pi| pi * s2 / source).collect();
    rho1[0] = c.mu_bar * s1;
    rho2[0] = c.mu_bar * s2;
    Ok(SimState {
        t_s: 0.0,
        rho1,
        rho2,
    })
}

/// Closed-form outlet-profile oracle `p(x) = sqrt((μ̄p̄)² − λc²q²x/d)` for a
/// uniform mixture.
pub fn steady_pressure_oracle(
    f: &ForcingParams,
    c: &ControlParams,
    cfg: &PipeConfig,
    q: f64,
    x_m: f64,
) -> Option<f64> {
    let gamma = f.gamma_bar;
    let (s1, s2) = inlet_partial_densities(gamma, cfg);
    let c2 = cfg.source_pressure_pa / (s1 + s2);
    let p_in = c.mu_bar * cfg.source_pressure_pa;
    let sq = p_in * p_in - cfg.friction * c2 * q * q * x_m / cfg.diameter_m;
    (sq > 0.0).then(|| sq.sqrt())
}
