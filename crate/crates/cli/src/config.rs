//! Flat run configuration in user units (km, MPa, cyc/hr, hr).

use std::path::Path;

use blendchaos::chaos::{ChaosExperimentConfig, Scenario};
use blendchaos::integrator::{IntegratorConfig, Positivity};
use blendchaos::model::{ControlParams, ForcingParams, PipeConfig};
use blendchaos::units;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub length_km: f64,
    pub diameter_m: f64,
    pub friction: f64,
    pub sigma1_mps: f64,
    pub sigma2_mps: f64,
    pub source_pressure_mpa: f64,
    pub withdrawal_flux_kg_m2s: f64,

    pub omega_cyc_per_hr: f64,
    pub kappa: f64,
    pub gamma_bar: f64,

    pub mu_bar: f64,
    pub mu_m2s_per_kg: f64,

    pub rel_tol: f64,
    pub abs_tol_kg_m3: f64,
    pub max_step_s: f64,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub positivity: Positivity,

    pub delta_q_kg_m2s: f64,
    pub early_window_start: f64,
    pub early_window_end: f64,
    pub late_window_start: f64,
    pub late_window_end: f64,
    pub chaos_threshold: f64,
    pub log_floor: f64,

    pub order: usize,
    pub horizon_hr: f64,
    pub samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_scenario(&Scenario::default())
    }
}

/// Configuration problem tied to one key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.key {
            Some(k) => write!(f, "config key `{k}`: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn key_error(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: Some(key.to_string()),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            length_km: units::m_to_km(s.pipe.length_m),
            diameter_m: s.pipe.diameter_m,
            friction: s.pipe.friction,
            sigma1_mps: s.pipe.sigma1_mps,
            sigma2_mps: s.pipe.sigma2_mps,
            source_pressure_mpa: units::pa_to_mpa(s.pipe.source_pressure_pa),
            withdrawal_flux_kg_m2s: s.pipe.withdrawal_flux,
            omega_cyc_per_hr: s.forcing.omega_cyc_per_hr,
            kappa: s.forcing.kappa,
            gamma_bar: s.forcing.gamma_bar,
            mu_bar: s.control.mu_bar,
            mu_m2s_per_kg: s.control.mu,
            rel_tol: s.integrator.rel_tol,
            abs_tol_kg_m3: s.integrator.abs_tol,
            max_step_s: s.integrator.max_step_s,
            newton_tol: s.integrator.newton_tol,
            max_newton_iters: s.integrator.max_newton_iters,
            positivity: s.integrator.positivity,
            delta_q_kg_m2s: s.chaos.delta_q,
            early_window_start: s.chaos.early_window[0],
            early_window_end: s.chaos.early_window[1],
            late_window_start: s.chaos.late_window[0],
            late_window_end: s.chaos.late_window[1],
            chaos_threshold: s.chaos.threshold,
            log_floor: s.chaos.log_floor,
            order: s.order,
            horizon_hr: units::s_to_hr(s.horizon_s),
            samples: s.samples,
        }
    }

    /// SI scenario without validation.
    pub fn to_scenario_unchecked(&self) -> Scenario {
        Scenario {
            pipe: PipeConfig {
                length_m: units::km_to_m(self.length_km),
                diameter_m: self.diameter_m,
                friction: self.friction,
                sigma1_mps: self.sigma1_mps,
                sigma2_mps: self.sigma2_mps,
                source_pressure_pa: units::mpa_to_pa(self.source_pressure_mpa),
                withdrawal_flux: self.withdrawal_flux_kg_m2s,
            },
            forcing: ForcingParams {
                omega_cyc_per_hr: self.omega_cyc_per_hr,
                kappa: self.kappa,
                gamma_bar: self.gamma_bar,
            },
            control: ControlParams {
                mu_bar: self.mu_bar,
                mu: self.mu_m2s_per_kg,
            },
            integrator: IntegratorConfig {
                rel_tol: self.rel_tol,
                abs_tol: self.abs_tol_kg_m3,
                max_step_s: self.max_step_s,
                newton_tol: self.newton_tol,
                max_newton_iters: self.max_newton_iters,
                positivity: self.positivity,
            },
            chaos: ChaosExperimentConfig {
                delta_q: self.delta_q_kg_m2s,
                early_window: [self.early_window_start, self.early_window_end],
                late_window: [self.late_window_start, self.late_window_end],
                threshold: self.chaos_threshold,
                log_floor: self.log_floor,
            },
            order: self.order,
            horizon_s: units::hr_to_s(self.horizon_hr),
            samples: self.samples,
        }
    }

    /// Checks every key, then the assembled scenario.
    pub fn to_scenario(&self) -> Result<Scenario, ConfigError> {
        self.validate()?;
        let s = self.to_scenario_unchecked();
        s.validate().map_err(|e| ConfigError {
            key: None,
            message: e.to_string(),
        })?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("length_km", self.length_km),
            ("diameter_m", self.diameter_m),
            ("friction", self.friction),
            ("sigma1_mps", self.sigma1_mps),
            ("sigma2_mps", self.sigma2_mps),
            ("source_pressure_mpa", self.source_pressure_mpa),
            ("mu_bar", self.mu_bar),
            ("rel_tol", self.rel_tol),
            ("abs_tol_kg_m3", self.abs_tol_kg_m3),
            ("max_step_s", self.max_step_s),
            ("newton_tol", self.newton_tol),
            ("delta_q_kg_m2s", self.delta_q_kg_m2s),
            ("chaos_threshold", self.chaos_threshold),
            ("log_floor", self.log_floor),
            ("horizon_hr", self.horizon_hr),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(key_error(key, format!("must be positive and finite, got {v}")));
            }
        }
        let non_negative = [
            ("withdrawal_flux_kg_m2s", self.withdrawal_flux_kg_m2s),
            ("omega_cyc_per_hr", self.omega_cyc_per_hr),
            ("mu_m2s_per_kg", self.mu_m2s_per_kg),
        ];
        for (key, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(key_error(key, format!("must be >= 0, got {v}")));
            }
        }
        if self.sigma2_mps <= self.sigma1_mps {
            return Err(key_error("sigma2_mps", "must exceed sigma1_mps"));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(key_error("kappa", format!("must lie in [0, 1], got {}", self.kappa)));
        }
        if !(self.gamma_bar > 0.0 && self.gamma_bar < 1.0) {
            return Err(key_error("gamma_bar", format!("must lie in (0, 1), got {}", self.gamma_bar)));
        }
        if self.gamma_bar * (1.0 + self.kappa) > 1.0 {
            return Err(key_error("gamma_bar", "gamma_bar * (1 + kappa) exceeds 1"));
        }
        if self.mu_bar < 1.0 {
            return Err(key_error("mu_bar", format!("must be >= 1, got {}", self.mu_bar)));
        }
        if self.newton_tol >= self.rel_tol {
            return Err(key_error("newton_tol", "must be smaller than rel_tol"));
        }
        if self.max_newton_iters == 0 {
            return Err(key_error("max_newton_iters", "must be >= 1"));
        }
        for (key, v) in [
            ("early_window_start", self.early_window_start),
            ("early_window_end", self.early_window_end),
            ("late_window_start", self.late_window_start),
            ("late_window_end", self.late_window_end),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(key_error(key, format!("must be a fraction in [0, 1], got {v}")));
            }
        }
        if self.order < 2 {
            return Err(key_error("order", format!("must be >= 2, got {}", self.order)));
        }
        if self.samples < 2 {
            return Err(key_error("samples", format!("must be >= 2, got {}", self.samples)));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let key = unknown_key(&message).or_else(|| span_key(text, e.span()));
            ConfigError { key, message }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            key: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::from_toml_str(&text)
    }

    #[cfg(test)]
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }
}

fn unknown_key(message: &str) -> Option<String> {
    let rest = message.strip_prefix("unknown field `")?;
    rest.split('`').next().map(str::to_string)
}

/// Key on the line an error span points into.
fn span_key(text: &str, span: Option<std::ops::Range<usize>>) -> Option<String> {
    let start = span?.start.min(text.len());
    let line_start = text[..start].rfind('\n').map_or(0, |i| i + 1);
    let line = text[line_start..].lines().next()?;
    let key = line.split('=').next()?.trim();
    (!key.is_empty() && !key.starts_with('#')).then(|| key.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ulps(a: f64, b: f64) -> u64 {
        (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
    }

    #[test]
    fn defaults_are_the_baseline_values() {
        let c = RunConfig::default();
        assert_eq!(c.mu_bar, 1.75);
        assert_eq!(c.source_pressure_mpa, 4.0);
        assert_eq!(c.withdrawal_flux_kg_m2s, 75.0);
        assert_eq!(c.horizon_hr, 100.0);
        assert_eq!(c.length_km, 50.0);
        assert_eq!(c.diameter_m, 0.5);
        assert_eq!(c.friction, 0.011);
        assert_eq!(c.sigma1_mps, 338.0);
        assert_eq!(c.sigma2_mps, 4.0 * 338.0);
        assert_eq!(c.gamma_bar, 0.2);
        assert_eq!(c.order, 16);
        assert_eq!(c.samples, 10_000);
    }

    #[test]
    fn unit_conversion_round_trips() {
        let c = RunConfig {
            length_km: 37.3,
            source_pressure_mpa: 4.123456789,
            horizon_hr: 77.7,
            ..RunConfig::default()
        };
        let back = RunConfig::from_scenario(&c.to_scenario().unwrap());
        assert!(ulps(back.length_km, c.length_km) <= 4);
        assert!(ulps(back.source_pressure_mpa, c.source_pressure_mpa) <= 4);
        assert!(ulps(back.horizon_hr, c.horizon_hr) <= 4);
        assert_eq!(back.samples, c.samples);
    }

    #[test]
    fn toml_round_trips() {
        let c = RunConfig {
            kappa: 0.3,
            positivity: Positivity::Species,
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = RunConfig::from_toml_str("kappa = 0.5\nomega_cyc_per_hr = 1.0\n").unwrap();
        assert_eq!(c.kappa, 0.5);
        assert_eq!(c.mu_bar, 1.75);
    }

    #[test]
    fn errors_name_the_key() {
        let e = RunConfig::from_toml_str("kapa = 0.5\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("kapa"));
        let e = RunConfig::from_toml_str("kappa = 0.5\nsamples = \"many\"\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("samples"));
        let c = RunConfig::from_toml_str("kappa = 1.5\n").unwrap();
        assert_eq!(c.validate().unwrap_err().key.as_deref(), Some("kappa"));
        let c = RunConfig::from_toml_str("sigma2_mps = 100.0\n").unwrap();
        assert_eq!(c.validate().unwrap_err().key.as_deref(), Some("sigma2_mps"));
    }
}
