//! Transient flow of a natural-gas/hydrogen mixture in a single pipe under
//! periodic inlet-concentration forcing.
//!
//! The crate discretizes the isothermal two-gas flow equations on a
//! Chebyshev grid, integrates the resulting stiff system with an adaptive
//! implicit scheme, measures trajectory divergence to classify chaotic
//! responses, and runs resumable parameter sweeps over forcing frequency,
//! amplitude and feedback gain.

pub mod chaos;
pub mod chebyshev;
pub mod error;
pub mod integrator;
pub mod interface;
pub mod model;
pub mod spline;
pub mod sweep;
pub mod units;

pub use chaos::{ChaosExperimentConfig, ChaosResult, Scenario};
pub use chebyshev::{build_grid, GridOperators};
pub use error::{Error, Result};
pub use integrator::{IntegratorConfig, Trajectory};
pub use model::{ControlParams, ForcingParams, PipeConfig, PipeModel, SimState};
pub use sweep::{SweepPlan, SweepRecord, SweepSummary};
pub use interface::{InterfaceCurve, KappaStar};
