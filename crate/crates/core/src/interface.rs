//! Chaotic interface `κ*(ω)`: for each forcing frequency, the amplitude
//! above which every grid amplitude is classified chaotic.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::spline::MonotoneSpline;
use crate::sweep::{JobStatus, SweepRecord};

/// Outcome of one grid cell as seen by the extraction rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    /// Measured chaos value C.
    Measured(f64),
    /// Known non-chaotic without a measurement (constant forcing).
    NonChaotic,
    /// Failed or missing simulation.
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "kappa_star", rename_all = "snake_case")]
pub enum KappaStar {
    Value(f64),
    /// No grid amplitude exceeds the threshold.
    NoChaosInRange,
    /// A failed or missing cell makes the column undecidable.
    Incomplete,
}

impl KappaStar {
    pub fn value(&self) -> Option<f64> {
        match self {
            KappaStar::Value(v) => Some(*v),
            _ => None,
        }
    }

    pub fn status_label(&self) -> &'static str {
        match self {
            KappaStar::Value(_) => "ok",
            KappaStar::NoChaosInRange => "no_chaos_in_range",
            KappaStar::Incomplete => "incomplete",
        }
    }
}

/// Applies the scan-from-above rule to one column. `kappas` must be strictly
/// increasing; a cell is chaotic when `C > threshold`.
pub fn kappa_star(kappas: &[f64], cells: &[Cell], threshold: f64) -> Result<KappaStar> {
    if kappas.is_empty() || kappas.len() != cells.len() {
        return Err(invalid("column is empty or has mismatched lengths"));
    }
    if kappas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("kappa grid must be strictly increasing"));
    }
    let mut chaotic = Vec::with_capacity(cells.len());
    for c in cells {
        chaotic.push(match c {
            Cell::Measured(v) => *v > threshold,
            Cell::NonChaotic => false,
            Cell::Unknown => return Ok(KappaStar::Incomplete),
        });
    }
    if !chaotic.iter().any(|c| *c) {
        return Ok(KappaStar::NoChaosInRange);
    }
    match chaotic.iter().rposition(|c| !*c) {
        Some(i) => Ok(KappaStar::Value(kappas[i])),
        None => Ok(KappaStar::Value(kappas[0])),
    }
}

/// `κ*(ω)` on the grid for one gain, plus the shape-preserving curve through
/// the decided columns.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceCurve {
    pub mu: f64,
    pub omegas: Vec<f64>,
    pub kappa_star: Vec<KappaStar>,
    /// Present when at least two columns have a value.
    pub spline: Option<MonotoneSpline>,
}

impl InterfaceCurve {
    pub fn knots(&self) -> (Vec<f64>, Vec<f64>) {
        self.omegas
            .iter()
            .zip(&self.kappa_star)
            .filter_map(|(w, k)| k.value().map(|v| (*w, v)))
            .unzip()
    }
}

fn cell_of(rec: &SweepRecord) -> Cell {
    match rec.status {
        JobStatus::Done => rec.c.map(Cell::Measured).unwrap_or(Cell::Unknown),
        JobStatus::Skipped => Cell::NonChaotic,
        JobStatus::Failed => Cell::Unknown,
    }
}

/// Extracts the interface of gain `mu` from sweep records. Cells missing
/// from `records` count as unknown.
pub fn interface_extract(
    records: &[SweepRecord],
    mu: f64,
    omega_grid: &[f64],
    kappa_grid: &[f64],
    threshold: f64,
) -> Result<InterfaceCurve> {
    if omega_grid.is_empty() || kappa_grid.is_empty() {
        return Err(invalid("empty grid"));
    }
    let lookup = |w: f64, k: f64| {
        records
            .iter()
            .find(|r| r.mu == mu && r.omega_cyc_per_hr == w && r.kappa == k)
            .map(cell_of)
            .unwrap_or(Cell::Unknown)
    };
    let mut stars = Vec::with_capacity(omega_grid.len());
    for &w in omega_grid {
        let cells: Vec<Cell> = kappa_grid.iter().map(|&k| lookup(w, k)).collect();
        stars.push(kappa_star(kappa_grid, &cells, threshold)?);
    }
    let mut curve = InterfaceCurve {
        mu,
        omegas: omega_grid.to_vec(),
        kappa_star: stars,
        spline: None,
    };
    let (x, y) = curve.knots();
    if x.len() >= 2 {
        curve.spline = Some(MonotoneSpline::new(&x, &y)?);
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const KAPPAS: [f64; 5] = [0.5, 0.625, 0.75, 0.875, 1.0];

    fn measured(v: &[f64]) -> Vec<Cell> {
        v.iter().map(|c| Cell::Measured(*c)).collect()
    }

    #[test]
    fn hand_worked_column() {
        let k = kappa_star(&KAPPAS, &measured(&[0.1, 0.2, 0.7, 0.8, 0.9]), 0.5).unwrap();
        assert_eq!(k, KappaStar::Value(0.625));
    }

    #[test]
    fn quiet_column_is_sentinel() {
        let k = kappa_star(&KAPPAS, &measured(&[0.1, 0.5, 0.2, -3.0, 0.4]), 0.5).unwrap();
        assert_eq!(k, KappaStar::NoChaosInRange);
    }

    #[test]
    fn fully_chaotic_column_is_lower_edge() {
        let k = kappa_star(&KAPPAS, &measured(&[0.6, 0.7, 0.8, 0.9, 1.0]), 0.5).unwrap();
        assert_eq!(k, KappaStar::Value(0.5));
    }

    #[test]
    fn failed_cell_invalidates_column() {
        let mut cells = measured(&[0.1, 0.2, 0.7, 0.8, 0.9]);
        cells[1] = Cell::Unknown;
        assert_eq!(kappa_star(&KAPPAS, &cells, 0.5).unwrap(), KappaStar::Incomplete);
    }

    #[test]
    fn top_non_chaotic_cell_caps_interface() {
        let k = kappa_star(&KAPPAS, &measured(&[0.1, 0.9, 0.7, 0.8, 0.2]), 0.5).unwrap();
        assert_eq!(k, KappaStar::Value(1.0));
    }

    #[test]
    fn empty_column_is_rejected() {
        assert!(kappa_star(&[], &[], 0.5).is_err());
    }

    fn rank(k: KappaStar) -> f64 {
        match k {
            KappaStar::Value(v) => v,
            KappaStar::NoChaosInRange => f64::INFINITY,
            KappaStar::Incomplete => f64::NAN,
        }
    }

    proptest! {
        #[test]
        fn raising_threshold_never_lowers_kappa_star(
            cs in prop::collection::vec(-2.0f64..2.0, 5),
            t1 in -1.0f64..1.5,
            dt in 0.0f64..1.0,
        ) {
            let cells = measured(&cs);
            let a = rank(kappa_star(&KAPPAS, &cells, t1).unwrap());
            let b = rank(kappa_star(&KAPPAS, &cells, t1 + dt).unwrap());
            prop_assert!(b >= a);
        }
    }
}
