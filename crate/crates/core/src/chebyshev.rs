//! Chebyshev extrema grid on `[0, ℓ]` and the matching first-derivative
//! collocation matrix.
//!
//! Nodes are `x_i = ℓ/2 (1 − cos(iπ/M))`, `i = 0..=M`. The matrix entry
//! `diff[(i, j)]` is the derivative of the j-th Lagrange basis polynomial
//! evaluated at node `i`, so `diff * f(x)` returns `f'(x)` at every node for
//! any polynomial `f` of degree at most `M`.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

/// Collocation nodes and differentiation matrix for one polynomial order and
/// pipe length. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOperators {
    order: usize,
    length_m: f64,
    nodes_m: Vec<f64>,
    diff: DMatrix<f64>,
}

impl GridOperators {
    /// Builds the grid of order `order` (M) on a pipe of length `length_m`.
    pub fn new(order: usize, length_m: f64) -> Result<Self> {
        if order < 1 {
            return Err(invalid(format!("polynomial order must be >= 1, got {order}")));
        }
        if !(length_m.is_finite() && length_m > 0.0) {
            return Err(invalid(format!("pipe length must be positive, got {length_m}")));
        }

        let unit = unit_nodes(order);
        let reference = lagrange_diff(&unit);
        // The matrix is assembled on [0, 1] and rescaled so that stretching the
        // pipe rescales every entry by exactly the inverse factor.
        let diff = reference / length_m;
        let nodes_m = unit.iter().map(|xi| xi * length_m).collect();

        Ok(Self {
            order,
            length_m,
            nodes_m,
            diff,
        })
    }

    /// Polynomial order M; the grid has M + 1 nodes.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.order + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length_m(&self) -> f64 {
        self.length_m
    }

    pub fn nodes_m(&self) -> &[f64] {
        &self.nodes_m
    }

    /// First-derivative weights in 1/m, row index = evaluation node.
    pub fn diff(&self) -> &DMatrix<f64> {
        &self.diff
    }

    /// Returns `diff · values`.
    pub fn apply_derivative(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.len() {
            return Err(invalid(format!(
                "expected {} nodal values, got {}",
                self.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("nodal values must be finite"));
        }
        let mut out = vec![0.0; self.len()];
        self.derivative_into(values, &mut out);
        Ok(out)
    }

    /// Unchecked variant of [`apply_derivative`](Self::apply_derivative) used on hot paths.
    pub(crate) fn derivative_into(&self, values: &[f64], out: &mut [f64]) {
        let n = self.len();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let mut acc = 0.0;
            for (j, v) in values.iter().enumerate() {
                acc += self.diff[(i, j)] * v;
            }
            *o = acc;
        }
    }

    /// Derivative at a single node.
    pub(crate) fn derivative_at(&self, row: usize, values: &[f64]) -> f64 {
        values
            .iter()
            .enumerate()
            .map(|(j, v)| self.diff[(row, j)] * v)
            .sum()
    }

    pub fn apply_derivative_vector(&self, values: &DVector<f64>) -> Result<DVector<f64>> {
        self.apply_derivative(values.as_slice()).map(DVector::from_vec)
    }
}

/// Shorthand for [`GridOperators::new`].
pub fn build_grid(order: usize, length_m: f64) -> Result<GridOperators> {
    GridOperators::new(order, length_m)
}

fn unit_nodes(order: usize) -> Vec<f64> {
    let m = order as f64;
    (0..=order)
        .map(|i| 0.5 * (1.0 - (i as f64 * std::f64::consts::PI / m).cos()))
        .collect()
}

fn lagrange_diff(x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            (0..n)
                .filter(|&k| k != j)
                .map(|k| 1.0 / (x[j] - x[k]))
                .sum()
        } else {
            let prod: f64 = (0..n)
                .filter(|&k| k != i && k != j)
                .map(|k| (x[i] - x[k]) / (x[j] - x[k]))
                .product();
            prod / (x[j] - x[i])
        }
    })
}
