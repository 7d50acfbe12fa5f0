//! Shape-preserving piecewise-cubic Hermite interpolation (Fritsch–Carlson).

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneSpline {
    /// Builds the interpolant through `(x[k], y[k])`; `x` must be strictly
    /// increasing with at least two knots.
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n != y.len() {
            return Err(invalid("knot abscissae and ordinates differ in length"));
        }
        if n < 2 {
            return Err(invalid("monotone spline needs at least 2 knots"));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(invalid("knots must be finite"));
        }
        if let Some(k) = x.windows(2).position(|w| w[1] <= w[0]) {
            return Err(invalid(format!(
                "knot abscissae must be strictly increasing (x[{k}] = {}, x[{}] = {})",
                x[k],
                k + 1,
                x[k + 1]
            )));
        }

        let secant: Vec<f64> = (0..n - 1)
            .map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k]))
            .collect();

        let mut m = vec![0.0; n];
        m[0] = secant[0];
        m[n - 1] = secant[n - 2];
        for k in 1..n - 1 {
            let (a, b) = (secant[k - 1], secant[k]);
            m[k] = if a * b > 0.0 { 0.5 * (a + b) } else { 0.0 };
        }

        for k in 0..n - 1 {
            let d = secant[k];
            if d == 0.0 {
                m[k] = 0.0;
                m[k + 1] = 0.0;
                continue;
            }
            let alpha = m[k] / d;
            let beta = m[k + 1] / d;
            let r2 = alpha * alpha + beta * beta;
            if r2 > 9.0 {
                let tau = 3.0 / r2.sqrt();
                m[k] = tau * alpha * d;
                m[k + 1] = tau * beta * d;
            }
        }

        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            slopes: m,
        })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    /// Value at `t`; arguments outside the knot range are clamped to it.
    pub fn eval(&self, t: f64) -> f64 {
        let (lo, hi) = self.domain();
        let t = t.clamp(lo, hi);
        let k = match self.x.partition_point(|v| *v <= t) {
            0 => 0,
            p => (p - 1).min(self.x.len() - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        if s == 0.0 {
            return self.y[k];
        }
        if s == 1.0 {
            return self.y[k + 1];
        }
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * self.y[k] + h10 * h * self.slopes[k] + h01 * self.y[k + 1] + h11 * h * self.slopes[k + 1]
    }

    /// `count` evenly spaced samples across the knot range.
    pub fn sample(&self, count: usize) -> Vec<(f64, f64)> {
        let (lo, hi) = self.domain();
        if count < 2 {
            return vec![(lo, self.eval(lo))];
        }
        (0..count)
            .map(|i| {
                let t = lo + (hi - lo) * i as f64 / (count - 1) as f64;
                (t, self.eval(t))
            })
            .collect()
    }
}

/// Shorthand for [`MonotoneSpline::new`].
pub fn monotone_spline(x: &[f64], y: &[f64]) -> Result<MonotoneSpline> {
    MonotoneSpline::new(x, y)
}
