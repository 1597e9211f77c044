//! Piecewise-linear densities on a 1-D grid with exact-to-grid inverse-CDF
//! sampling. Used by the bridging particle filter to sample stage densities
//! and step posteriors deterministically.

use crate::error::{Error, Result};

/// A non-negative density tabulated on an increasing grid, interpreted as
/// piecewise linear between nodes. The CDF is then piecewise quadratic and
/// inverts in closed form per segment.
#[derive(Clone, Debug)]
pub struct GridDist {
    x: Vec<f64>,
    pdf: Vec<f64>,
    cdf: Vec<f64>,
    mass: f64,
}

impl GridDist {
    pub fn new(x: Vec<f64>, pdf: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || x.len() != pdf.len() {
            return Err(Error::InvalidArgument(
                "grid needs at least two nodes and matching pdf values".into(),
            ));
        }
        for w in x.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidArgument(
                    "grid nodes must be strictly increasing".into(),
                ));
            }
        }
        if pdf.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "pdf values must be finite and non-negative".into(),
            ));
        }
        let mut cdf = Vec::with_capacity(x.len());
        cdf.push(0.0);
        let mut acc = 0.0;
        for i in 1..x.len() {
            acc += 0.5 * (pdf[i] + pdf[i - 1]) * (x[i] - x[i - 1]);
            cdf.push(acc);
        }
        if !(acc > 0.0) || !acc.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "grid mass must be positive and finite, got {acc}"
            )));
        }
        Ok(Self { x, pdf, cdf, mass: acc })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn pdf(&self) -> &[f64] {
        &self.pdf
    }

    /// Trapezoid mass of the (unnormalized) tabulated density.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Inverse CDF of the normalized density at `u` in `[0, 1)`.
    pub fn sample(&self, u: f64) -> f64 {
        let target = u.clamp(0.0, 1.0) * self.mass;
        // cdf[i] <= target < cdf[i+1]
        let i = match self.cdf.partition_point(|c| *c <= target) {
            0 => 0,
            p => (p - 1).min(self.x.len() - 2),
        };
        let r = target - self.cdf[i];
        let dx = self.x[i + 1] - self.x[i];
        let f0 = self.pdf[i];
        let f1 = self.pdf[i + 1];
        let slope = (f1 - f0) / dx;
        // Solve (slope/2) t^2 + f0 t = r for t in [0, dx].
        let t = if slope.abs() * dx < 1e-14 * f0.max(f1) {
            if f0 > 0.0 {
                r / f0
            } else {
                0.0
            }
        } else {
            let disc = (f0 * f0 + 2.0 * slope * r).max(0.0);
            let denom = f0 + disc.sqrt();
            if denom > 0.0 {
                2.0 * r / denom
            } else {
                0.0
            }
        };
        self.x[i] + t.clamp(0.0, dx)
    }

    /// Mean and standard deviation of the normalized density.
    pub fn mean_std(&self) -> (f64, f64) {
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        for i in 1..self.x.len() {
            let dx = self.x[i] - self.x[i - 1];
            m0 += 0.5 * dx * (self.pdf[i] * self.x[i] + self.pdf[i - 1] * self.x[i - 1]);
        }
        let mean = m0 / self.mass;
        for i in 1..self.x.len() {
            let dx = self.x[i] - self.x[i - 1];
            let a = self.pdf[i] * (self.x[i] - mean) * (self.x[i] - mean);
            let b = self.pdf[i - 1] * (self.x[i - 1] - mean) * (self.x[i - 1] - mean);
            m1 += 0.5 * dx * (a + b);
        }
        (mean, (m1 / self.mass).max(0.0).sqrt())
    }
}
