//! Uniform grids and piecewise-linear tabulated functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes `start + k * step` for `k` in `0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    start: f64,
    step: f64,
    count: usize,
}

impl UniformGrid {
    pub fn new(start: f64, step: f64, count: usize) -> Result<Self> {
        if !start.is_finite() || !step.is_finite() || step <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "start {start} and step {step} must be finite with step > 0"
            )));
        }
        if count < 2 {
            return Err(Error::InvalidGrid(format!("count {count} < 2")));
        }
        Ok(Self { start, step, count })
    }

    /// Grid of `count` nodes spanning `[start, end]`.
    pub fn spanning(start: f64, end: f64, count: usize) -> Result<Self> {
        if count < 2 || !(end > start) {
            return Err(Error::InvalidGrid(format!(
                "cannot span [{start}, {end}] with {count} nodes"
            )));
        }
        Self::new(start, (end - start) / (count - 1) as f64, count)
    }

    /// Generator lattice `[0, 10]` with step 0.005.
    pub fn default_generator() -> Self {
        Self {
            start: 0.0,
            step: 0.005,
            count: 2001,
        }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn end(&self) -> f64 {
        self.node(self.count - 1)
    }

    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |k| self.node(k))
    }
}

/// Values on a uniform grid, evaluated by linear interpolation.
///
/// Below the first node the first value is returned; above the last node the
/// function is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedFunction {
    grid: UniformGrid,
    values: Vec<f64>,
}

impl TabulatedFunction {
    pub fn new(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.count() {
            return Err(Error::InvalidTable(format!(
                "{} values for {} nodes",
                values.len(),
                grid.count()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidTable(format!("non-finite value at node {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: UniformGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().map(f).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        let pos = (x - self.grid.start) / self.grid.step;
        if !(pos > 0.0) {
            // also catches NaN positions, which fall back to the first value
            return self.values[0];
        }
        let last = self.grid.count - 1;
        let k = pos.floor() as usize;
        if k >= last {
            // tolerate rounding right at the final node
            return if pos - last as f64 <= 1e-9 {
                self.values[last]
            } else {
                0.0
            };
        }
        let frac = pos - k as f64;
        self.values[k] + frac * (self.values[k + 1] - self.values[k])
    }

    /// Trapezoid integral over the whole grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.grid.step)
    }
}

/// Trapezoid rule on equally spaced samples.
pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            step * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Running trapezoid integral, starting at zero.
pub fn cumulative_trapezoid(values: &[f64], step: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            acc += 0.5 * step * (values[k - 1] + v);
        }
        out.push(acc);
    }
    out
}

/// Inverts a nondecreasing table `cum` sampled on `grid`: the smallest `x`
/// with `cum(x) >= target`, linearly interpolated. `target` must lie within
/// `[cum[0], cum[last]]`.
pub(crate) fn invert_monotone(grid: &UniformGrid, cum: &[f64], target: f64) -> f64 {
    let k = cum.partition_point(|&c| c < target);
    if k == 0 {
        return grid.node(0);
    }
    if k >= cum.len() {
        return grid.end();
    }
    let (lo, hi) = (cum[k - 1], cum[k]);
    let frac = if hi > lo { (target - lo) / (hi - lo) } else { 1.0 };
    grid.node(k - 1) + frac * grid.step()
}

/// Surface area of the unit sphere in `R^k`, `2 pi^{k/2} / Gamma(k/2)`.
pub fn sphere_area(k: usize) -> f64 {
    assert!(k >= 1, "sphere dimension must be positive");
    let half = k as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / statrs::function::gamma::gamma(half)
}
