//! Uniform time grids, sampled paths and the trapezoidal quadratures shared
//! by every module.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Uniform grid `t_k = t0 + k * dt`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !t0.is_finite() {
            return Err(Error::InvalidParameter(format!("grid start {t0} is not finite")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("grid step {dt} must be positive")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter("grid needs at least one step".into()));
        }
        Ok(Self { t0, dt, n_steps })
    }

    /// Grid with `n_steps` equal steps spanning `[start, end]`.
    pub fn spanning(start: f64, end: f64, n_steps: usize) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(Error::InvalidParameter(format!(
                "interval [{start}, {end}] is empty or not finite"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter("grid needs at least one step".into()));
        }
        Self::new(start, (end - start) / n_steps as f64, n_steps)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.node(self.n_steps)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(move |k| self.node(k))
    }

    /// Slack used when deciding whether a time lies on the grid's interval.
    fn slack(&self) -> f64 {
        1e-9 * self.dt
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t0 - self.slack() && t <= self.end() + self.slack()
    }

    /// True when the grid starts at `start` and ends at `end` up to rounding.
    pub fn covers(&self, start: f64, end: f64) -> bool {
        let tol = 1e-9 * (self.dt + libm::fabs(end - start));
        libm::fabs(self.t0 - start) <= tol && libm::fabs(self.end() - end) <= tol
    }

    /// Cell index and fractional offset for linear interpolation at `t`.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        if !t.is_finite() || !self.contains(t) {
            return Err(Error::Domain(format!(
                "time {t} outside [{}, {}]",
                self.t0,
                self.end()
            )));
        }
        let x = ((t - self.t0) / self.dt).clamp(0.0, self.n_steps as f64);
        let k = (libm::floor(x) as usize).min(self.n_steps - 1);
        Ok((k, x - k as f64))
    }
}

/// A real function sampled at every node of a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SampledPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "path value at node {k} is not finite"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn constant(grid: TimeGrid, value: f64) -> Result<Self> {
        Self::new(grid, alloc::vec![value; grid.len()])
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            grid,
            values: alloc::vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Linear interpolation between the two nodes bracketing `t`.
    pub fn at(&self, t: f64) -> Result<f64> {
        let (k, frac) = self.grid.locate(t)?;
        Ok(lerp(self.values[k], self.values[k + 1], frac))
    }

    /// Applies `f` node by node.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn ensure_same_grid(&self, other: &SampledPath) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch("paths are sampled on different grids".into()));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &SampledPath) -> Result<f64> {
        self.ensure_same_grid(other)?;
        Ok(max_abs_diff(&self.values, &other.values))
    }
}

pub(crate) fn lerp(a: f64, b: f64, frac: f64) -> f64 {
    a + (b - a) * frac
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| libm::fabs(x - y))
        .fold(0.0, f64::max)
}

/// Running trapezoid `I_k = ∫_{t_0}^{t_k} f` with `I_0 = 0`.
pub fn cumulative_trapezoid(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * dt * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Running trapezoid of the memory kernel, `∫_{t_0}^{t_k} (t_k - u) f(u) du`.
///
/// Evaluated as `s_k I0_k - I1_k` with `I0` the running trapezoid of `f`,
/// `I1` the running trapezoid of `s f` and `s = u - t_0`; this is the
/// composite trapezoid on the kernel `(t_k - u) f(u)` itself.
pub fn memory_integral(values: &[f64], dt: f64) -> Vec<f64> {
    let i0 = cumulative_trapezoid(values, dt);
    let weighted: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(k, v)| k as f64 * dt * v)
        .collect();
    let i1 = cumulative_trapezoid(&weighted, dt);
    i0.iter()
        .zip(&i1)
        .enumerate()
        .map(|(k, (a, b))| k as f64 * dt * a - b)
        .collect()
}

/// Full trapezoid over all samples.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            dt * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}
