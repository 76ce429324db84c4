//! Finite-population price formation.
//!
//! With `N` traders and a microstructure kernel `ξ` that does not depend on
//! the lag `u`, the expected formed price adds a term `−∫₀ᵗ ξ_u Λ_u du` to
//! the mean-field formula. Under linear permanent impact `ξ = α/N` and no
//! inventory noise, the average inventory solves a linear second-order
//! boundary-value problem, solved here in closed form.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mfg::{formed_price, ModelParams};
use crate::path::{cumulative_trapezoid, max_abs_diff, memory_integral, SampledPath, TimeGrid};

/// Microstructural impact kernel `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub enum MicroKernel {
    /// `ξ_{t,u} = ξ_t`, sampled on the flow grid.
    ConstantOverU(SampledPath),
    /// `ξ_{t,u} ≡ α/N`.
    ScaledAlphaOverN,
    /// A general two-time kernel, row `k` holding `ξ_{t_k, t_j}` for `j ≤ k`.
    TwoTime(Vec<Vec<f64>>),
}

impl MicroKernel {
    /// Time-only kernel values `ξ_t` on `grid`.
    pub fn reduce(&self, alpha: f64, population: usize, grid: &TimeGrid) -> Result<Vec<f64>> {
        match self {
            MicroKernel::ScaledAlphaOverN => Ok(alloc::vec![alpha / population as f64; grid.len()]),
            MicroKernel::ConstantOverU(path) => {
                if path.grid() != grid {
                    return Err(Error::ShapeMismatch(
                        "kernel and flow are sampled on different grids".into(),
                    ));
                }
                Ok(path.values().to_vec())
            }
            MicroKernel::TwoTime(rows) => {
                if rows.len() != grid.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "kernel has {} rows for {} nodes",
                        rows.len(),
                        grid.len()
                    )));
                }
                let mut out = Vec::with_capacity(rows.len());
                for (k, row) in rows.iter().enumerate() {
                    if row.len() != k + 1 {
                        return Err(Error::ShapeMismatch(format!(
                            "kernel row {k} has {} entries, expected {}",
                            row.len(),
                            k + 1
                        )));
                    }
                    let first = row[0];
                    if row.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidParameter(format!("kernel row {k} is not finite")));
                    }
                    let scale = row.iter().fold(1.0f64, |m, v| m.max(libm::fabs(*v)));
                    if row.iter().any(|v| libm::fabs(v - first) > 1e-12 * scale) {
                        return Err(Error::UnsupportedKernel(format!(
                            "kernel depends on the lag variable in row {k}"
                        )));
                    }
                    out.push(first);
                }
                Ok(out)
            }
        }
    }
}

/// Parameters of the `N`-trader game.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePopParams {
    pub base: ModelParams,
    /// Population size `N ≥ 1`.
    pub population: usize,
    /// Permanent-impact slope `α ≥ 0`.
    pub alpha: f64,
    pub kernel: MicroKernel,
    /// Initial average inventory `E_N(0)`.
    pub mean_inventory0: f64,
}

impl FinitePopParams {
    pub fn new(base: ModelParams, population: usize, alpha: f64, kernel: MicroKernel, mean_inventory0: f64) -> Result<Self> {
        let p = Self {
            base,
            population,
            alpha,
            kernel,
            mean_inventory0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.population == 0 {
            return Err(Error::InvalidParameter("population size must be >= 1".into()));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!("alpha = {} must be >= 0", self.alpha)));
        }
        if !self.mean_inventory0.is_finite() {
            return Err(Error::InvalidParameter("E_N(0) is not finite".into()));
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<&'static str> {
        let mut out = self.base.warnings();
        if self.base.terminal_penalty <= self.alpha / (2.0 * self.population as f64) {
            out.push("A <= alpha/(2N): individual payoffs are not strictly concave");
        }
        out
    }

    /// `α (1 − 1/N)`, the first-order coefficient of the inventory ODE.
    pub fn drift_coefficient(&self) -> f64 {
        self.alpha * (1.0 - 1.0 / self.population as f64)
    }

    /// Same parameters with a different population size.
    pub fn with_population(&self, population: usize) -> Self {
        Self {
            population,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Basis {
    /// `c1 e^{r+ (t − T)} + c2 e^{r− t}`.
    Distinct { r_plus: f64, r_minus: f64 },
    /// `(c1 + c2 t) e^{r t}`.
    Repeated { r: f64 },
}

/// Closed-form solution of `2κE'' + α(1−1/N)E' − 2φE = 0`,
/// `E(0) = E_N(0)`, `κE'(T) + A E(T) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanInventory {
    basis: Basis,
    c1: f64,
    c2: f64,
    horizon: f64,
}

impl MeanInventory {
    pub fn value(&self, t: f64) -> f64 {
        self.eval(t, 0)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.eval(t, 1)
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        self.eval(t, 2)
    }

    fn eval(&self, t: f64, order: u32) -> f64 {
        match self.basis {
            Basis::Distinct { r_plus, r_minus } => {
                let a = self.c1 * libm::pow(r_plus, order as f64) * libm::exp(r_plus * (t - self.horizon));
                let b = self.c2 * libm::pow(r_minus, order as f64) * libm::exp(r_minus * t);
                a + b
            }
            Basis::Repeated { r } => {
                let e = libm::exp(r * t);
                let lin = self.c1 + self.c2 * t;
                match order {
                    0 => lin * e,
                    1 => (self.c2 + r * lin) * e,
                    _ => (2.0 * r * self.c2 + r * r * lin) * e,
                }
            }
        }
    }

    pub fn sample(&self, grid: TimeGrid) -> Result<SampledPath> {
        SampledPath::from_fn(grid, |t| self.value(t))
    }

    /// `Λ = −E'`, from the analytic derivative.
    pub fn order_flow(&self, grid: TimeGrid) -> Result<SampledPath> {
        SampledPath::from_fn(grid, |t| -self.derivative(t))
    }
}

/// Solves the average-inventory boundary-value problem in closed form.
pub fn mean_inventory_bvp(params: &FinitePopParams) -> Result<MeanInventory> {
    params.validate()?;
    let kappa = params.base.kappa;
    let phi = params.base.phi;
    let a = params.base.terminal_penalty;
    let horizon = params.base.horizon;
    let drift = params.drift_coefficient();
    let disc = drift * drift + 16.0 * kappa * phi;
    if disc < 0.0 {
        return Err(Error::UnsupportedRegime(format!(
            "complex characteristic roots (discriminant {disc})"
        )));
    }
    let root = libm::sqrt(disc);
    let r_plus = (-drift + root) / (4.0 * kappa);
    let r_minus = (-drift - root) / (4.0 * kappa);
    let e0 = params.mean_inventory0;

    // Rows: E(0) = e0 and κE'(T) + A E(T) = 0, unknowns (c1, c2).
    let (basis, m) = if libm::fabs(r_plus - r_minus) < 1e-10 * libm::fabs(r_plus).max(1.0) {
        let r = 0.5 * (r_plus + r_minus);
        let er = libm::exp(r * horizon);
        (
            Basis::Repeated { r },
            [
                [1.0, 0.0],
                [(kappa * r + a) * er, (kappa * (1.0 + r * horizon) + a * horizon) * er],
            ],
        )
    } else {
        let ep = libm::exp(-r_plus * horizon);
        let em = libm::exp(r_minus * horizon);
        (
            Basis::Distinct { r_plus, r_minus },
            [[ep, 1.0], [kappa * r_plus + a, (kappa * r_minus + a) * em]],
        )
    };
    let (c1, c2) = solve_2x2(m, [e0, 0.0])?;
    Ok(MeanInventory {
        basis,
        c1,
        c2,
        horizon,
    })
}

/// Gaussian elimination with full pivoting on a 2×2 system.
fn solve_2x2(m: [[f64; 2]; 2], rhs: [f64; 2]) -> Result<(f64, f64)> {
    let scale = m.iter().flatten().fold(0.0f64, |acc, v| acc.max(libm::fabs(*v)));
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if scale == 0.0 || libm::fabs(det) < 1e-14 * scale * scale {
        return Err(Error::DegenerateBvp(format!("boundary determinant {det}")));
    }
    // Pivot on the largest entry.
    let mut best = (0, 0);
    for i in 0..2 {
        for j in 0..2 {
            if libm::fabs(m[i][j]) > libm::fabs(m[best.0][best.1]) {
                best = (i, j);
            }
        }
    }
    let (pi, pj) = best;
    let (oi, oj) = (1 - pi, 1 - pj);
    let factor = m[oi][pj] / m[pi][pj];
    let reduced = m[oi][oj] - factor * m[pi][oj];
    let rhs_reduced = rhs[oi] - factor * rhs[pi];
    let x_other = rhs_reduced / reduced;
    let x_pivot = (rhs[pi] - m[pi][oj] * x_other) / m[pi][pj];
    let mut x = [0.0; 2];
    x[pj] = x_pivot;
    x[oj] = x_other;
    Ok((x[0], x[1]))
}

/// Term-by-term expected formed price in the finite population.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePriceDecomposition {
    pub p0: f64,
    pub total: SampledPath,
    /// `2φ ∫₀ᵗ E_{0,u} du`.
    pub term_inertia: SampledPath,
    /// `−2φ ∫₀ᵗ (t − u) Λ_u du`.
    pub term_memory: SampledPath,
    /// `2κ (Λ_t − Λ_0)`.
    pub term_instant: SampledPath,
    /// `−∫₀ᵗ ξ_u Λ_u du`.
    pub term_micro: SampledPath,
    /// `∫₀ᵗ ε_u du`; identically zero in expectation.
    pub term_noise: SampledPath,
}

/// Expected formed price `E[p^N_t]` for the expected flow `E[Λ^N]`.
///
/// Martingale terms start at zero and drop out in expectation, so the noise
/// term is zero and `E_{0,u}` is the constant `E_N(0)`.
pub fn expected_formed_price(params: &FinitePopParams, flow: &SampledPath, p0: f64) -> Result<FinitePriceDecomposition> {
    params.validate()?;
    if !p0.is_finite() {
        return Err(Error::InvalidParameter(format!("p0 = {p0} is not finite")));
    }
    let grid = *flow.grid();
    let xi = params.kernel.reduce(params.alpha, params.population, &grid)?;
    let lam = flow.values();
    let dt = grid.dt();
    let phi = params.base.phi;
    let kappa = params.base.kappa;

    let memory = memory_integral(lam, dt);
    let weighted: Vec<f64> = xi.iter().zip(lam).map(|(x, l)| x * l).collect();
    let micro = cumulative_trapezoid(&weighted, dt);

    let n = grid.len();
    let mut inertia = Vec::with_capacity(n);
    let mut mem = Vec::with_capacity(n);
    let mut instant = Vec::with_capacity(n);
    let mut micro_term = Vec::with_capacity(n);
    let mut total = Vec::with_capacity(n);
    for k in 0..n {
        let s = k as f64 * dt;
        let a = 2.0 * phi * params.mean_inventory0 * s;
        let b = -2.0 * phi * memory[k];
        let c = 2.0 * kappa * (lam[k] - lam[0]);
        let d = -micro[k];
        inertia.push(a);
        mem.push(b);
        instant.push(c);
        micro_term.push(d);
        total.push(p0 + a + b + c + d);
    }
    Ok(FinitePriceDecomposition {
        p0,
        total: SampledPath::new(grid, total)?,
        term_inertia: SampledPath::new(grid, inertia)?,
        term_memory: SampledPath::new(grid, mem)?,
        term_instant: SampledPath::new(grid, instant)?,
        term_micro: SampledPath::new(grid, micro_term)?,
        term_noise: SampledPath::zeros(grid),
    })
}

/// Outcome of the permanent-impact consistency check.
#[derive(Debug, Clone, PartialEq)]
pub struct PermanentImpactCheck {
    /// `p0 + α (E_N(t) − E_N(0))`.
    pub price: SampledPath,
    /// The expected formed price for `ξ = α/N`, `Λ = −E_N'`.
    pub decomposition: FinitePriceDecomposition,
    /// `max_t |decomposition.total − price|`.
    pub max_gap: f64,
}

/// Under `ξ = α/N`, `σ = 0` and `Λ = −E_N'`, the expected formed price
/// collapses to the permanent-impact price `p0 + α (E_N(t) − E_N(0))`.
pub fn permanent_impact_sanity(params: &FinitePopParams, p0: f64, grid: TimeGrid) -> Result<PermanentImpactCheck> {
    params.validate()?;
    if !grid.covers(0.0, params.base.horizon) {
        return Err(Error::Domain("grid must cover [0, T]".into()));
    }
    let linear = FinitePopParams {
        kernel: MicroKernel::ScaledAlphaOverN,
        ..params.clone()
    };
    let inventory = mean_inventory_bvp(&linear)?;
    let e = inventory.sample(grid)?;
    let e_start = e.first();
    let price = e.map(|v| p0 + params.alpha * (v - e_start))?;
    let flow = inventory.order_flow(grid)?;
    let decomposition = expected_formed_price(&linear, &flow, p0)?;
    let max_gap = max_abs_diff(decomposition.total.values(), price.values());
    Ok(PermanentImpactCheck {
        price,
        decomposition,
        max_gap,
    })
}

/// Expected order flow as a function of the population size.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowFamily {
    /// `E[Λ^N] = Λ` for every `N`.
    Fixed(SampledPath),
    /// `E[Λ^N] = Λ + (scale / N) h`.
    InverseNPerturbation {
        limit: SampledPath,
        shape: SampledPath,
        scale: f64,
    },
}

impl FlowFamily {
    pub fn flow(&self, population: usize) -> Result<SampledPath> {
        match self {
            FlowFamily::Fixed(path) => Ok(path.clone()),
            FlowFamily::InverseNPerturbation { limit, shape, scale } => {
                limit.ensure_same_grid(shape)?;
                let w = scale / population as f64;
                let values = limit
                    .values()
                    .iter()
                    .zip(shape.values())
                    .map(|(l, h)| l + w * h)
                    .collect();
                SampledPath::new(*limit.grid(), values)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergencePoint {
    pub population: usize,
    /// `sup_t |E[p^N_t] − p(t)|`.
    pub error: f64,
}

/// Sup-norm gap between the finite-population expected price (with
/// `ξ = α/N`) and the mean-field formed price of `limit_flow`, per `N`.
pub fn convergence_errors(
    template: &FinitePopParams,
    populations: &[usize],
    family: &FlowFamily,
    limit_flow: &SampledPath,
    p0: f64,
) -> Result<Vec<ConvergencePoint>> {
    if populations.is_empty() {
        return Err(Error::Domain("no population sizes given".into()));
    }
    let mfg_params = ModelParams {
        mean_inventory0: template.mean_inventory0,
        ..template.base
    };
    let limit_price = formed_price(&mfg_params, limit_flow, p0)?;
    populations
        .iter()
        .map(|&n| {
            let params = FinitePopParams {
                population: n,
                kernel: MicroKernel::ScaledAlphaOverN,
                ..template.clone()
            };
            let flow = family.flow(n)?;
            let dec = expected_formed_price(&params, &flow, p0)?;
            Ok(ConvergencePoint {
                population: n,
                error: dec.total.max_abs_diff(&limit_price)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(kappa: f64, phi: f64, a: f64, t: f64) -> ModelParams {
        ModelParams::new(kappa, phi, a, 0.0, t, 0.0).unwrap()
    }

    fn fp(base: ModelParams, n: usize, alpha: f64, e0: f64) -> FinitePopParams {
        FinitePopParams::new(base, n, alpha, MicroKernel::ScaledAlphaOverN, e0).unwrap()
    }

    #[test]
    fn zero_initial_inventory_stays_zero() {
        let sol = mean_inventory_bvp(&fp(base(1.0, 1.0, 1.0, 1.0), 10, 0.5, 0.0)).unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(sol.value(t), 0.0);
        }
    }

    #[test]
    fn no_penalties_keep_inventory_constant() {
        let sol = mean_inventory_bvp(&fp(base(1.0, 0.0, 0.0, 2.0), 4, 0.8, 1.5)).unwrap();
        for t in [0.0, 0.7, 2.0] {
            assert!((sol.value(t) - 1.5).abs() < 1e-14);
        }
        // Repeated zero root: α = 0 and φ = 0.
        let sol = mean_inventory_bvp(&fp(base(1.0, 0.0, 0.0, 2.0), 4, 0.0, 1.5)).unwrap();
        assert!((sol.value(1.3) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn repeated_root_linear_solution() {
        // α = 0, φ = 0, A = 1, κ = 1, T = 1: E = E0 (1 − t/2).
        let sol = mean_inventory_bvp(&fp(base(1.0, 0.0, 1.0, 1.0), 3, 0.0, 2.0)).unwrap();
        for t in [0.0, 0.25, 1.0] {
            assert!((sol.value(t) - 2.0 * (1.0 - t / 2.0)).abs() < 1e-14);
        }
        assert!((1.0 * sol.derivative(1.0) + sol.value(1.0)).abs() < 1e-14);
    }

    #[test]
    fn singular_boundary_system_is_reported() {
        // φ = 0, α = 0, κ + A T = 0 makes the repeated-root system singular.
        let b = ModelParams::new(1.0, 0.0, -1.0, 0.0, 1.0, 0.0).unwrap();
        let p = FinitePopParams::new(b, 2, 0.0, MicroKernel::ScaledAlphaOverN, 1.0).unwrap();
        assert!(matches!(mean_inventory_bvp(&p), Err(Error::DegenerateBvp(_))));
    }

    #[test]
    fn invalid_population_rejected() {
        assert!(FinitePopParams::new(base(1.0, 1.0, 1.0, 1.0), 0, 1.0, MicroKernel::ScaledAlphaOverN, 0.0).is_err());
        assert!(FinitePopParams::new(base(1.0, 1.0, 1.0, 1.0), 1, -1.0, MicroKernel::ScaledAlphaOverN, 0.0).is_err());
    }

    #[test]
    fn concavity_warning() {
        let p = fp(base(1.0, 1.0, 0.01, 1.0), 2, 1.0, 1.0);
        assert!(!p.warnings().is_empty());
    }

    #[test]
    fn constant_kernel_and_flow_micro_term() {
        let grid = TimeGrid::spanning(0.0, 2.0, 20).unwrap();
        let xi = SampledPath::constant(grid, 0.3).unwrap();
        let params = FinitePopParams::new(base(1.0, 0.5, 1.0, 2.0), 5, 1.0, MicroKernel::ConstantOverU(xi), 0.0).unwrap();
        let flow = SampledPath::constant(grid, 4.0).unwrap();
        let d = expected_formed_price(&params, &flow, 10.0).unwrap();
        for (k, v) in d.term_micro.values().iter().enumerate() {
            assert!((v + 0.3 * 4.0 * grid.node(k)).abs() < 1e-12);
        }
        assert!(d.term_noise.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lag_dependent_kernel_is_rejected() {
        let grid = TimeGrid::spanning(0.0, 1.0, 2).unwrap();
        let rows = vec![vec![1.0], vec![1.0, 2.0], vec![1.0, 1.0, 1.0]];
        let params = FinitePopParams::new(base(1.0, 0.5, 1.0, 1.0), 5, 1.0, MicroKernel::TwoTime(rows), 0.0).unwrap();
        let flow = SampledPath::zeros(grid);
        assert!(matches!(
            expected_formed_price(&params, &flow, 0.0),
            Err(Error::UnsupportedKernel(_))
        ));
        let rows = vec![vec![1.0], vec![2.0, 2.0], vec![3.0, 3.0, 3.0]];
        let params = FinitePopParams { kernel: MicroKernel::TwoTime(rows), ..params };
        assert!(expected_formed_price(&params, &flow, 0.0).is_ok());
    }

    #[test]
    fn sanity_check_trivial_cases() {
        let p = fp(base(1.0, 1.0, 1.0, 1.0), 10, 0.5, 0.0);
        let grid = TimeGrid::spanning(0.0, 1.0, 100).unwrap();
        let chk = permanent_impact_sanity(&p, 50.0, grid).unwrap();
        assert!(chk.price.values().iter().all(|&v| v == 50.0));
        let p = fp(base(1.0, 1.0, 1.0, 1.0), 10, 0.5, 1.0);
        let chk = permanent_impact_sanity(&p, 50.0, grid).unwrap();
        assert_eq!(chk.price.first(), 50.0);
    }

    #[test]
    fn convergence_needs_population_sizes() {
        let grid = TimeGrid::spanning(0.0, 1.0, 10).unwrap();
        let flow = SampledPath::zeros(grid);
        let p = fp(base(1.0, 1.0, 1.0, 1.0), 10, 0.5, 0.0);
        assert!(convergence_errors(&p, &[], &FlowFamily::Fixed(flow.clone()), &flow, 0.0).is_err());
    }

    #[test]
    fn single_agent_error_exceeds_large_population_error() {
        let grid = TimeGrid::spanning(0.0, 1.0, 100).unwrap();
        let flow = SampledPath::from_fn(grid, |t| 1.0 + t).unwrap();
        let p = fp(base(1.0, 1.0, 1.0, 1.0), 1, 1.0, 0.5);
        let errs = convergence_errors(&p, &[1, 1000], &FlowFamily::Fixed(flow.clone()), &flow, 100.0).unwrap();
        assert!(errs[0].error > errs[1].error);
    }
}
