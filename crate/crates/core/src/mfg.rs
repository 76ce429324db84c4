//! Closed-form mean-field solution of the linear-quadratic trading game.
//!
//! Given a deterministic price path `p`, every trader's value function is
//! quadratic in inventory, `V(t, q) = θ0(t) + θ1(t) q + θ2(t) q²`, and the
//! optimal turnover rate is affine in `q`. Aggregating the optimal rates
//! gives the order flow `Λ` that clears the market at `p`. Conversely a flow
//! `Λ` determines the formed price
//!
//! ```text
//! p(t) = p(0) + 2φ E0 t − 2φ ∫₀ᵗ (t − u) Λ(u) du + 2κ (Λ(t) − Λ(0)).
//! ```
//!
//! The two directions are [`induced_order_flow`] and [`formed_price`].

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::path::{cumulative_trapezoid, lerp, memory_integral, SampledPath, TimeGrid};

/// Parameters of the mean-field trading problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Temporary impact cost (price·time/shares).
    pub kappa: f64,
    /// Running inventory penalty (price/shares/time).
    pub phi: f64,
    /// Terminal inventory penalty `A` (price/shares).
    pub terminal_penalty: f64,
    /// Inventory noise volatility (shares/√time).
    pub sigma: f64,
    /// Trading horizon `T`.
    pub horizon: f64,
    /// Initial mean inventory `E0` (shares).
    pub mean_inventory0: f64,
}

impl ModelParams {
    pub fn new(
        kappa: f64,
        phi: f64,
        terminal_penalty: f64,
        sigma: f64,
        horizon: f64,
        mean_inventory0: f64,
    ) -> Result<Self> {
        let params = Self {
            kappa,
            phi,
            terminal_penalty,
            sigma,
            horizon,
            mean_inventory0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("kappa", self.kappa),
            ("phi", self.phi),
            ("A", self.terminal_penalty),
            ("sigma", self.sigma),
            ("T", self.horizon),
            ("E0", self.mean_inventory0),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {value} is not finite")));
            }
        }
        if self.kappa <= 0.0 {
            return Err(Error::InvalidParameter(format!("kappa = {} must be > 0", self.kappa)));
        }
        if self.horizon <= 0.0 {
            return Err(Error::InvalidParameter(format!("T = {} must be > 0", self.horizon)));
        }
        if self.sigma < 0.0 {
            return Err(Error::InvalidParameter(format!("sigma = {} must be >= 0", self.sigma)));
        }
        Ok(())
    }

    /// Non-fatal remarks about parameters outside the validated region.
    pub fn warnings(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.phi < 0.0 {
            out.push("phi < 0: the Riccati coefficient is not available in closed form");
        }
        if self.terminal_penalty < 0.0 {
            out.push("A < 0: the terminal penalty rewards open inventory");
        }
        out
    }

    /// `γ = √(φ/κ)`.
    pub fn gamma(&self) -> f64 {
        libm::sqrt(self.phi / self.kappa)
    }

    fn require_horizon_grid(&self, grid: &TimeGrid) -> Result<()> {
        if !grid.covers(0.0, self.horizon) {
            return Err(Error::Domain(format!(
                "grid [{}, {}] does not cover [0, {}]",
                grid.t0(),
                grid.end(),
                self.horizon
            )));
        }
        Ok(())
    }

    fn require_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.horizon;
        if !(t.is_finite() && t >= -slack && t <= self.horizon + slack) {
            return Err(Error::Domain(format!("t = {t} outside [0, {}]", self.horizon)));
        }
        Ok(())
    }
}

/// Coefficients of the quadratic value function on the working grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaCoefficients {
    pub theta0: SampledPath,
    pub theta1: SampledPath,
    pub theta2: SampledPath,
}

impl ThetaCoefficients {
    pub fn grid(&self) -> &TimeGrid {
        self.theta2.grid()
    }
}

/// Population aggregates induced by a price path.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState {
    /// Mean inventory `E(t)`.
    pub mean_inventory: SampledPath,
    /// Mean marginal value `Π(t) = θ1 + 2θ2 E`.
    pub marginal_value: SampledPath,
    /// Market supply rate `Λ(t) = −E'(t)`.
    pub order_flow: SampledPath,
    pub thetas: ThetaCoefficients,
}

/// Riccati coefficient at `tau = T - t` without argument checks.
fn theta2_remaining(params: &ModelParams, tau: f64) -> f64 {
    let a = params.terminal_penalty;
    if params.phi == 0.0 {
        return -a * params.kappa / (params.kappa + a * tau);
    }
    let s = libm::sqrt(params.kappa * params.phi);
    let th = libm::tanh(params.gamma() * tau);
    -s * (a + s * th) / (s + a * th)
}

fn check_theta2_regime(params: &ModelParams) -> Result<()> {
    params.validate()?;
    if params.phi < 0.0 {
        return Err(Error::UnsupportedRegime(format!(
            "phi = {} < 0 gives a complex Riccati rate",
            params.phi
        )));
    }
    Ok(())
}

/// `θ2(t)`, the solution of `θ2' = φ − θ2²/κ` with `θ2(T) = −A`.
///
/// Uses `−√(κφ) (A + √(κφ) tanh(γ(T−t))) / (√(κφ) + A tanh(γ(T−t)))`, which
/// has no singularity at `A = √(κφ)`, and the rational limit
/// `−Aκ / (κ + A(T−t))` when `φ = 0`.
pub fn theta2_at(params: &ModelParams, t: f64) -> Result<f64> {
    check_theta2_regime(params)?;
    params.require_time(t)?;
    let tau = (params.horizon - t).max(0.0);
    if tau == 0.0 {
        return Ok(-params.terminal_penalty);
    }
    let value = theta2_remaining(params, tau);
    if !value.is_finite() {
        return Err(Error::DegenerateParameters(format!(
            "theta2 blows up before t = {t} (A = {})",
            params.terminal_penalty
        )));
    }
    Ok(value)
}

fn theta2_on_grid(params: &ModelParams, grid: &TimeGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = grid.n_steps();
    let mut nodes = Vec::with_capacity(n + 1);
    let mut mids = Vec::with_capacity(n);
    for k in 0..=n {
        nodes.push(theta2_at(params, grid.node(k).min(params.horizon))?);
    }
    for k in 0..n {
        let t = grid.node(k) + 0.5 * grid.dt();
        mids.push(theta2_at(params, t.min(params.horizon))?);
    }
    nodes[n] = -params.terminal_penalty;
    Ok((nodes, mids))
}

/// Solves the θ-system for a given price path.
///
/// `θ1` is integrated backward from `θ1(T) = p(T)` with classical RK4; the
/// price at half steps is linearly interpolated. `θ0` is the backward
/// trapezoid of `(θ1 − p)²/(4κ) + 2σ²θ2`.
pub fn solve_thetas(params: &ModelParams, price: &SampledPath) -> Result<ThetaCoefficients> {
    check_theta2_regime(params)?;
    let grid = *price.grid();
    params.require_horizon_grid(&grid)?;
    let (th2, th2_mid) = theta2_on_grid(params, &grid)?;
    let p = price.values();
    let n = grid.n_steps();
    let h = -grid.dt();
    let kappa = params.kappa;
    let rhs = |theta2: f64, theta1: f64, price: f64| -(theta2 / kappa) * (theta1 - price);

    let mut th1 = alloc::vec![0.0; n + 1];
    th1[n] = p[n];
    for k in (0..n).rev() {
        let y = th1[k + 1];
        let p_mid = 0.5 * (p[k] + p[k + 1]);
        let k1 = rhs(th2[k + 1], y, p[k + 1]);
        let k2 = rhs(th2_mid[k], y + 0.5 * h * k1, p_mid);
        let k3 = rhs(th2_mid[k], y + 0.5 * h * k2, p_mid);
        let k4 = rhs(th2[k], y + h * k3, p[k]);
        th1[k] = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }

    let sigma2 = params.sigma * params.sigma;
    let integrand: Vec<f64> = (0..=n)
        .map(|k| {
            let gap = th1[k] - p[k];
            gap * gap / (4.0 * kappa) + 2.0 * sigma2 * th2[k]
        })
        .collect();
    let mut th0 = alloc::vec![0.0; n + 1];
    for k in (0..n).rev() {
        th0[k] = th0[k + 1] + 0.5 * grid.dt() * (integrand[k] + integrand[k + 1]);
    }

    Ok(ThetaCoefficients {
        theta0: SampledPath::new(grid, th0)?,
        theta1: SampledPath::new(grid, th1)?,
        theta2: SampledPath::new(grid, th2)?,
    })
}

fn theta_values_at(thetas: &ThetaCoefficients, t: f64) -> Result<(f64, f64, f64)> {
    let (k, frac) = thetas.grid().locate(t)?;
    let pick = |p: &SampledPath| lerp(p.values()[k], p.values()[k + 1], frac);
    Ok((pick(&thetas.theta0), pick(&thetas.theta1), pick(&thetas.theta2)))
}

/// `V(t, q) = θ0(t) + θ1(t) q + θ2(t) q²`, linear in time between nodes.
pub fn value_function(thetas: &ThetaCoefficients, t: f64, q: f64) -> Result<f64> {
    let (t0, t1, t2) = theta_values_at(thetas, t)?;
    Ok(t0 + t1 * q + t2 * q * q)
}

/// Optimal feedback rate `ν*(t, q) = (θ1 − p)/(2κ) + θ2 q / κ`.
pub fn optimal_rate(
    params: &ModelParams,
    thetas: &ThetaCoefficients,
    price: &SampledPath,
    t: f64,
    q: f64,
) -> Result<f64> {
    params.validate()?;
    let (_, t1, t2) = theta_values_at(thetas, t)?;
    let p = price.at(t)?;
    Ok((t1 - p) / (2.0 * params.kappa) + t2 * q / params.kappa)
}

/// Mean inventory, marginal value and market-clearing flow induced by `price`.
///
/// `E' = (θ1 + 2θ2 E − p)/(2κ)` is integrated forward from `E(0) = E0` with
/// RK4; `Λ = −E'` is read off the right-hand side at each node.
pub fn induced_order_flow(params: &ModelParams, price: &SampledPath) -> Result<MeanFieldState> {
    let thetas = solve_thetas(params, price)?;
    let grid = *price.grid();
    let (_, th2_mid) = theta2_on_grid(params, &grid)?;
    let n = grid.n_steps();
    let dt = grid.dt();
    let p = price.values();
    let th1 = thetas.theta1.values();
    let th2 = thetas.theta2.values();
    let two_kappa = 2.0 * params.kappa;
    let rhs = |theta1: f64, theta2: f64, price: f64, e: f64| (theta1 + 2.0 * theta2 * e - price) / two_kappa;

    let mut e = alloc::vec![0.0; n + 1];
    e[0] = params.mean_inventory0;
    for k in 0..n {
        let y = e[k];
        let th1_mid = 0.5 * (th1[k] + th1[k + 1]);
        let p_mid = 0.5 * (p[k] + p[k + 1]);
        let k1 = rhs(th1[k], th2[k], p[k], y);
        let k2 = rhs(th1_mid, th2_mid[k], p_mid, y + 0.5 * dt * k1);
        let k3 = rhs(th1_mid, th2_mid[k], p_mid, y + 0.5 * dt * k2);
        let k4 = rhs(th1[k + 1], th2[k + 1], p[k + 1], y + dt * k3);
        e[k + 1] = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    let pi: Vec<f64> = (0..=n).map(|k| th1[k] + 2.0 * th2[k] * e[k]).collect();
    let flow: Vec<f64> = (0..=n).map(|k| -rhs(th1[k], th2[k], p[k], e[k])).collect();

    Ok(MeanFieldState {
        mean_inventory: SampledPath::new(grid, e)?,
        marginal_value: SampledPath::new(grid, pi)?,
        order_flow: SampledPath::new(grid, flow)?,
        thetas,
    })
}

/// Formed price of an order-flow path, time measured from the grid start.
pub fn formed_price(params: &ModelParams, flow: &SampledPath, p0: f64) -> Result<SampledPath> {
    params.validate()?;
    if flow.is_empty() {
        return Err(Error::Domain("empty order-flow path".into()));
    }
    if !p0.is_finite() {
        return Err(Error::InvalidParameter(format!("p0 = {p0} is not finite")));
    }
    let grid = *flow.grid();
    let lam = flow.values();
    let memory = memory_integral(lam, grid.dt());
    let phi = params.phi;
    let values = (0..grid.len())
        .map(|k| {
            let s = k as f64 * grid.dt();
            p0 + 2.0 * phi * params.mean_inventory0 * s - 2.0 * phi * memory[k]
                + 2.0 * params.kappa * (lam[k] - lam[0])
        })
        .collect();
    SampledPath::new(grid, values)
}

fn check_constant_price_guard(params: &ModelParams, lambda0: f64) -> Result<()> {
    params.validate()?;
    if params.phi <= 0.0 {
        return Err(Error::UnsupportedRegime(format!(
            "constant-price flow needs phi > 0 (phi = {})",
            params.phi
        )));
    }
    if !lambda0.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda0 = {lambda0} is not finite")));
    }
    let lhs = lambda0 * libm::sqrt(params.kappa);
    let rhs = libm::sqrt(params.phi) * params.mean_inventory0;
    let scale = libm::fabs(lhs).max(libm::fabs(rhs));
    if libm::fabs(lhs - rhs) <= 1e-12 * scale || scale == 0.0 {
        return Err(Error::DegenerateParameters(format!(
            "lambda0 * sqrt(kappa) = sqrt(phi) * E0 = {lhs}"
        )));
    }
    Ok(())
}

/// Order flow compatible with a constant price, `Λ(t) = Λ0 exp(∫₀ᵗ g)`.
///
/// With `β = (Λ0√κ + √φ E0)/(Λ0√κ − √φ E0)` the exponent integrates to
/// `ln((β e^{2γt} + 1)/(β + 1)) − γt`, which simplifies to
/// `Λ0 cosh(γt) + (√φ E0/√κ) sinh(γt)`; the latter is what is evaluated.
///
/// This solves `κΛ'' = φΛ`, `Λ(0) = Λ0`, `Λ'(0) = φE0/κ`. Holding the price
/// constant in the formed-price dynamics forces `Λ'(0) = −φE0/κ` instead, so
/// the mean-field flow under a constant price is this function evaluated
/// with `E0` negated.
pub fn constant_price_flow_at(params: &ModelParams, lambda0: f64, t: f64) -> Result<f64> {
    check_constant_price_guard(params, lambda0)?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Domain(format!("t = {t} must be finite and >= 0")));
    }
    let g = params.gamma();
    let slope = libm::sqrt(params.phi) * params.mean_inventory0 / libm::sqrt(params.kappa);
    Ok(lambda0 * libm::cosh(g * t) + slope * libm::sinh(g * t))
}

/// [`constant_price_flow_at`] sampled on `grid` (time measured from `grid.t0()`).
pub fn constant_price_flow(params: &ModelParams, lambda0: f64, grid: TimeGrid) -> Result<SampledPath> {
    check_constant_price_guard(params, lambda0)?;
    let values = (0..grid.len())
        .map(|k| constant_price_flow_at(params, lambda0, k as f64 * grid.dt()))
        .collect::<Result<Vec<_>>>()?;
    SampledPath::new(grid, values)
}

/// Gap between `θ1 + 2θ2 E` and the flow-determined price net of `2κΛ(t)`.
///
/// The price is built from `flow` with [`formed_price`], the thetas from
/// that price, and `E = E0 − ∫Λ` by trapezoid. A flow for which this
/// residual vanishes clears the market at its own formed price.
pub fn compatibility_residual(params: &ModelParams, flow: &SampledPath, p0: f64) -> Result<SampledPath> {
    let price = formed_price(params, flow, p0)?;
    let thetas = solve_thetas(params, &price)?;
    let grid = *flow.grid();
    let lam = flow.values();
    let cum = cumulative_trapezoid(lam, grid.dt());
    let memory = memory_integral(lam, grid.dt());
    let phi = params.phi;
    let th1 = thetas.theta1.values();
    let th2 = thetas.theta2.values();
    let values = (0..grid.len())
        .map(|k| {
            let s = k as f64 * grid.dt();
            let e = params.mean_inventory0 - cum[k];
            let lhs = th1[k] + 2.0 * th2[k] * e;
            let rhs = p0 + 2.0 * phi * params.mean_inventory0 * s - 2.0 * phi * memory[k]
                - 2.0 * params.kappa * lam[0];
            lhs - rhs
        })
        .collect();
    SampledPath::new(grid, values)
}

/// Slopes of the formed price with respect to κ, E0 and φ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceSensitivities {
    pub kappa: f64,
    pub mean_inventory0: f64,
    pub phi: f64,
}

/// The formed price is linear in κ, E0 and φ; these are the slopes at `t`.
pub fn comparative_statics(params: &ModelParams, flow: &SampledPath, t: f64) -> Result<PriceSensitivities> {
    params.validate()?;
    let grid = flow.grid();
    let (k, frac) = grid.locate(t)?;
    let lam = flow.values();
    let memory = memory_integral(lam, grid.dt());
    let s = t - grid.t0();
    let lam_t = lerp(lam[k], lam[k + 1], frac);
    let memory_t = lerp(memory[k], memory[k + 1], frac);
    Ok(PriceSensitivities {
        kappa: 2.0 * (lam_t - lam[0]),
        mean_inventory0: 2.0 * params.phi * s,
        phi: 2.0 * params.mean_inventory0 * s - 2.0 * memory_t,
    })
}
