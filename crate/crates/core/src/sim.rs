//! Monte Carlo simulation of the trader's control problem.
//!
//! Inventories follow `dq = ν dt + σ dW` and cash `dc = −(p + κν)ν dt`, both
//! discretised by Euler–Maruyama. Each path `i` draws from its own ChaCha8
//! stream (`seed`, stream `i`), so results do not depend on how paths are
//! scheduled. Gaussian increments use the ziggurat sampler of `rand_distr`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::finite_pop::{mean_inventory_bvp, FinitePopParams};
use crate::mfg::{solve_thetas, ModelParams, ThetaCoefficients};
use crate::path::{cumulative_trapezoid, trapezoid, SampledPath, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub n_paths: usize,
    pub grid: TimeGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Zero,
    /// `ν*(t, q)` from the θ-coefficients of the price path.
    FeedbackOptimal,
    /// The same open-loop rate on every path.
    RateTable(SampledPath),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialInventory {
    Constant(f64),
    Normal { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
}

impl InitialInventory {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InitialInventory::Constant(q) if q.is_finite() => Ok(()),
            InitialInventory::Normal { mean, std } if mean.is_finite() && std.is_finite() && std >= 0.0 => Ok(()),
            InitialInventory::Uniform { low, high } if low.is_finite() && high.is_finite() && low <= high => Ok(()),
            other => Err(Error::Configuration(format!("invalid initial inventory sampler {other:?}"))),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            InitialInventory::Constant(q) => q,
            InitialInventory::Normal { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
            InitialInventory::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
        }
    }
}

/// One simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub inventory: Vec<f64>,
    pub cash: Vec<f64>,
    pub control: Vec<f64>,
    /// Brownian increments `ΔW_k`, one per step.
    pub noise: Vec<f64>,
}

/// Row-major `n_paths × nodes` arrays (`noise` is `n_paths × steps`).
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub sigma: f64,
    pub price: Vec<f64>,
    pub inventories: Vec<f64>,
    pub cash: Vec<f64>,
    pub controls: Vec<f64>,
    pub noise: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn from_paths(grid: TimeGrid, sigma: f64, price: &SampledPath, paths: Vec<PathRecord>) -> Result<Self> {
        if price.grid() != &grid {
            return Err(Error::Domain("price is not sampled on the simulation grid".into()));
        }
        let n_paths = paths.len();
        let len = grid.len();
        let mut out = Self {
            grid,
            n_paths,
            sigma,
            price: price.values().to_vec(),
            inventories: Vec::with_capacity(n_paths * len),
            cash: Vec::with_capacity(n_paths * len),
            controls: Vec::with_capacity(n_paths * len),
            noise: Vec::with_capacity(n_paths * grid.n_steps()),
        };
        for p in paths {
            if p.inventory.len() != len || p.cash.len() != len || p.control.len() != len || p.noise.len() != len - 1 {
                return Err(Error::ShapeMismatch("path record does not match the grid".into()));
            }
            out.inventories.extend(p.inventory);
            out.cash.extend(p.cash);
            out.controls.extend(p.control);
            out.noise.extend(p.noise);
        }
        Ok(out)
    }

    pub fn nodes(&self) -> usize {
        self.grid.len()
    }

    pub fn inventory(&self, path: usize) -> &[f64] {
        let n = self.nodes();
        &self.inventories[path * n..(path + 1) * n]
    }

    pub fn cash_path(&self, path: usize) -> &[f64] {
        let n = self.nodes();
        &self.cash[path * n..(path + 1) * n]
    }

    pub fn control(&self, path: usize) -> &[f64] {
        let n = self.nodes();
        &self.controls[path * n..(path + 1) * n]
    }

    pub fn increments(&self, path: usize) -> &[f64] {
        let n = self.grid.n_steps();
        &self.noise[path * n..(path + 1) * n]
    }

    /// `c_k + q_k p_k`.
    pub fn wealth(&self, path: usize) -> Vec<f64> {
        self.cash_path(path)
            .iter()
            .zip(self.inventory(path))
            .zip(&self.price)
            .map(|((c, q), p)| c + q * p)
            .collect()
    }

    /// Node-wise average over paths.
    pub fn mean_inventory(&self) -> Result<SampledPath> {
        self.column_mean(&self.inventories)
    }

    pub fn mean_control(&self) -> Result<SampledPath> {
        self.column_mean(&self.controls)
    }

    fn column_mean(&self, data: &[f64]) -> Result<SampledPath> {
        let n = self.nodes();
        let rows: Vec<&[f64]> = data.chunks(n).collect();
        let values = (0..n)
            .map(|k| pairwise_sum(&rows, |r| r[k]) / self.n_paths as f64)
            .collect();
        SampledPath::new(self.grid, values)
    }
}

/// Pairwise summation over `rows`, independent of how rows were produced.
fn pairwise_sum<T>(rows: &[T], f: impl Fn(&T) -> f64 + Copy) -> f64 {
    match rows.len() {
        0 => 0.0,
        1 => f(&rows[0]),
        n => pairwise_sum(&rows[..n / 2], f) + pairwise_sum(&rows[n / 2..], f),
    }
}

/// Precomputed policy state shared by all paths.
pub struct PolicyPlan<'a> {
    params: &'a ModelParams,
    price: &'a SampledPath,
    policy: &'a Policy,
    thetas: Option<ThetaCoefficients>,
}

impl<'a> PolicyPlan<'a> {
    pub fn new(params: &'a ModelParams, price: &'a SampledPath, policy: &'a Policy, cfg: &SimConfig) -> Result<Self> {
        params.validate()?;
        if price.grid() != &cfg.grid {
            return Err(Error::Domain("price is not sampled on the simulation grid".into()));
        }
        if cfg.n_paths == 0 {
            return Err(Error::Configuration("n_paths must be >= 1".into()));
        }
        let thetas = match policy {
            Policy::FeedbackOptimal => Some(solve_thetas(params, price)?),
            Policy::RateTable(rates) => {
                if rates.grid() != &cfg.grid {
                    return Err(Error::Configuration("rate table is not on the simulation grid".into()));
                }
                None
            }
            Policy::Zero => None,
        };
        Ok(Self {
            params,
            price,
            policy,
            thetas,
        })
    }

    fn rate(&self, k: usize, q: f64) -> f64 {
        match self.policy {
            Policy::Zero => 0.0,
            Policy::RateTable(r) => r.values()[k],
            Policy::FeedbackOptimal => {
                let th = self.thetas.as_ref().expect("thetas for feedback policy");
                (th.theta1.values()[k] - self.price.values()[k]) / (2.0 * self.params.kappa)
                    + th.theta2.values()[k] * q / self.params.kappa
            }
        }
    }

    /// Simulates path `index` on its own RNG stream.
    pub fn simulate_path(&self, cfg: &SimConfig, q0: &InitialInventory, index: usize) -> PathRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index as u64);
        let grid = cfg.grid;
        let len = grid.len();
        let dt = grid.dt();
        let sqdt = libm::sqrt(dt);
        let sigma = self.params.sigma;
        let kappa = self.params.kappa;
        let p = self.price.values();

        let mut inventory = Vec::with_capacity(len);
        let mut cash = Vec::with_capacity(len);
        let mut control = Vec::with_capacity(len);
        let mut noise = Vec::with_capacity(len - 1);
        let mut q = q0.sample(&mut rng);
        let mut c = 0.0;
        for k in 0..len {
            let nu = self.rate(k, q);
            inventory.push(q);
            cash.push(c);
            control.push(nu);
            if k + 1 < len {
                let z: f64 = StandardNormal.sample(&mut rng);
                let dw = sqdt * z;
                noise.push(dw);
                q = q + nu * dt + sigma * dw;
                c -= (p[k] + kappa * nu) * nu * dt;
            }
        }
        PathRecord {
            inventory,
            cash,
            control,
            noise,
        }
    }
}

/// Simulates `cfg.n_paths` independent traders facing `price`.
pub fn simulate_population(
    params: &ModelParams,
    price: &SampledPath,
    policy: &Policy,
    cfg: &SimConfig,
    q0: &InitialInventory,
) -> Result<ParticleEnsemble> {
    q0.validate()?;
    let plan = PolicyPlan::new(params, price, policy, cfg)?;
    let paths = (0..cfg.n_paths).map(|i| plan.simulate_path(cfg, q0, i)).collect();
    ParticleEnsemble::from_paths(cfg.grid, params.sigma, price, paths)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

/// Realised payoff of one path: `c_T + q_T p_T − A q_T² − φ ∫ q² dt`.
///
/// The cash account already carries `−Σ(κν² + νp)dt`; the running
/// inventory penalty uses the trapezoid rule.
pub fn path_payoff(params: &ModelParams, ensemble: &ParticleEnsemble, path: usize) -> f64 {
    let q = ensemble.inventory(path);
    let c = ensemble.cash_path(path);
    let n = q.len() - 1;
    let q_t = q[n];
    let p_t = ensemble.price[n];
    let sq: Vec<f64> = q.iter().map(|x| x * x).collect();
    c[n] + q_t * p_t - params.terminal_penalty * q_t * q_t - params.phi * trapezoid(&sq, ensemble.grid.dt())
}

pub fn estimate_payoff(params: &ModelParams, price: &SampledPath, ensemble: &ParticleEnsemble) -> Result<PayoffEstimate> {
    if price.grid() != &ensemble.grid || price.values() != ensemble.price.as_slice() {
        return Err(Error::Domain("ensemble was generated on a different price or grid".into()));
    }
    let payoffs: Vec<f64> = (0..ensemble.n_paths).map(|i| path_payoff(params, ensemble, i)).collect();
    let n = payoffs.len();
    let mean = pairwise_sum(&payoffs, |v| *v) / n as f64;
    let std_error = if n > 1 {
        let ss = pairwise_sum(&payoffs, |v| (v - mean) * (v - mean));
        libm::sqrt(ss / (n - 1) as f64) / libm::sqrt(n as f64)
    } else {
        0.0
    };
    Ok(PayoffEstimate { mean, std_error, n_paths: n })
}

/// `(1/n) Σ_i ν_{i,k} + Λ_k`.
pub fn clearing_residual(ensemble: &ParticleEnsemble, flow: &SampledPath) -> Result<SampledPath> {
    if flow.grid() != &ensemble.grid {
        return Err(Error::ShapeMismatch("flow and ensemble grids differ".into()));
    }
    let mean = ensemble.mean_control()?;
    let values = mean.values().iter().zip(flow.values()).map(|(m, l)| m + l).collect();
    SampledPath::new(ensemble.grid, values)
}

/// Discrete quadratic variation `Σ (x_{k+1} − x_k)²`.
pub fn quadratic_variation(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum()
}

/// `QV(p) / QV(Λ)`.
pub fn qv_ratio(price: &SampledPath, flow: &SampledPath) -> Result<f64> {
    price.ensure_same_grid(flow)?;
    let qv_flow = quadratic_variation(flow.values());
    if qv_flow == 0.0 {
        return Err(Error::UndefinedRatio("order flow has zero quadratic variation".into()));
    }
    Ok(quadratic_variation(price.values()) / qv_flow)
}

/// Cross-path mean and standard error of a per-path quantity at each node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEstimate {
    pub mean: SampledPath,
    pub std_error: Vec<f64>,
}

/// Monte Carlo estimate of the inventory-noise martingale `σ W_t`.
pub fn noise_average(ensemble: &ParticleEnsemble) -> Result<NodeEstimate> {
    let n = ensemble.nodes();
    let paths: Vec<Vec<f64>> = (0..ensemble.n_paths)
        .map(|i| {
            let mut acc = 0.0;
            let mut out = Vec::with_capacity(n);
            out.push(0.0);
            for dw in ensemble.increments(i) {
                acc += ensemble.sigma * dw;
                out.push(acc);
            }
            out
        })
        .collect();
    let m = ensemble.n_paths as f64;
    let mut mean = Vec::with_capacity(n);
    let mut std_error = Vec::with_capacity(n);
    for k in 0..n {
        let mu = pairwise_sum(&paths, |p| p[k]) / m;
        let se = if ensemble.n_paths > 1 {
            let ss = pairwise_sum(&paths, |p| (p[k] - mu) * (p[k] - mu));
            libm::sqrt(ss / (m - 1.0) / m)
        } else {
            0.0
        };
        mean.push(mu);
        std_error.push(se);
    }
    Ok(NodeEstimate {
        mean: SampledPath::new(ensemble.grid, mean)?,
        std_error,
    })
}

/// Price map `p_t = p̃_t + (α/N) Σ_j q^j_t` of the linear permanent-impact
/// market with `N` deterministic traders.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearImpactMarket {
    pub reference: SampledPath,
}

impl LinearImpactMarket {
    fn check(&self, params: &FinitePopParams, controls: &[Vec<f64>]) -> Result<()> {
        if controls.len() != params.population {
            return Err(Error::ShapeMismatch(format!(
                "{} control paths for {} traders",
                controls.len(),
                params.population
            )));
        }
        let len = self.reference.len();
        if controls.iter().any(|c| c.len() != len) {
            return Err(Error::ShapeMismatch("control path length differs from the price grid".into()));
        }
        Ok(())
    }

    /// Inventories `q^j = E_N(0) + ∫ν^j` and the resulting price path.
    pub fn evolve(&self, params: &FinitePopParams, controls: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        self.check(params, controls)?;
        let dt = self.reference.grid().dt();
        let inventories: Vec<Vec<f64>> = controls
            .iter()
            .map(|nu| cumulative_trapezoid(nu, dt).into_iter().map(|x| params.mean_inventory0 + x).collect())
            .collect();
        let scale = params.alpha / params.population as f64;
        let price = (0..self.reference.len())
            .map(|k| self.reference.values()[k] + scale * inventories.iter().map(|q| q[k]).sum::<f64>())
            .collect();
        Ok((inventories, price))
    }

    /// `J_i = −∫(κν² + φq² + νp)dt + q_T(p_T − A q_T)` for trader `agent`.
    pub fn payoff(&self, params: &FinitePopParams, controls: &[Vec<f64>], agent: usize) -> Result<f64> {
        if agent >= params.population {
            return Err(Error::Domain(format!("agent {agent} out of range")));
        }
        let (inv, price) = self.evolve(params, controls)?;
        let nu = &controls[agent];
        let q = &inv[agent];
        let kappa = params.base.kappa;
        let phi = params.base.phi;
        let running: Vec<f64> = (0..q.len())
            .map(|k| kappa * nu[k] * nu[k] + phi * q[k] * q[k] + nu[k] * price[k])
            .collect();
        let n = q.len() - 1;
        let a = params.base.terminal_penalty;
        Ok(-trapezoid(&running, self.reference.grid().dt()) + q[n] * (price[n] - a * q[n]))
    }
}

/// Directional derivative of trader `agent`'s payoff along `direction`,
/// from two difference quotients combined by Richardson extrapolation.
pub fn gateaux_residual(
    params: &FinitePopParams,
    market: &LinearImpactMarket,
    candidate: &[Vec<f64>],
    direction: &[f64],
    agent: usize,
    eps_ladder: &[f64],
) -> Result<f64> {
    if eps_ladder.len() < 2 {
        return Err(Error::Configuration("the epsilon ladder needs at least two levels".into()));
    }
    let (e1, e2) = (eps_ladder[0], eps_ladder[1]);
    if !(e1.is_finite() && e2.is_finite()) || e1 == 0.0 || e2 == 0.0 || e1 == e2 {
        return Err(Error::Configuration("epsilon levels must be distinct and nonzero".into()));
    }
    if direction.len() != market.reference.len() {
        return Err(Error::ShapeMismatch("direction length differs from the price grid".into()));
    }
    let base = market.payoff(params, candidate, agent)?;
    let quotient = |eps: f64| -> Result<f64> {
        let mut bumped = candidate.to_vec();
        for (v, w) in bumped[agent].iter_mut().zip(direction) {
            *v += eps * w;
        }
        Ok((market.payoff(params, &bumped, agent)? - base) / eps)
    };
    let d1 = quotient(e1)?;
    let d2 = quotient(e2)?;
    Ok((e1 * d2 - e2 * d1) / (e1 - e2))
}

/// Symmetric candidate in which every trader follows `ν = E_N'`.
///
/// Each trader's own inventory moves the terminal mark, so the individual
/// first-order condition carries the effective terminal penalty
/// `A − α/(2N)`; the mean-inventory problem is solved with that value.
pub fn symmetric_equilibrium_controls(params: &FinitePopParams, grid: TimeGrid) -> Result<Vec<Vec<f64>>> {
    let effective = FinitePopParams {
        base: ModelParams {
            terminal_penalty: params.base.terminal_penalty - params.alpha / (2.0 * params.population as f64),
            ..params.base
        },
        ..params.clone()
    };
    let sol = mean_inventory_bvp(&effective)?;
    let nu: Vec<f64> = grid.nodes().map(|t| sol.derivative(t)).collect();
    Ok(vec![nu; params.population])
}
