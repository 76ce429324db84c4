use std::path::Path;

use flowprice_core::finite_pop::MicroKernel;
use flowprice_core::mfg::ModelParams;
use flowprice_core::sim::{
    clearing_residual, estimate_payoff, gateaux_residual, symmetric_equilibrium_controls, InitialInventory,
    LinearImpactMarket, ParticleEnsemble, Policy, PolicyPlan, SimConfig,
};
use flowprice_core::{SampledPath, TimeGrid};
use rayon::prelude::*;
use serde::Serialize;

use super::model::{finite_params, setup};
use crate::cli::SimulateArgs;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io::{num, write_atomic, write_json, Table};
use crate::pathspec::PathSpec;

pub const GATEAUX_DIRECTIONS: usize = 10;
pub const EPS_LADDER: [f64; 2] = [1e-2, 5e-3];

fn pair(rest: &str, what: &str) -> Result<(f64, f64)> {
    let bad = || CliError::bad(format!("q0 spec {what}:{rest} needs two numbers"));
    let (a, b) = rest.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

pub fn parse_q0(spec: &str) -> Result<InitialInventory> {
    let q0 = if let Some(rest) = spec.strip_prefix("normal:") {
        let (mean, std) = pair(rest, "normal")?;
        InitialInventory::Normal { mean, std }
    } else if let Some(rest) = spec.strip_prefix("uniform:") {
        let (low, high) = pair(rest, "uniform")?;
        InitialInventory::Uniform { low, high }
    } else {
        let v = spec.strip_prefix("const:").unwrap_or(spec);
        InitialInventory::Constant(v.parse().map_err(|_| CliError::bad(format!("bad q0 spec {spec:?}")))?)
    };
    q0.validate()?;
    Ok(q0)
}

fn q0_mean(q0: &InitialInventory) -> f64 {
    match *q0 {
        InitialInventory::Constant(q) => q,
        InitialInventory::Normal { mean, .. } => mean,
        InitialInventory::Uniform { low, high } => 0.5 * (low + high),
    }
}

pub fn parse_policy(spec: &str, grid: TimeGrid) -> Result<Policy> {
    match spec {
        "zero" => Ok(Policy::Zero),
        "optimal" | "feedback" => Ok(Policy::FeedbackOptimal),
        other => match other.parse::<PathSpec>() {
            Ok(p) => Ok(Policy::RateTable(p.sample(grid)?)),
            Err(_) => Err(CliError::bad(format!("policy {other:?} must be zero, optimal or a path spec"))),
        },
    }
}

/// Simulates paths in parallel; each path draws from its own stream.
pub fn simulate(params: &ModelParams, price: &SampledPath, policy: &Policy, cfg: &SimConfig, q0: &InitialInventory) -> Result<ParticleEnsemble> {
    q0.validate()?;
    let plan = PolicyPlan::new(params, price, policy, cfg)?;
    let paths: Vec<_> = (0..cfg.n_paths).into_par_iter().map(|i| plan.simulate_path(cfg, q0, i)).collect();
    Ok(ParticleEnsemble::from_paths(cfg.grid, params.sigma, price, paths)?)
}

/// Smooth perturbation directions `w_j` used by the Gâteaux check.
pub fn gateaux_direction(j: usize, grid: TimeGrid) -> Vec<f64> {
    let t_end = grid.end();
    let freq = (j + 1) as f64 * std::f64::consts::PI / t_end;
    let tilt = if j.is_multiple_of(2) { 0.3 } else { -0.3 };
    grid.nodes().map(|t| (freq * t + j as f64).sin() + tilt * t / t_end).collect()
}

#[derive(Debug, Serialize)]
struct Summary {
    seed: u64,
    n_paths: usize,
    steps: usize,
    policy: String,
    payoff_mean: f64,
    payoff_std_error: f64,
    clearing_residual_max: f64,
    clearing_residual_rms: f64,
    gateaux_max_abs: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Sidecar {
    dtype: &'static str,
    order: &'static str,
    shape: [usize; 3],
    fields: [&'static str; 4],
    t0: f64,
    dt: f64,
}

fn write_ensemble(dir: &Path, e: &ParticleEnsemble) -> Result<()> {
    let nodes = e.nodes();
    let mut bytes = Vec::with_capacity(4 * e.n_paths * nodes * 8);
    let fields: [fn(&ParticleEnsemble, usize) -> &[f64]; 3] =
        [ParticleEnsemble::inventory, ParticleEnsemble::cash_path, ParticleEnsemble::control];
    for f in fields {
        for i in 0..e.n_paths {
            for v in f(e, i) {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    // Noise increments are one shorter than the paths; pad with a trailing zero.
    for i in 0..e.n_paths {
        let inc = e.increments(i);
        for k in 0..nodes {
            bytes.extend_from_slice(&inc.get(k).copied().unwrap_or(0.0).to_le_bytes());
        }
    }
    write_atomic(&dir.join("ensemble.bin"), &bytes)?;
    write_json(
        &dir.join("ensemble.json"),
        &Sidecar {
            dtype: "f64le",
            order: "row-major",
            shape: [4, e.n_paths, nodes],
            fields: ["inventory", "cash", "control", "noise"],
            t0: e.grid.t0(),
            dt: e.grid.dt(),
        },
    )
}

pub fn run(cfg: RunConfig, a: SimulateArgs) -> Result<()> {
    let (m, params, grid) = setup(&cfg, &a.model)?;
    if a.paths == 0 {
        return Err(CliError::bad("paths must be at least 1"));
    }
    let price = match &a.price {
        Some(s) => s.parse::<PathSpec>()?.sample(grid)?,
        None => PathSpec::Const(m.p0).sample(grid)?,
    };
    let policy = parse_policy(&a.policy, grid)?;
    let q0 = match &a.q0 {
        Some(s) => parse_q0(s)?,
        None => InitialInventory::Constant(m.e0),
    };
    let seed = a.seed.unwrap_or(cfg.seed);
    let sim_cfg = SimConfig { seed, n_paths: a.paths, grid };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.or(cfg.jobs).unwrap_or(0))
        .build()
        .map_err(|e| CliError::bad(e.to_string()))?;
    let ensemble = pool.install(|| simulate(&params, &price, &policy, &sim_cfg, &q0))?;
    let payoff = estimate_payoff(&params, &price, &ensemble)?;

    // Deterministic mean flow: the same policy without noise from the mean start.
    let quiet = ModelParams { sigma: 0.0, ..params };
    let one = SimConfig { seed, n_paths: 1, grid };
    let mean_run = simulate(&quiet, &price, &policy, &one, &InitialInventory::Constant(q0_mean(&q0)))?;
    let flow = mean_run.mean_control()?.map(|v| -v)?;
    let resid = clearing_residual(&ensemble, &flow)?;
    let rv = resid.values();
    let clearing_max = rv.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let clearing_rms = (rv.iter().map(|v| v * v).sum::<f64>() / rv.len() as f64).sqrt();

    let out_dir = a.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let mut gateaux_max = None;
    if a.gateaux {
        let fp = finite_params(&m, params, MicroKernel::ScaledAlphaOverN)?;
        let market = LinearImpactMarket { reference: price.clone() };
        let candidate = if a.equilibrium {
            symmetric_equilibrium_controls(&fp, grid)?
        } else {
            vec![vec![0.0; grid.len()]; fp.population]
        };
        let mut t = Table::new(["direction", "agent", "residual"]);
        let mut worst = 0.0f64;
        for j in 0..GATEAUX_DIRECTIONS {
            let agent = j % fp.population;
            let r = gateaux_residual(&fp, &market, &candidate, &gateaux_direction(j, grid), agent, &EPS_LADDER)?;
            worst = worst.max(r.abs());
            t.row([j.to_string(), agent.to_string(), num(r)]);
        }
        write_atomic(&out_dir.join("gateaux.csv"), &t.into_bytes())?;
        println!("max |gateaux residual| = {worst:e}");
        gateaux_max = Some(worst);
    }

    let mut t = Table::new(["time", "mean_inventory", "mean_control", "mean_cash", "mean_wealth", "clearing_residual"]);
    let n = ensemble.n_paths as f64;
    let mean_inv = ensemble.mean_inventory()?;
    let mean_ctl = ensemble.mean_control()?;
    let wealth: Vec<Vec<f64>> = (0..ensemble.n_paths).map(|i| ensemble.wealth(i)).collect();
    for (k, time) in grid.nodes().enumerate() {
        let cash = (0..ensemble.n_paths).map(|i| ensemble.cash_path(i)[k]).sum::<f64>() / n;
        let w = wealth.iter().map(|w| w[k]).sum::<f64>() / n;
        t.row([
            num(time),
            num(mean_inv.values()[k]),
            num(mean_ctl.values()[k]),
            num(cash),
            num(w),
            num(rv[k]),
        ]);
    }
    write_atomic(&out_dir.join("ensemble_summary.csv"), &t.into_bytes())?;
    if a.ensemble_bin {
        write_ensemble(&out_dir, &ensemble)?;
    }
    write_json(
        &out_dir.join("summary.json"),
        &Summary {
            seed,
            n_paths: a.paths,
            steps: m.steps,
            policy: a.policy.clone(),
            payoff_mean: payoff.mean,
            payoff_std_error: payoff.std_error,
            clearing_residual_max: clearing_max,
            clearing_residual_rms: clearing_rms,
            gateaux_max_abs: gateaux_max,
        },
    )?;
    println!("J = {} ± {}", payoff.mean, payoff.std_error);
    Ok(())
}
