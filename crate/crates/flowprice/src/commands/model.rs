use flowprice_core::finite_pop::{
    convergence_errors, expected_formed_price, permanent_impact_sanity, FinitePopParams, FlowFamily, MicroKernel,
};
use flowprice_core::mfg::{constant_price_flow, formed_price, induced_order_flow, solve_thetas, ModelParams};
use flowprice_core::TimeGrid;

use super::emit_columns;
use crate::cli::{ModelCommand, ModelFlags};
use crate::config::{ModelConfig, RunConfig};
use crate::error::{CliError, Result};
use crate::pathspec::PathSpec;

pub(crate) fn setup(cfg: &RunConfig, flags: &ModelFlags) -> Result<(ModelConfig, ModelParams, TimeGrid)> {
    let mut m = cfg.model.clone();
    flags.apply(&mut m);
    let params = ModelParams::new(m.kappa, m.phi, m.terminal_penalty, m.sigma, m.horizon, m.e0)?;
    if m.steps == 0 {
        return Err(CliError::bad("steps must be at least 1"));
    }
    let grid = TimeGrid::spanning(0.0, m.horizon, m.steps)?;
    Ok((m, params, grid))
}

fn spec(s: &str) -> Result<PathSpec> {
    s.parse()
}

pub(crate) fn finite_params(m: &ModelConfig, base: ModelParams, kernel: MicroKernel) -> Result<FinitePopParams> {
    let p = FinitePopParams::new(base, m.population, m.alpha, kernel, m.e0)?;
    for w in p.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(p)
}

pub fn run(cfg: RunConfig, which: ModelCommand) -> Result<()> {
    match which {
        ModelCommand::Theta { model, price, output } => {
            let (m, params, grid) = setup(&cfg, &model)?;
            let price = match price {
                Some(s) => spec(&s)?.sample(grid)?,
                None => PathSpec::Const(m.p0).sample(grid)?,
            };
            let th = solve_thetas(&params, &price)?;
            let times: Vec<f64> = grid.nodes().collect();
            emit_columns(
                &cfg,
                &output,
                &times,
                &[("theta0", th.theta0.values()), ("theta1", th.theta1.values()), ("theta2", th.theta2.values())],
            )
        }
        ModelCommand::Price { model, lambda, output } => {
            let (m, params, grid) = setup(&cfg, &model)?;
            let flow = spec(&lambda)?.sample(grid)?;
            let p = formed_price(&params, &flow, m.p0)?;
            let times: Vec<f64> = grid.nodes().collect();
            emit_columns(&cfg, &output, &times, &[("price", p.values())])
        }
        ModelCommand::Flow { model, price, lambda0, output } => {
            let (m, params, grid) = setup(&cfg, &model)?;
            let times: Vec<f64> = grid.nodes().collect();
            if let Some(l0) = lambda0 {
                let flow = constant_price_flow(&params, l0, grid)?;
                return emit_columns(&cfg, &output, &times, &[("lambda", flow.values())]);
            }
            let price = match price {
                Some(s) => spec(&s)?.sample(grid)?,
                None => PathSpec::Const(m.p0).sample(grid)?,
            };
            let st = induced_order_flow(&params, &price)?;
            emit_columns(
                &cfg,
                &output,
                &times,
                &[
                    ("E", st.mean_inventory.values()),
                    ("Pi", st.marginal_value.values()),
                    ("lambda", st.order_flow.values()),
                ],
            )
        }
        ModelCommand::Finprice { model, lambda, kernel, output } => {
            let (m, params, grid) = setup(&cfg, &model)?;
            let kernel = match kernel.as_str() {
                "alpha-over-n" => MicroKernel::ScaledAlphaOverN,
                other => MicroKernel::ConstantOverU(spec(other)?.sample(grid)?),
            };
            let fp = finite_params(&m, params, kernel)?;
            let times: Vec<f64> = grid.nodes().collect();
            let (d, sanity) = match lambda {
                Some(s) => (expected_formed_price(&fp, &spec(&s)?.sample(grid)?, m.p0)?, None),
                None => {
                    let chk = permanent_impact_sanity(&fp, m.p0, grid)?;
                    eprintln!("max |total - (p0 + alpha (E_N - E_N(0)))| = {:e}", chk.max_gap);
                    (chk.decomposition, Some(chk.price))
                }
            };
            let mut cols: Vec<(&str, &[f64])> = vec![
                ("total", d.total.values()),
                ("inertia", d.term_inertia.values()),
                ("memory", d.term_memory.values()),
                ("instant", d.term_instant.values()),
                ("micro", d.term_micro.values()),
                ("noise", d.term_noise.values()),
            ];
            if let Some(s) = &sanity {
                cols.push(("permanent_impact", s.values()));
            }
            emit_columns(&cfg, &output, &times, &cols)
        }
        ModelCommand::Converge { model, ns, lambda, output } => {
            let (m, params, grid) = setup(&cfg, &model)?;
            let flow = spec(&lambda)?.sample(grid)?;
            let fp = FinitePopParams::new(params, 1, m.alpha, MicroKernel::ScaledAlphaOverN, m.e0)?;
            let errs = convergence_errors(&fp, &ns, &FlowFamily::Fixed(flow.clone()), &flow, m.p0)?;
            let mut t = crate::io::Table::new(["N", "error", "N_error", "ratio"]);
            for (i, e) in errs.iter().enumerate() {
                let ratio = if i > 0 { crate::io::num(e.error / errs[i - 1].error) } else { String::new() };
                t.row([
                    e.population.to_string(),
                    crate::io::num(e.error),
                    crate::io::num(e.population as f64 * e.error),
                    ratio,
                ]);
            }
            crate::io::emit(output.out.as_deref(), &t.into_bytes())
        }
    }
}
