use flowprice_core::finite_pop::{FinitePopParams, MicroKernel};
use flowprice_core::mfg::{formed_price, induced_order_flow, solve_thetas, value_function, ModelParams};
use flowprice_core::sim::*;
use flowprice_core::{SampledPath, TimeGrid};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

fn params(kappa: f64, phi: f64, a: f64, sigma: f64, t: f64) -> ModelParams {
    ModelParams::new(kappa, phi, a, sigma, t, 0.0).unwrap()
}

fn payoff_gap(n: usize) -> f64 {
    let p = params(1.0, 1.0, 0.0, 0.0, 1.0);
    let grid = TimeGrid::spanning(0.0, 1.0, n).unwrap();
    let price = SampledPath::constant(grid, 100.0).unwrap();
    let cfg = SimConfig { seed: 1, n_paths: 1, grid };
    let e = simulate_population(&p, &price, &Policy::FeedbackOptimal, &cfg, &InitialInventory::Constant(2.0)).unwrap();
    let j = estimate_payoff(&p, &price, &e).unwrap();
    let v = value_function(&solve_thetas(&p, &price).unwrap(), 0.0, 2.0).unwrap();
    j.mean - v
}

#[test]
fn feedback_payoff_attains_the_value_function() {
    assert!(payoff_gap(10_000).abs() < 1e-4);
    let (a, b) = (payoff_gap(500).abs(), payoff_gap(1000).abs());
    assert!(a / b > 1.8, "error ratio {}", a / b);
}

#[test]
fn deterministic_feedback_tracks_mean_field_inventory() {
    let p = ModelParams::new(0.8, 1.2, 0.5, 0.0, 1.0, 1.5).unwrap();
    for n in [500usize, 1000] {
        let grid = TimeGrid::spanning(0.0, 1.0, n).unwrap();
        let price = SampledPath::from_fn(grid, |t| 50.0 + (2.0 * t).sin()).unwrap();
        let cfg = SimConfig { seed: 0, n_paths: 3, grid };
        let e = simulate_population(&p, &price, &Policy::FeedbackOptimal, &cfg, &InitialInventory::Constant(1.5)).unwrap();
        let st = induced_order_flow(&p, &price).unwrap();
        let gap = e.mean_inventory().unwrap().max_abs_diff(&st.mean_inventory).unwrap();
        assert!(gap < 2.0 * grid.dt(), "n = {n}: {gap}");
    }
}

#[test]
fn exact_optimal_trajectory_for_constant_price() {
    // κ = φ = 1, A = 0: q*(t) = q0 cosh(T − t)/cosh T.
    let p = params(1.0, 1.0, 0.0, 0.0, 1.0);
    let grid = TimeGrid::spanning(0.0, 1.0, 2000).unwrap();
    let price = SampledPath::constant(grid, 10.0).unwrap();
    let cfg = SimConfig { seed: 0, n_paths: 1, grid };
    let e = simulate_population(&p, &price, &Policy::FeedbackOptimal, &cfg, &InitialInventory::Constant(1.0)).unwrap();
    for (k, t) in grid.nodes().enumerate() {
        let exact = (1.0 - t).cosh() / 1f64.cosh();
        assert!((e.inventory(0)[k] - exact).abs() < grid.dt());
    }
}

fn gateaux_setup() -> (FinitePopParams, LinearImpactMarket, TimeGrid) {
    let b = ModelParams::new(1.0, 1.0, 1.0, 0.0, 1.0, 1.0).unwrap();
    let fp = FinitePopParams::new(b, 10, 0.5, MicroKernel::ScaledAlphaOverN, 1.0).unwrap();
    let grid = TimeGrid::spanning(0.0, 1.0, 2000).unwrap();
    let market = LinearImpactMarket { reference: SampledPath::constant(grid, 100.0).unwrap() };
    (fp, market, grid)
}

fn random_direction(rng: &mut SmallRng, grid: TimeGrid) -> Vec<f64> {
    let a = rng.random_range(-1.0..1.0);
    let b = rng.random_range(0.5..6.0);
    let c = rng.random_range(0.0..6.0);
    let d = rng.random_range(-1.0..1.0);
    grid.nodes().map(|t| a * (b * t + c).sin() + d * t).collect()
}

#[test]
fn gateaux_residual_vanishes_at_the_symmetric_equilibrium() {
    let (fp, market, grid) = gateaux_setup();
    let cand = symmetric_equilibrium_controls(&fp, grid).unwrap();
    let mut rng = SmallRng::seed_from_u64(100);
    for i in 0..10 {
        let w = random_direction(&mut rng, grid);
        let r = gateaux_residual(&fp, &market, &cand, &w, i % fp.population, &[1e-2, 5e-3]).unwrap();
        assert!(r.abs() < 1e-4, "direction {i}: {r}");
    }
}

#[test]
fn gateaux_residual_detects_non_equilibrium() {
    let (fp, market, grid) = gateaux_setup();
    let idle = vec![vec![0.0; grid.len()]; fp.population];
    let mut rng = SmallRng::seed_from_u64(100);
    let worst = (0..10)
        .map(|_| {
            let w = random_direction(&mut rng, grid);
            gateaux_residual(&fp, &market, &idle, &w, 0, &[1e-2, 5e-3]).unwrap().abs()
        })
        .fold(0.0f64, f64::max);
    assert!(worst > 1e-2, "{worst}");
}

#[test]
fn clearing_residual_shrinks_like_inverse_root_n() {
    let p = params(1.0, 1.0, 0.5, 0.5, 1.0);
    let grid = TimeGrid::spanning(0.0, 1.0, 100).unwrap();
    let price = SampledPath::constant(grid, 20.0).unwrap();
    let q0 = InitialInventory::Constant(1.0);
    // The discrete scheme is affine, so its noiseless run is the exact mean.
    let det = ModelParams { sigma: 0.0, ..p };
    let cfg = SimConfig { seed: 0, n_paths: 1, grid };
    let mean = simulate_population(&det, &price, &Policy::FeedbackOptimal, &cfg, &q0).unwrap();
    let flow = mean.mean_control().unwrap().map(|v| -v).unwrap();

    let avg_max = |n_paths: usize, reps: u64| {
        (0..reps)
            .map(|seed| {
                let cfg = SimConfig { seed, n_paths, grid };
                let e = simulate_population(&p, &price, &Policy::FeedbackOptimal, &cfg, &q0).unwrap();
                let r = clearing_residual(&e, &flow).unwrap();
                r.values().iter().fold(0.0f64, |m, v| m.max(v.abs()))
            })
            .sum::<f64>()
            / reps as f64
    };
    let small = avg_max(100, 40);
    let large = avg_max(10_000, 10);
    let ratio = small / large;
    assert!((5.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn quadratic_variation_ratio_approaches_four_kappa_squared() {
    let kappa = 1.0;
    let p = ModelParams::new(kappa, 1.0, 0.0, 0.0, 1.0, 0.5).unwrap();
    let n = 100_000;
    let grid = TimeGrid::spanning(0.0, 1.0, n).unwrap();
    let sq = grid.dt().sqrt();
    let mut ratios = Vec::new();
    for seed in 0..100 {
        let mut rng = SmallRng::seed_from_u64(seed);
        let mut acc = 0.0;
        let walk: Vec<f64> = (0..=n)
            .map(|k| {
                if k > 0 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    acc += sq * z;
                }
                acc
            })
            .collect();
        let lam = SampledPath::new(grid, walk).unwrap();
        let price = formed_price(&p, &lam, 100.0).unwrap();
        let r = qv_ratio(&price, &lam).unwrap();
        assert!((3.6..=4.4).contains(&r), "seed {seed}: {r}");
        ratios.push(r);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((mean - 4.0 * kappa * kappa).abs() < 0.4);
}

#[test]
fn smooth_flow_has_vanishing_quadratic_variation() {
    let qv = |n: usize| {
        let grid = TimeGrid::spanning(0.0, 1.0, n).unwrap();
        let lam: Vec<f64> = grid.nodes().map(|t| (3.0 * t).sin()).collect();
        quadratic_variation(&lam)
    };
    let ratio = qv(1000) / qv(2000);
    assert!((ratio - 2.0).abs() < 0.01);
}

#[test]
fn noise_martingale_has_zero_mean() {
    let p = params(1.0, 1.0, 1.0, 0.8, 1.0);
    let grid = TimeGrid::spanning(0.0, 1.0, 200).unwrap();
    let price = SampledPath::constant(grid, 5.0).unwrap();
    let cfg = SimConfig { seed: 9, n_paths: 4000, grid };
    let e = simulate_population(&p, &price, &Policy::Zero, &cfg, &InitialInventory::Constant(0.0)).unwrap();
    let est = noise_average(&e).unwrap();
    for k in [50usize, 100, 200] {
        assert!(est.mean.values()[k].abs() < 3.0 * est.std_error[k]);
    }
    // Zero policy: the inventory is the noise itself.
    for k in 0..grid.len() {
        assert!((e.mean_inventory().unwrap().values()[k] - est.mean.values()[k]).abs() < 1e-12);
    }
}

#[test]
fn rate_table_policy_is_open_loop() {
    let p = params(1.0, 0.0, 0.0, 0.0, 1.0);
    let grid = TimeGrid::spanning(0.0, 1.0, 100).unwrap();
    let price = SampledPath::constant(grid, 10.0).unwrap();
    let table = SampledPath::constant(grid, -1.0).unwrap();
    let cfg = SimConfig { seed: 0, n_paths: 2, grid };
    let e = simulate_population(&p, &price, &Policy::RateTable(table), &cfg, &InitialInventory::Constant(1.0)).unwrap();
    assert!(e.inventory(1)[100].abs() < 1e-12);
    // Cash: −∫(p + κν)ν = −(10 − 1)(−1) = 9.
    assert!((e.cash_path(0)[100] - 9.0).abs() < 1e-12);
}
