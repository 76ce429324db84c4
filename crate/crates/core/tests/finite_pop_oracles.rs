use flowprice_core::finite_pop::*;
use flowprice_core::mfg::{formed_price, ModelParams};
use flowprice_core::path::{cumulative_trapezoid, trapezoid};
use flowprice_core::{SampledPath, TimeGrid};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

fn base(kappa: f64, phi: f64, a: f64, t: f64) -> ModelParams {
    ModelParams::new(kappa, phi, a, 0.0, t, 0.0).unwrap()
}

fn linear(base: ModelParams, n: usize, alpha: f64, e0: f64) -> FinitePopParams {
    FinitePopParams::new(base, n, alpha, MicroKernel::ScaledAlphaOverN, e0).unwrap()
}

/// RK4 for `2κE'' + aE' − 2φE = 0` from `(E(0), E'(0)) = (e0, s)`, returning
/// the trajectory of `(E, E')` at `steps + 1` nodes.
fn integrate(p: &FinitePopParams, s: f64, steps: usize) -> Vec<[f64; 2]> {
    let kappa = p.base.kappa;
    let phi = p.base.phi;
    let a = p.alpha * (1.0 - 1.0 / p.population as f64);
    let h = p.base.horizon / steps as f64;
    let f = |y: [f64; 2]| [y[1], (2.0 * phi * y[0] - a * y[1]) / (2.0 * kappa)];
    let mut y = [p.mean_inventory0, s];
    let mut out = vec![y];
    for _ in 0..steps {
        let k1 = f(y);
        let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
        for i in 0..2 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push(y);
    }
    out
}

/// Shooting on `E'(0)` with bisection until `κE'(T) + A E(T) = 0`.
fn shooting(p: &FinitePopParams, steps: usize) -> Vec<f64> {
    let miss = |s: f64| {
        let end = *integrate(p, s, steps).last().unwrap();
        p.base.kappa * end[1] + p.base.terminal_penalty * end[0]
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    while miss(lo).signum() == miss(hi).signum() {
        lo *= 2.0;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if miss(mid).signum() == miss(lo).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    integrate(p, 0.5 * (lo + hi), steps).iter().map(|y| y[0]).collect()
}

#[test]
fn bvp_matches_shooting_oracle() {
    let p = linear(base(1.0, 1.0, 1.0, 1.0), 10, 0.5, 1.0);
    let sol = mean_inventory_bvp(&p).unwrap();
    let steps = 4000;
    let oracle = shooting(&p, steps);
    let grid = TimeGrid::spanning(0.0, 1.0, steps).unwrap();
    let diff = grid
        .nodes()
        .zip(&oracle)
        .fold(0.0f64, |m, (t, o)| m.max((sol.value(t) - o).abs()));
    assert!(diff < 1e-8, "{diff}");

    let mut rng = SmallRng::seed_from_u64(9);
    for _ in 0..20 {
        let b = base(
            rng.random_range(0.3..2.0),
            rng.random_range(0.0..2.0),
            rng.random_range(0.0..2.0),
            rng.random_range(0.5..2.0),
        );
        let p = linear(b, rng.random_range(1..50), rng.random_range(0.0..2.0), rng.random_range(-2.0..2.0));
        let sol = mean_inventory_bvp(&p).unwrap();
        let oracle = shooting(&p, 2000);
        let grid = TimeGrid::spanning(0.0, p.base.horizon, 2000).unwrap();
        for (t, o) in grid.nodes().zip(&oracle) {
            assert!((sol.value(t) - o).abs() < 1e-8);
        }
    }
}

#[test]
fn bvp_residual_and_boundary_conditions() {
    let mut rng = SmallRng::seed_from_u64(31);
    for _ in 0..30 {
        let b = base(
            rng.random_range(0.3..2.0),
            rng.random_range(0.0..2.0),
            rng.random_range(0.0..2.0),
            rng.random_range(0.5..2.0),
        );
        let p = linear(b, rng.random_range(1..100), rng.random_range(0.0..2.0), rng.random_range(-2.0..2.0));
        let sol = mean_inventory_bvp(&p).unwrap();
        let a = p.drift_coefficient();
        let horizon = p.base.horizon;
        let h = 1e-3 * horizon;
        for k in 1..1000 {
            let t = k as f64 * h;
            let d1 = (sol.value(t + h) - sol.value(t - h)) / (2.0 * h);
            let d2 = (sol.value(t + h) - 2.0 * sol.value(t) + sol.value(t - h)) / (h * h);
            let r = 2.0 * p.base.kappa * d2 + a * d1 - 2.0 * p.base.phi * sol.value(t);
            assert!(r.abs() < 1e-5, "residual {r}");
        }
        assert!((sol.value(0.0) - p.mean_inventory0).abs() < 1e-10);
        let end = p.base.kappa * sol.derivative(horizon) + p.base.terminal_penalty * sol.value(horizon);
        assert!(end.abs() < 1e-10);
    }
}

#[test]
fn decomposition_matches_fine_quadrature() {
    let b = ModelParams::new(0.8, 1.1, 1.0, 0.0, 1.0, 0.6).unwrap();
    let p = linear(b, 7, 0.9, 0.6);
    let lam = |t: f64| 0.5 + (2.0 * t).sin() - 0.3 * t * t;
    let n = 5000;
    let grid = TimeGrid::spanning(0.0, 1.0, n).unwrap();
    let flow = SampledPath::from_fn(grid, lam).unwrap();
    let d = expected_formed_price(&p, &flow, 30.0).unwrap();

    let fine = 10 * n;
    let h = 1.0 / fine as f64;
    let lf: Vec<f64> = (0..=fine).map(|k| lam(k as f64 * h)).collect();
    let running = cumulative_trapezoid(&lf, h);
    let xi = p.alpha / p.population as f64;
    for j in (0..=n).step_by(50) {
        let k = 10 * j;
        let t = k as f64 * h;
        let kernel: Vec<f64> = (0..=k).map(|i| (t - i as f64 * h) * lf[i]).collect();
        let memory = -2.0 * p.base.phi * trapezoid(&kernel, h);
        let micro = -xi * running[k];
        let inertia = 2.0 * p.base.phi * p.mean_inventory0 * t;
        let instant = 2.0 * p.base.kappa * (lf[k] - lf[0]);
        assert!((d.term_memory.values()[j] - memory).abs() < 1e-7);
        assert!((d.term_micro.values()[j] - micro).abs() < 1e-7);
        assert!((d.term_inertia.values()[j] - inertia).abs() < 1e-12);
        assert!((d.term_instant.values()[j] - instant).abs() < 1e-12);
    }
}

#[test]
fn decomposition_is_additive() {
    let b = ModelParams::new(1.3, 0.4, 1.0, 0.0, 2.0, -1.0).unwrap();
    let grid = TimeGrid::spanning(0.0, 2.0, 400).unwrap();
    let xi = SampledPath::from_fn(grid, |t| 0.1 + 0.05 * t).unwrap();
    let p = FinitePopParams::new(b, 20, 1.0, MicroKernel::ConstantOverU(xi), -1.0).unwrap();
    let flow = SampledPath::from_fn(grid, |t| (3.0 * t).cos()).unwrap();
    let d = expected_formed_price(&p, &flow, 55.0).unwrap();
    for k in 0..grid.len() {
        let sum = d.p0
            + d.term_inertia.values()[k]
            + d.term_memory.values()[k]
            + d.term_instant.values()[k]
            + d.term_micro.values()[k]
            + d.term_noise.values()[k];
        assert!((d.total.values()[k] - sum).abs() < 1e-12);
    }
}

#[test]
fn zero_kernel_reduces_to_the_mean_field_price() {
    let b = ModelParams::new(0.9, 0.7, 1.0, 0.0, 1.0, 0.8).unwrap();
    let grid = TimeGrid::spanning(0.0, 1.0, 300).unwrap();
    let p = FinitePopParams::new(b, 5, 2.0, MicroKernel::ConstantOverU(SampledPath::zeros(grid)), 0.8).unwrap();
    let flow = SampledPath::from_fn(grid, |t| 1.0 - t + (7.0 * t).sin()).unwrap();
    let d = expected_formed_price(&p, &flow, 12.0).unwrap();
    let mfg = formed_price(&b, &flow, 12.0).unwrap();
    assert!(d.total.max_abs_diff(&mfg).unwrap() < 1e-12);
}

#[test]
fn permanent_impact_sanity_holds() {
    let mut rng = SmallRng::seed_from_u64(4);
    for _ in 0..50 {
        let horizon = rng.random_range(0.5..2.0);
        let b = base(rng.random_range(0.3..2.0), rng.random_range(0.0..2.0), rng.random_range(0.0..2.0), horizon);
        let p = linear(b, rng.random_range(1..100), rng.random_range(0.0..2.0), rng.random_range(-2.0..2.0));
        let grid = TimeGrid::spanning(0.0, horizon, 10_000).unwrap();
        let chk = permanent_impact_sanity(&p, 100.0, grid).unwrap();
        assert!(chk.max_gap < 1e-6, "gap {}", chk.max_gap);
        assert_eq!(chk.price.first(), 100.0);
    }
}

#[test]
fn convergence_is_exactly_first_order() {
    let b = ModelParams::new(1.0, 0.5, 1.0, 0.0, 1.0, 0.3).unwrap();
    let p = linear(b, 1, 1.0, 0.3);
    let grid = TimeGrid::spanning(0.0, 1.0, 500).unwrap();
    let flow = SampledPath::from_fn(grid, |t| 1.0 + t * (1.0 - t)).unwrap();
    let ns = [5usize, 10, 20, 40, 80];
    let errs = convergence_errors(&p, &ns, &FlowFamily::Fixed(flow.clone()), &flow, 100.0).unwrap();
    let scaled: Vec<f64> = errs.iter().map(|e| e.population as f64 * e.error).collect();
    for s in &scaled {
        assert!((s - scaled[0]).abs() < 1e-9);
    }
    for w in errs.windows(2) {
        let ratio = w[1].error / w[0].error;
        assert!((0.4..=0.6).contains(&ratio));
    }
    assert!(errs.last().unwrap().error < errs[0].error / 10.0);

    let zero = FinitePopParams::new(b, 1, 0.0, MicroKernel::ScaledAlphaOverN, 0.3).unwrap();
    let errs = convergence_errors(&zero, &ns, &FlowFamily::Fixed(flow.clone()), &flow, 100.0).unwrap();
    assert!(errs.iter().all(|e| e.error < 1e-12));
}

#[test]
fn perturbed_family_converges() {
    let b = ModelParams::new(1.0, 0.5, 1.0, 0.0, 1.0, 0.0).unwrap();
    let p = linear(b, 1, 0.5, 0.0);
    let grid = TimeGrid::spanning(0.0, 1.0, 200).unwrap();
    let limit = SampledPath::from_fn(grid, |t| (2.0 * t).cos()).unwrap();
    let shape = SampledPath::from_fn(grid, |t| t).unwrap();
    let family = FlowFamily::InverseNPerturbation { limit: limit.clone(), shape, scale: 1.0 };
    let errs = convergence_errors(&p, &[10, 100, 1000], &family, &limit, 50.0).unwrap();
    assert!(errs[0].error > errs[1].error && errs[1].error > errs[2].error);
}
