use flowprice_core::adf::*;
use flowprice_core::mfg::{formed_price, ModelParams};
use flowprice_core::path::trapezoid;
use flowprice_core::regress::*;
use flowprice_core::report::*;
use flowprice_core::{SampledPath, TimeGrid};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

fn normal(rng: &mut SmallRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Solves `XᵀX β = Xᵀy` by Gaussian elimination with partial pivoting.
fn normal_equations(columns: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = columns.len();
    let mut m = vec![vec![0.0; p + 1]; p];
    for i in 0..p {
        for j in 0..p {
            m[i][j] = columns[i].iter().zip(&columns[j]).map(|(a, b)| a * b).sum();
        }
        m[i][p] = columns[i].iter().zip(y).map(|(a, b)| a * b).sum();
    }
    for c in 0..p {
        let piv = (c..p).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
        m.swap(c, piv);
        for r in c + 1..p {
            let f = m[r][c] / m[c][c];
            for k in c..=p {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][p] - s) / m[i][i];
    }
    x
}

fn random_design(rng: &mut SmallRng, n: usize, p: usize) -> DesignMatrix {
    let mut columns = vec![vec![1.0; n]];
    for _ in 1..p {
        columns.push((0..n).map(|_| normal(rng)).collect());
    }
    let y = (0..n)
        .map(|i| columns.iter().enumerate().map(|(j, c)| (j as f64 + 1.0) * c[i]).sum::<f64>() + normal(rng))
        .collect();
    let names = (0..p).map(|j| format!("x{j}")).collect();
    DesignMatrix::new(names, columns, y).unwrap()
}

#[test]
fn qr_matches_normal_equations() {
    let mut rng = SmallRng::seed_from_u64(1);
    for _ in 0..20 {
        let d = random_design(&mut rng, 180, 5);
        let fit = ols_fit(&d).unwrap();
        let oracle = normal_equations(&d.columns, &d.target);
        for (a, b) in fit.coeffs.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-3));
        }
        for col in &d.columns {
            let dot: f64 = col.iter().zip(&fit.residuals).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-8);
        }
        for i in 0..d.n() {
            assert_eq!(fit.residuals[i], d.target[i] - fit.fitted[i]);
        }
        assert!((0.0..=1.0).contains(&fit.r2));
        let adj = 1.0 - (1.0 - fit.r2) * 179.0 / 175.0;
        assert!((fit.adj_r2 - adj).abs() < 1e-15);
    }
}

#[test]
fn memory_covariate_matches_composite_trapezoid() {
    let times: Vec<f64> = (0..11).map(|k| k as f64 / 10.0).collect();
    let d = build_covariates(&times, &times, false, &[0.0; 11]).unwrap();
    let s2 = d.column("S2").unwrap();
    for k in 0..11 {
        let kernel: Vec<f64> = (0..=k).map(|j| (times[k] - times[j]) * times[j]).collect();
        assert!((s2[k] - trapezoid(&kernel, 0.1)).abs() < 1e-15);
    }
    assert!((s2[10] - 1.0 / 6.0).abs() < 2e-3);
}

#[test]
fn adding_the_micro_covariate_never_lowers_r2() {
    let mut rng = SmallRng::seed_from_u64(6);
    let times: Vec<f64> = (0..180).map(|k| 30.0 + k as f64 / 6.0).collect();
    for _ in 0..100 {
        let lam: Vec<f64> = (0..180).map(|_| 50.0 * normal(&mut rng)).collect();
        let y: Vec<f64> = (0..180).map(|k| 100.0 + 0.01 * normal(&mut rng) + 1e-4 * lam[k]).collect();
        let small = ols_fit(&build_covariates(&lam, &times, false, &y).unwrap()).unwrap();
        let big = ols_fit(&build_covariates(&lam, &times, true, &y).unwrap()).unwrap();
        assert!(big.r2 >= small.r2 - 1e-12, "{} < {}", big.r2, small.r2);
    }
}

#[test]
fn synthetic_prices_recover_impact_coefficients() {
    // Minutes; 10-second buckets over a 30-minute window.
    let kappa = 2e-3;
    let phi = 5e-5;
    let e0 = 40.0;
    let tau = 1e-3;
    let params = ModelParams::new(kappa, phi, 0.0, 0.0, 30.0, e0).unwrap();
    let grid = TimeGrid::new(0.0, 1.0 / 6.0, 179).unwrap();
    let times: Vec<f64> = grid.nodes().map(|t| 60.0 + t).collect();
    let mut bias2 = Vec::new();
    let mut bias3 = Vec::new();
    let mut se2 = Vec::new();
    let mut se3 = Vec::new();
    let mut covered = 0;
    for seed in 0..100 {
        let mut rng = SmallRng::seed_from_u64(seed);
        let mut level = 0.0;
        let lam: Vec<f64> = (0..180)
            .map(|_| {
                level = 0.8 * level + 10.0 * normal(&mut rng);
                level
            })
            .collect();
        let flow = SampledPath::new(grid, lam.clone()).unwrap();
        let price = formed_price(&params, &flow, 100.0).unwrap();
        let y: Vec<f64> = price.values().iter().map(|p| p + tau * normal(&mut rng)).collect();
        let fit = ols_fit(&build_covariates(&lam, &times, false, &y).unwrap()).unwrap();
        let (a2, a3) = (fit.coeff("S2").unwrap(), fit.coeff("S3").unwrap());
        let (s2, s3) = (fit.std_error("S2").unwrap(), fit.std_error("S3").unwrap());
        if (a2 + 2.0 * phi).abs() < 3.0 * s2 && (a3 - 2.0 * kappa).abs() < 3.0 * s3 {
            covered += 1;
        }
        bias2.push(a2 + 2.0 * phi);
        bias3.push(a3 - 2.0 * kappa);
        se2.push(s2);
        se3.push(s3);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let root_n = (bias2.len() as f64).sqrt();
    assert!(mean(&bias2).abs() < 3.0 * mean(&se2) / root_n);
    assert!(mean(&bias3).abs() < 3.0 * mean(&se3) / root_n);
    assert!(covered >= 95, "{covered} of 100 seeds within 3 standard errors");
}

fn random_walk(rng: &mut SmallRng, n: usize) -> Vec<f64> {
    let mut acc = 0.0;
    (0..n)
        .map(|_| {
            acc += normal(rng);
            acc
        })
        .collect()
}

#[test]
fn white_noise_statistic_is_strongly_negative() {
    let mut rng = SmallRng::seed_from_u64(21);
    let hits = (0..1000)
        .filter(|_| {
            let s: Vec<f64> = (0..250).map(|_| normal(&mut rng)).collect();
            adf_test(&s, 0).unwrap().statistic <= -10.0
        })
        .count();
    assert!(hits >= 990, "{hits}");
}

#[test]
fn random_walk_rejection_rate_is_nominal() {
    let mut rng = SmallRng::seed_from_u64(22);
    let reps = 5000;
    let rejections = (0..reps)
        .filter(|_| adf_test(&random_walk(&mut rng, 250), 0).unwrap().reject_5pct)
        .count();
    let rate = rejections as f64 / reps as f64;
    assert!((0.03..=0.07).contains(&rate), "rate {rate}");
}

#[test]
fn adf_statistic_is_scale_invariant() {
    let mut rng = SmallRng::seed_from_u64(23);
    for lags in 0..3 {
        let s = random_walk(&mut rng, 250);
        let base = adf_test(&s, lags).unwrap().statistic;
        for c in [1e-3, 0.5, 7.0, 1e4] {
            let scaled: Vec<f64> = s.iter().map(|v| c * v).collect();
            assert!((adf_test(&scaled, lags).unwrap().statistic - base).abs() < 1e-10);
        }
    }
}

#[test]
fn report_matches_flat_recomputation() {
    let mut rng = SmallRng::seed_from_u64(40);
    let mut fits = Vec::new();
    for day in 0..5 {
        for window in 0..12 {
            for model in ModelKind::ALL {
                fits.push(FitRecord {
                    stock: if window % 2 == 0 { "AAA".into() } else { "BBB".into() },
                    day: format!("2014-11-0{}", day + 3),
                    window,
                    model,
                    coeff_names: vec!["a".into(), "b".into()],
                    coeffs: vec![normal(&mut rng), 100.0 + normal(&mut rng)],
                    r2: rng.random_range(0.0..1.0),
                    adj_r2: rng.random_range(0.0..1.0),
                    adf_statistic: Some(-3.0 + normal(&mut rng)),
                    sq_rel_diff_mean: Some(rng.random_range(0.0..1e-6)),
                });
            }
        }
    }
    let rows = aggregate_report(&fits).unwrap();
    assert_eq!(rows.len(), 12);
    for row in &rows {
        let members: Vec<&FitRecord> = fits.iter().filter(|f| f.stock == row.stock && f.model == row.model).collect();
        // Welford, one pass.
        let welford = |vals: Vec<f64>| {
            let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
            for v in vals {
                n += 1.0;
                let d = v - mean;
                mean += d / n;
                m2 += d * (v - mean);
            }
            (mean, (m2 / (n - 1.0)).sqrt())
        };
        let check = |s: &Summary, vals: Vec<f64>| {
            let (m, sd) = welford(vals);
            assert!((s.mean - m).abs() < 1e-12 * m.abs().max(1.0));
            assert!((s.std - sd).abs() < 1e-12 * sd.max(1.0));
        };
        assert_eq!(row.r2.count, 30);
        check(&row.r2, members.iter().map(|f| f.r2).collect());
        check(&row.adj_r2, members.iter().map(|f| f.adj_r2).collect());
        check(&row.coeffs[1], members.iter().map(|f| f.coeffs[1]).collect());
        check(row.adf_statistic.as_ref().unwrap(), members.iter().map(|f| f.adf_statistic.unwrap()).collect());
    }
}
