//! Estimation, posterior expansion and experiment bookkeeping on simulated data.

use truncgeo::experiments::{self, binomial_se, ExperimentConfig};
use truncgeo::inference::{fit_mle, posterior_grid, ExpansionStats, GridConfig};
use truncgeo::models::{ModelSpec, ParamPoint};
use truncgeo::priors::PriorSpec;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    0.5 * (v[(n - 1) / 2] + v[n / 2])
}

#[test]
fn mle_error_rates() {
    let m = ModelSpec::trunc_exp();
    let truth = ParamPoint::new(vec![2.0], 0.5);
    let errors = |n: usize| {
        let mut th = Vec::new();
        let mut ga = Vec::new();
        for r in 0..2000 {
            let s = m
                .draw_sample(&truth, n, experiments::replication_seed(11, n, 0, r))
                .unwrap();
            let fit = fit_mle(&m, &s).unwrap();
            th.push((fit.theta_hat[0] - 2.0).abs());
            ga.push(fit.gamma_hat - 0.5);
        }
        (median(th), median(ga))
    };
    let (t1, g1) = errors(50);
    let (t4, g4) = errors(200);
    assert!((1.5..=2.7).contains(&(t1 / t4)), "theta ratio {}", t1 / t4);
    assert!((3.0..=5.5).contains(&(g1 / g4)), "gamma ratio {}", g1 / g4);
}

#[test]
fn mle_on_truncated_normal_is_consistent() {
    let m = ModelSpec::trunc_normal_natural();
    let truth = ParamPoint::new(vec![0.5, -0.5], 0.0);
    let s = m.draw_sample(&truth, 4000, 5).unwrap();
    let fit = fit_mle(&m, &s).unwrap();
    assert!(fit.converged);
    assert!((fit.theta_hat[0] - 0.5).abs() < 0.15, "{:?}", fit.theta_hat);
    assert!((fit.theta_hat[1] + 0.5).abs() < 0.15, "{:?}", fit.theta_hat);
    assert!(fit.gamma_hat >= 0.0 && fit.gamma_hat < 0.01);
}

/// Mean sup-norm gap over the standardized box for each expansion order.
fn mean_gaps(n: usize, reps: usize) -> [f64; 3] {
    let m = ModelSpec::trunc_exp();
    let prior = PriorSpec::parse("1/theta", &m).unwrap();
    let truth = ParamPoint::new(vec![2.0], 0.0);
    let mut total = [0.0; 3];
    for r in 0..reps {
        let s = m.draw_sample(&truth, n, 1000 + r as u64).unwrap();
        let fit = fit_mle(&m, &s).unwrap();
        let post = posterior_grid(&m, &s, &prior, &fit, &GridConfig::default()).unwrap();
        let stats = ExpansionStats::new(&m, &s, &prior, &fit).unwrap();
        let sigma = post.sigma_hat[0];
        let mut sup = [0.0f64; 3];
        for i in 0..=24 {
            let u = sigma * (-3.0 + 0.25 * i as f64);
            for j in 0..=20 {
                let t = -0.25 * j as f64;
                let exact = post.density_ut(&m, &s, &prior, &[u], t).unwrap();
                for (k, slot) in sup.iter_mut().enumerate() {
                    *slot = slot.max((stats.density(&[u], t, k).unwrap() - exact).abs());
                }
            }
        }
        for k in 0..3 {
            total[k] += sup[k] / reps as f64;
        }
    }
    total
}

#[test]
fn second_order_expansion_improves_on_first() {
    let [g0, g1, g2] = mean_gaps(100, 8);
    assert!(g1 < g0, "{g0} {g1}");
    assert!(g2 < g1, "order 1 gap {g1}, order 2 gap {g2}");
}

#[test]
fn reported_se_matches_counts() {
    let mut cfg = ExperimentConfig::new(
        "trunc_exp",
        ParamPoint::new(vec![1.0], 0.0),
        &["1/theta", "1"],
        &[10, 20],
        150,
        3,
    );
    cfg.levels = vec![0.25, 0.5, 0.95];
    let report = experiments::run_coverage(&cfg).unwrap();
    assert_eq!(report.cells.len(), 12);
    for cell in &report.cells {
        let est = cell.estimate.unwrap();
        assert_eq!(est, cell.covered as f64 / cell.effective as f64);
        assert_eq!(cell.se.unwrap(), binomial_se(est, cell.effective));
        assert_eq!(cell.effective + cell.degenerate, 150);
    }
}

#[test]
fn matching_prior_posterior_mean_tracks_bias_corrected_mle() {
    let cfg = ExperimentConfig::new(
        "trunc_exp",
        ParamPoint::new(vec![2.0], 0.0),
        &["theta", "1"],
        &[20, 40],
        400,
        9,
    );
    let report = experiments::run_moment(&cfg).unwrap();
    for n in [20, 40] {
        let mm = report
            .cell("theta", n, "n2_gamma_diff")
            .unwrap()
            .estimate
            .unwrap();
        let flat = report
            .cell("1", n, "n2_gamma_diff")
            .unwrap()
            .estimate
            .unwrap();
        assert!(mm.abs() < 0.05, "n={n}: {mm}");
        assert!(flat < -0.3, "n={n}: {flat}");
    }
}
