//! Exact grid posterior against its asymptotic expansion in the local
//! coordinates (u, t), for one simulated sample.

use truncgeo::inference::{fit_mle, posterior_grid, ExpansionStats, GridConfig, Pivot};
use truncgeo::models::{ModelSpec, ParamPoint};
use truncgeo::priors::PriorSpec;

fn main() -> truncgeo::Result<()> {
    let m = ModelSpec::trunc_exp();
    let prior = PriorSpec::jeffreys(&m);
    let sample = m.draw_sample(&ParamPoint::new(vec![2.0], 0.0), 100, 7)?;
    let fit = fit_mle(&m, &sample)?;
    let post = posterior_grid(&m, &sample, &prior, &fit, &GridConfig::default())?;
    let stats = ExpansionStats::new(&m, &sample, &prior, &fit)?;
    println!(
        "theta_hat = {:.4}, gamma_hat = {:.5}",
        fit.theta_hat[0], fit.gamma_hat
    );
    println!(
        "posterior median of T = {:.4}",
        post.pivot_quantile(Pivot::T, 0.5)?
    );

    let sigma = post.sigma_hat[0];
    println!(
        "\n{:>6} {:>6} {:>10} {:>10} {:>10} {:>10}",
        "u/sd", "t", "exact", "order 0", "order 1", "order 2"
    );
    for v in [-1.0, 0.0, 1.0] {
        for t in [-0.5, -2.0] {
            let u = [v * sigma];
            let exact = post.density_ut(&m, &sample, &prior, &u, t)?;
            let approx: Vec<f64> = (0..3)
                .map(|k| stats.density(&u, t, k))
                .collect::<Result<_, _>>()?;
            println!(
                "{v:>6} {t:>6} {exact:>10.5} {:>10.5} {:>10.5} {:>10.5}",
                approx[0], approx[1], approx[2]
            );
        }
    }
    Ok(())
}
