//! Distance between the posterior mean of γ and the bias-corrected MLE,
//! scaled by n², under the moment-matching prior and the flat prior.

use truncgeo::experiments::{run_moment, ExperimentConfig};
use truncgeo::models::ParamPoint;

fn main() -> truncgeo::Result<()> {
    let cfg = ExperimentConfig::new(
        "trunc_exp",
        ParamPoint::new(vec![2.0], 0.0),
        &["theta", "1"],
        &[10, 20, 40],
        1000,
        1,
    );
    let report = run_moment(&cfg)?;
    for c in report
        .cells
        .iter()
        .filter(|c| c.statistic == "n2_gamma_diff")
    {
        println!(
            "{:<6} n={:<3} n^2 E[gamma_B - gamma*] = {:+.5} (se {:.5})",
            c.prior,
            c.n,
            c.estimate.unwrap_or(f64::NAN),
            c.se.unwrap_or(f64::NAN)
        );
    }
    for s in &report.slopes {
        if let Some(slope) = s.slope {
            println!(
                "log-log slope of {} under {}: {slope:.3}",
                s.statistic, s.prior
            );
        }
    }
    Ok(())
}
