//! Frequentist coverage of one-sided posterior bounds for γ under a
//! probability-matching prior and the flat prior.

use truncgeo::experiments::{run_coverage, ExperimentConfig};
use truncgeo::models::ParamPoint;

fn main() -> truncgeo::Result<()> {
    let mut cfg = ExperimentConfig::new(
        "trunc_exp",
        ParamPoint::new(vec![2.0], 0.0),
        &["1/theta", "1"],
        &[10, 30],
        2000,
        1,
    );
    cfg.levels = vec![0.5, 0.9];
    let report = run_coverage(&cfg)?;
    println!(
        "{:<8} {:>4} {:>6} {:>9} {:>8}",
        "prior", "n", "level", "coverage", "se"
    );
    for c in &report.cells {
        println!(
            "{:<8} {:>4} {:>6} {:>9.4} {:>8.4}",
            c.prior,
            c.n,
            c.level,
            c.estimate.unwrap_or(f64::NAN),
            c.se.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
