//! Residuals of the four matching conditions for a few priors on the
//! truncated exponential. A zero residual on the whole grid means the prior
//! satisfies that condition.

use truncgeo::models::{ModelSpec, ParamPoint};
use truncgeo::priors::{matching_residual, MatchingCondition, PriorSpec};

fn main() -> truncgeo::Result<()> {
    let m = ModelSpec::trunc_exp();
    let conds = [
        ("pm_gamma", MatchingCondition::PmGamma),
        ("pm_theta", MatchingCondition::PmTheta(0)),
        ("mm_gamma", MatchingCondition::MmGamma),
        ("mm_theta", MatchingCondition::MmTheta(0)),
    ];
    let grid: Vec<ParamPoint> = [0.5, 1.0, 2.0, 4.0]
        .iter()
        .flat_map(|&t| [-1.0, 0.0, 1.0].map(|g| ParamPoint::new(vec![t], g)))
        .collect();
    println!(
        "{:<10} {:>10} {:>10} {:>10} {:>10}",
        "prior", "pm_gamma", "pm_theta", "mm_gamma", "mm_theta"
    );
    for src in ["1", "1/theta", "theta", "jeffreys", "theta^2"] {
        let prior = PriorSpec::parse(src, &m)?;
        let mut row = format!("{src:<10}");
        for (_, cond) in conds {
            let mut worst: f64 = 0.0;
            for p in &grid {
                worst = worst.max(matching_residual(&m, p, &prior, cond)?.abs());
            }
            row.push_str(&format!(" {worst:>10.2e}"));
        }
        println!("{row}");
    }
    Ok(())
}
