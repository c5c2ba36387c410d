//! The γ-matching conditions written as Lie derivatives along χ agree with
//! the direct form for arbitrary smooth priors.

use truncgeo::geometry::{lie_residual, LieKind};
use truncgeo::models::{ModelSpec, ParamPoint};
use truncgeo::priors::{matching_residual, MatchingCondition, PriorSpec};

fn main() -> truncgeo::Result<()> {
    let m = ModelSpec::trunc_normal_natural();
    let prior = PriorSpec::from_expr("exp(0.3*theta_1 - 0.2*gamma*theta_2) * (1 + gamma^2)", 2)?;
    for p in [
        ParamPoint::new(vec![0.0, -0.5], 0.0),
        ParamPoint::new(vec![0.8, -1.2], 0.4),
        ParamPoint::new(vec![-0.5, -0.4], -0.7),
    ] {
        let pm = matching_residual(&m, &p, &prior, MatchingCondition::PmGamma)?;
        let pm_lie = lie_residual(&m, &p, &prior, LieKind::PmGammaLie)?;
        let mm = matching_residual(&m, &p, &prior, MatchingCondition::MmGamma)?;
        let mm_lie = lie_residual(&m, &p, &prior, LieKind::MmGammaLie)?;
        println!(
            "theta={:?} gamma={:+.1}  PM {pm:+.8} vs {pm_lie:+.8}  MM {mm:+.8} vs {mm_lie:+.8}",
            p.theta, p.gamma
        );
    }
    Ok(())
}
