//! A user-defined truncated exponential family: a Rayleigh-type density
//! `∝ x exp(-θ x²)` on `[γ, ∞)` with ψ left to quadrature.

use std::sync::Arc;

use truncgeo::geometry::geometry_at;
use truncgeo::inference::fit_mle;
use truncgeo::models::{ModelSpec, OtefDefinition, OtefModel, ParamPoint};
use truncgeo::priors::{matching_residual, MatchingCondition, PriorSpec};

fn main() -> truncgeo::Result<()> {
    let def = OtefDefinition {
        name: "rayleigh".into(),
        f: vec!["-x^2".into()],
        m: Some("log(x)".into()),
        psi: None,
        theta_lower: vec![0.0],
        theta_upper: vec![f64::INFINITY],
        interval_lo: 0.0,
        interval_hi: f64::INFINITY,
        reference_theta: vec![1.0],
        tail: None,
    };
    let m = ModelSpec::new(Arc::new(OtefModel::from_definition(&def)?));
    let p = ParamPoint::new(vec![1.5], 0.5);
    let geo = geometry_at(&m, &p, &[0.0])?;
    println!(
        "g_theta = {:.6}, g_gammagamma = {:.6}, c = {:.6}",
        geo.g_theta[(0, 0)],
        geo.g_gammagamma,
        geo.c
    );

    let flat = PriorSpec::flat();
    let r = matching_residual(&m, &p, &flat, MatchingCondition::PmGamma)?;
    println!("flat prior, PM_GAMMA residual = {r:.6}");

    let sample = m.draw_sample(&p, 500, 3)?;
    let fit = fit_mle(&m, &sample)?;
    println!(
        "MLE from 500 draws: theta = {:.4}, gamma = {:.5}",
        fit.theta_hat[0], fit.gamma_hat
    );
    Ok(())
}
