//! Streamlines of χ on the truncated exponential. η stays constant along
//! each line, and the submodel volume-element priors satisfy the γ-matching
//! conditions at every node.

use truncgeo::geometry::{eta_forward, trace_streamline};
use truncgeo::models::{ModelSpec, ParamPoint};
use truncgeo::priors::{matching_residual, submodel_prior, MatchingCondition};

fn main() -> truncgeo::Result<()> {
    let m = ModelSpec::trunc_exp();
    for th in [0.5, 1.0, 2.0] {
        let start = ParamPoint::new(vec![th], 0.0);
        let line = trace_streamline(&m, &start, 0.5 / th, 1e-3)?;
        let end = line.last();
        let eta0 = eta_forward(&m, &start)?;
        let pm = submodel_prior(&m, eta0.clone(), 0.5, 0.0)?;
        let mm = submodel_prior(&m, eta0, 0.0, 0.5)?;
        let mut worst: f64 = 0.0;
        for node in line.points.iter().step_by(50) {
            worst = worst
                .max(matching_residual(&m, &node.point, &pm, MatchingCondition::PmGamma)?.abs())
                .max(matching_residual(&m, &node.point, &mm, MatchingCondition::MmGamma)?.abs());
        }
        println!(
            "start theta={th}: end theta={:.6} gamma={:.4}, eta drift {:.1e}, submodel residual {:.1e}",
            end.point.theta[0],
            end.point.gamma,
            line.eta_drift(),
            worst
        );
    }
    Ok(())
}
