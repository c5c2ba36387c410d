//! Fisher metric, α-connections and moment tensors of the two built-in
//! families, printed next to their closed forms.

use truncgeo::geometry::geometry_at;
use truncgeo::models::{ModelSpec, ParamPoint};

fn main() -> truncgeo::Result<()> {
    let m = ModelSpec::trunc_exp();
    println!("truncated exponential");
    println!(
        "{:>6} {:>6} {:>12} {:>12} {:>12} {:>12}",
        "theta", "gamma", "g_theta", "1/theta^2", "Gamma^0_111", "-1/theta^3"
    );
    for &th in &[0.5, 1.0, 2.0, 5.0] {
        let p = ParamPoint::new(vec![th], 0.0);
        let geo = geometry_at(&m, &p, &[0.0, 1.0])?;
        let lc = geo.alpha_connection(0.0).unwrap()[0];
        println!(
            "{th:>6} {:>6} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            0.0,
            geo.g_theta[(0, 0)],
            1.0 / (th * th),
            lc,
            -1.0 / th.powi(3)
        );
    }

    let m = ModelSpec::trunc_normal_natural();
    let p = ParamPoint::new(vec![0.4, -0.6], 0.0);
    let geo = geometry_at(&m, &p, &[0.0, 1.0])?;
    println!("\ntruncated normal at (alpha, beta, gamma) = (0.4, -0.6, 0)");
    println!("g_theta = {:.6}", geo.g_theta);
    println!("g_gammagamma = {:.6}, c = {:.6}", geo.g_gammagamma, geo.c);
    println!("A11 = {:?}", geo.a11);
    println!(
        "e-connection (zero in natural coordinates) = {:?}",
        geo.alpha_connection(1.0).unwrap()
    );
    Ok(())
}
