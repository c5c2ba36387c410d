//! Randomized identities over the built-in models.

use proptest::prelude::*;
use truncgeo::diff;
use truncgeo::expectations::{a_tensor, a_tensor_quadrature, c_value};
use truncgeo::geometry::{geometry_at, metric};
use truncgeo::models::{ModelSpec, ParamPoint};
use truncgeo::priors::{c_identity_gap, matching_residual, MatchingCondition, PriorSpec};
use truncgeo::tensor::{asymmetry, symmetrize};

fn exp_point() -> impl Strategy<Value = ParamPoint> {
    (0.3f64..5.0, -2.0f64..2.0).prop_map(|(t, g)| ParamPoint::new(vec![t], g))
}

fn normal_point() -> impl Strategy<Value = ParamPoint> {
    (-1.5f64..1.5, -2.0f64..-0.3, -1.0f64..1.0).prop_map(|(a, b, g)| ParamPoint::new(vec![a, b], g))
}

fn any_point() -> impl Strategy<Value = (ModelSpec, ParamPoint)> {
    prop_oneof![
        exp_point().prop_map(|p| (ModelSpec::trunc_exp(), p)),
        normal_point().prop_map(|p| (ModelSpec::trunc_normal_natural(), p)),
    ]
}

fn close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol * (1.0 + want.abs())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn density_vanishes_below_gamma((m, p) in any_point(), gap in 1e-6f64..10.0) {
        let v = m.log_density(p.gamma - gap, &p).unwrap();
        prop_assert!(v == f64::NEG_INFINITY);
    }

    #[test]
    fn otef_theta_derivative_raises_order(p in normal_point()) {
        let m = ModelSpec::trunc_normal_natural();
        let a3 = a_tensor_quadrature(&m, &p, 3, 0, m.quadrature()).unwrap();
        let gamma = p.gamma;
        for k in 0..2 {
            let col = diff::vector_derivative(
                |t: &[f64]| Ok(a_tensor(&m, &ParamPoint::new(t.to_vec(), gamma), 2, 0, m.quadrature())?.data),
                &p.theta,
                k,
            )
            .unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    prop_assert!(close(col[i * 2 + j], a3.get(&[i, j, k]), 1e-5));
                }
            }
        }
    }

    #[test]
    fn metric_is_block_diagonal((m, p) in any_point()) {
        let geo = geometry_at(&m, &p, &[]).unwrap();
        let d = geo.dim();
        let mut full = nalgebra::DMatrix::zeros(d + 1, d + 1);
        full.view_mut((0, 0), (d, d)).copy_from(&geo.g_theta);
        full[(d, d)] = geo.g_gammagamma;
        prop_assert!(close(full.determinant(), geo.det_g(), 1e-12));
        prop_assert!(close(geo.g_gammagamma, geo.c * geo.c, 1e-12));
    }

    #[test]
    fn levi_civita_matches_differenced_metric((m, p) in any_point()) {
        let geo = geometry_at(&m, &p, &[0.0]).unwrap();
        let d = m.dim();
        let n = d + 1;
        let components = |c: &[f64]| -> truncgeo::error::Result<Vec<f64>> {
            let (g, _, ggg) = metric(&m, &ParamPoint::from_coords(c))?;
            let mut full = vec![0.0; n * n];
            for i in 0..d {
                for j in 0..d {
                    full[i * n + j] = g[(i, j)];
                }
            }
            full[n * n - 1] = ggg;
            Ok(full)
        };
        let coords = p.coords();
        let dg: Vec<Vec<f64>> = (0..n).map(|a| diff::vector_derivative(components, &coords, a).unwrap()).collect();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let want = 0.5 * (dg[a][b * n + c] + dg[b][a * n + c] - dg[c][a * n + b]);
                    prop_assert!(close(geo.christoffel(a, b, c), want, 1e-5), "({a},{b},{c})");
                }
            }
        }
    }

    #[test]
    fn e_connection_is_flat_in_natural_coordinates((m, p) in any_point()) {
        let geo = geometry_at(&m, &p, &[1.0]).unwrap();
        let scale = geo.g_theta.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        for v in geo.alpha_connection(1.0).unwrap() {
            prop_assert!(v.abs() < 1e-5 * scale, "{v}");
        }
    }

    #[test]
    fn c_identities_hold((m, p) in any_point()) {
        prop_assert!(c_identity_gap(&m, &p).unwrap() < 1e-6);
        let c = c_value(&m, &p).unwrap();
        prop_assert!(close(c, -m.psi_partial(&p, &[], 1).unwrap(), 1e-8));
    }

    #[test]
    fn residuals_ignore_prior_scale(p in exp_point(), k in 0.01f64..100.0, a in -1.0f64..1.0) {
        let m = ModelSpec::trunc_exp();
        let base = PriorSpec::from_expr(&format!("exp({a}*theta*gamma) / theta"), 1).unwrap();
        let scaled = PriorSpec::from_expr(&format!("{k} * exp({a}*theta*gamma) / theta"), 1).unwrap();
        for cond in [
            MatchingCondition::PmGamma,
            MatchingCondition::PmTheta(0),
            MatchingCondition::MmGamma,
            MatchingCondition::MmTheta(0),
        ] {
            let r0 = matching_residual(&m, &p, &base, cond).unwrap();
            let r1 = matching_residual(&m, &p, &scaled, cond).unwrap();
            prop_assert!((r0 - r1).abs() < 1e-10, "{cond:?}: {r0} vs {r1}");
        }
    }

    #[test]
    fn symmetrizer_is_a_projection(data in prop::collection::vec(-1.0f64..1.0, 27)) {
        let once = symmetrize(&data, 3, 3).unwrap();
        let twice = symmetrize(&once, 3, 3).unwrap();
        prop_assert!(asymmetry(&once, 3, 3).unwrap() < 1e-15);
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn a_tensors_are_symmetric((m, p) in any_point()) {
        for r in 2..=4 {
            let t = a_tensor(&m, &p, r, 0, m.quadrature()).unwrap();
            let scale = t.data.iter().fold(1.0f64, |s, v| s.max(v.abs()));
            prop_assert!(asymmetry(&t.data, m.dim(), r).unwrap() <= 1e-12 * scale);
        }
    }
}
