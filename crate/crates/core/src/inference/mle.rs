use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{require, LogLikelihood};
use crate::error::{Error, Result};
use crate::models::{ModelSpec, ParamPoint, Sample};

/// Maximum likelihood fit with `γ̂ = x₍₁₎`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    pub theta_hat: Vec<f64>,
    pub gamma_hat: f64,
    /// `ĉ = c(θ̂, γ̂)`.
    pub c_hat: f64,
    /// `ĝ_θ = −Â^(2,0)`, row-major `d × d`.
    pub g_theta_hat: Vec<f64>,
    /// Bias-adjusted `γ̂* = γ̂ − 1/(n ĉ)`.
    pub gamma_star: f64,
    pub n: usize,
    pub converged: bool,
    pub iterations: usize,
    /// `‖Σⱼ D_θ log p(Xⱼ; θ̂, γ̂)‖` at the returned θ̂.
    pub score_norm: f64,
}

impl MleResult {
    pub fn point(&self) -> ParamPoint {
        ParamPoint::new(self.theta_hat.clone(), self.gamma_hat)
    }

    pub fn dim(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn g_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.g_theta_hat)
    }

    /// `ĝ_θ⁻¹`; fails when `ĝ_θ` is not positive definite.
    pub fn g_inverse(&self) -> Result<DMatrix<f64>> {
        self.g_matrix()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::Degenerate("g_theta_hat is not positive definite".into()))
    }
}

const MAX_ITERATIONS: usize = 200;
const SCORE_TOL: f64 = 1e-8;

fn score_and_hessian(ll: &LogLikelihood, p: &ParamPoint) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let model = ll.model();
    let d = model.dim();
    let n = ll.n();
    let mut s = DVector::zeros(d);
    let mut h = DMatrix::zeros(d, d);
    for i in 0..d {
        s[i] = ll.sum_log_q_partial(&p.theta, &[i])? - n * model.psi_partial(p, &[i], 0)?;
        for j in i..d {
            let v =
                ll.sum_log_q_partial(&p.theta, &[i, j])? - n * model.psi_partial(p, &[i, j], 0)?;
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok((s, h))
}

/// Fits `γ̂ = x₍₁₎` and solves the likelihood equation for θ by damped Newton.
///
/// Non-convergence is reported through [`MleResult::converged`]; a
/// non-positive `ĉ` or a non-positive-definite `ĝ_θ` is a degenerate fit.
pub fn fit_mle(model: &ModelSpec, sample: &Sample) -> Result<MleResult> {
    let d = model.dim();
    let n = sample.n();
    require(n > d, || {
        format!("need n >= d + 1 = {} observations, got {n}", d + 1)
    })?;
    let gamma_hat = sample.min();
    let ll = LogLikelihood::new(model, sample);
    let mut theta = model.family().initial_theta(sample);
    if !model.theta_domain().contains(&theta) {
        theta = model.family().reference_theta();
    }
    let mut p = ParamPoint::new(theta, gamma_hat);
    model.check_point(&p)?;
    let mut value = ll.value(&p)?;
    let (mut s, mut h) = score_and_hessian(&ll, &p)?;
    let mut iterations = 0;
    while s.norm() > SCORE_TOL && iterations < MAX_ITERATIONS {
        iterations += 1;
        let neg_h = -&h;
        let direction = match neg_h.clone().cholesky() {
            Some(chol) => chol.solve(&s),
            // Off the concave region: a scaled gradient step instead.
            None => &s / (neg_h.norm().max(1.0)),
        };
        let mut scale = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = p
                .theta
                .iter()
                .zip(direction.iter())
                .map(|(t, s)| t + scale * s)
                .collect();
            let q = ParamPoint::new(trial, gamma_hat);
            if model.is_valid(&q) {
                if let Ok(v) = ll.value(&q) {
                    if v.is_finite() && v >= value {
                        let (sq, hq) = score_and_hessian(&ll, &q)?;
                        // Near the optimum the log-likelihood stops resolving
                        // progress; fall back on the score norm.
                        if v > value || sq.norm() < s.norm() {
                            p = q;
                            value = v;
                            s = sq;
                            h = hq;
                            moved = true;
                            break;
                        }
                    }
                }
            }
            scale *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let converged = s.norm() <= SCORE_TOL;
    let c_hat = -model.psi_partial(&p, &[], 1)?;
    if !(c_hat > 0.0 && c_hat.is_finite()) {
        return Err(Error::Degenerate(format!(
            "c_hat = {c_hat} is not positive"
        )));
    }
    // Â^(2,0) as a sample average at the fit.
    let nf = n as f64;
    let mut g = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            g[i * d + j] = -(ll.sum_log_q_partial(&p.theta, &[i, j])? / nf
                - model.psi_partial(&p, &[i, j], 0)?);
        }
    }
    let result = MleResult {
        theta_hat: p.theta.clone(),
        gamma_hat,
        c_hat,
        g_theta_hat: g,
        gamma_star: gamma_hat - 1.0 / (nf * c_hat),
        n,
        converged,
        iterations,
        score_norm: s.norm(),
    };
    result.g_inverse()?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trunc_exp_closed_form() {
        let m = ModelSpec::trunc_exp();
        let s = Sample::new(vec![0.5, 0.3, 1.2]).unwrap();
        let fit = fit_mle(&m, &s).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.gamma_hat, 0.3);
        assert!((fit.theta_hat[0] - 3.0 / 1.1).abs() < 1e-12);
        assert!((fit.gamma_star - (0.3 - 1.1 / 9.0)).abs() < 1e-12);
        assert!((fit.c_hat - 3.0 / 1.1).abs() < 1e-12);
    }

    #[test]
    fn too_small_sample() {
        let m = ModelSpec::trunc_exp();
        let s = Sample::new(vec![1.0]).unwrap();
        assert!(matches!(fit_mle(&m, &s), Err(Error::Argument(_))));
    }

    #[test]
    fn trunc_normal_score_vanishes() {
        for m in [
            ModelSpec::trunc_normal_natural(),
            ModelSpec::trunc_normal_meansd(),
        ] {
            let truth = if m.name() == "trunc_normal_meansd" {
                ParamPoint::new(vec![0.5, 1.2], 0.0)
            } else {
                ParamPoint::new(vec![0.4, -0.6], 0.0)
            };
            let s = m.draw_sample(&truth, 400, 7).unwrap();
            let fit = fit_mle(&m, &s).unwrap();
            assert!(fit.converged, "{}: {fit:?}", m.name());
            assert!(fit.score_norm < 1e-8);
            for (a, b) in fit.theta_hat.iter().zip(&truth.theta) {
                assert!((a - b).abs() < 0.5, "{}: {a} vs {b}", m.name());
            }
        }
    }
}
