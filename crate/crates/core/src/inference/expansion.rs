use serde::{Deserialize, Serialize};

use super::{LogLikelihood, MleResult};
use crate::diff;
use crate::error::{Error, Result};
use crate::models::{ModelSpec, ParamPoint, Sample};
use crate::priors::PriorSpec;
use crate::tensor::{
    dot, flat_index, kron, multi_index, odd_double_factorial, outer_power, symmetrize, vec_power,
};

/// Prior derivatives at the MLE, divided by `π̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorJet {
    pub log_pi: f64,
    /// `D_θ π̂ / π̂`.
    pub d_theta: Vec<f64>,
    /// `∂_γ π̂ / π̂`.
    pub d_gamma: f64,
    /// `D_θ^{⊗2} π̂ / π̂`, flat `d²`.
    pub d2_theta: Vec<f64>,
}

impl PriorJet {
    pub fn at(prior: &PriorSpec, p: &ParamPoint) -> Result<Self> {
        let d = p.theta.len();
        let log_pi = prior.log_pi(p)?;
        let grad = prior.grad_log_pi(p)?;
        let gamma = p.gamma;
        let theta_grad = |theta: &[f64]| -> Result<Vec<f64>> {
            let q = ParamPoint::new(theta.to_vec(), gamma);
            Ok(prior.grad_log_pi(&q)?[..d].to_vec())
        };
        let mut hess = vec![0.0; d * d];
        for j in 0..d {
            let col = diff::vector_derivative(theta_grad, &p.theta, j)?;
            for i in 0..d {
                hess[i * d + j] = col[i];
            }
        }
        // D²π/π = D² log π + (D log π)(D log π)ᵀ.
        let mut d2 = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                d2[i * d + j] = 0.5 * (hess[i * d + j] + hess[j * d + i]) + grad[i] * grad[j];
            }
        }
        Ok(Self {
            log_pi,
            d_theta: grad[..d].to_vec(),
            d_gamma: grad[d],
            d2_theta: d2,
        })
    }
}

/// Hat quantities at the MLE and the constant parts of `B₁` and `B₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionStats {
    pub mle: MleResult,
    /// `Â^(1,1)`, flat `d`.
    pub a11: Vec<f64>,
    /// `Â^(3,0)`, flat `d³`.
    pub a30: Vec<f64>,
    pub a02: f64,
    /// `Â^(2,1)`, flat `d²`.
    pub a21: Vec<f64>,
    /// `Â^(4,0)`, flat `d⁴`.
    pub a40: Vec<f64>,
    pub prior: PriorJet,
    /// `ĝ_θ⁻¹`, flat `d²`.
    pub g_inv: Vec<f64>,
    pub det_g: f64,
    constants: Constants,
    /// `K_n / π̂`.
    pub k_n: f64,
}

/// Full contractions against Gaussian moments that appear in `B₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Constants {
    d2_g: f64,
    dpi_a11_g: f64,
    dpi_a30_gg: f64,
    a21_g: f64,
    a40_gg: f64,
    a11_a11_g: f64,
    a30_a30_s6_g3: f64,
    a11_a30_gg: f64,
}

/// `Â^(r,s) = (1/n) Σⱼ D_θ^{⊗r} ∂_γ^s log p(Xⱼ; θ̂, γ̂)` as a flat `d^r` tensor.
pub fn hat_tensor(
    model: &ModelSpec,
    sample: &Sample,
    p: &ParamPoint,
    r: usize,
    s: usize,
) -> Result<Vec<f64>> {
    let d = model.dim();
    let ll = LogLikelihood::new(model, sample);
    let n = ll.n();
    let mut out = vec![0.0; d.pow(r as u32)];
    // Fill sorted multi-indices once and copy to their permutations.
    for k in 0..out.len() {
        let idx = multi_index(k, d, r);
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        let first = flat_index(&sorted, d);
        if first < k {
            out[k] = out[first];
            continue;
        }
        let psi = model.psi_partial(p, &idx, s)?;
        let data = if s == 0 {
            ll.sum_log_q_partial(&p.theta, &idx)? / n
        } else {
            0.0
        };
        out[k] = data - psi;
    }
    Ok(out)
}

/// Gaussian moment `∫ u^{⊗r} φ(u; 0, G) du = (r−1)!! S_r vec(G)^{⊗r/2}`; zero for odd `r`.
pub fn gaussian_moment(g_inv: &[f64], d: usize, r: usize) -> Result<Vec<f64>> {
    if g_inv.len() != d * d {
        return Err(Error::Argument(format!(
            "covariance has {} entries, expected {}",
            g_inv.len(),
            d * d
        )));
    }
    if r % 2 == 1 {
        return Ok(vec![0.0; d.pow(r as u32)]);
    }
    let sym = symmetrize(&vec_power(g_inv, r / 2), d, r)?;
    Ok(sym
        .into_iter()
        .map(|v| v * odd_double_factorial(r))
        .collect())
}

/// `∫_{−∞}^0 t^r e^t dt = r! (−1)^r`.
pub fn exponential_moment(r: usize) -> f64 {
    let fact: f64 = (1..=r).map(|k| k as f64).product();
    if r.is_multiple_of(2) {
        fact
    } else {
        -fact
    }
}

fn contract(tensor: &[f64], v: &[f64], times: usize) -> f64 {
    dot(tensor, &outer_power(v, times))
}

impl ExpansionStats {
    pub fn new(
        model: &ModelSpec,
        sample: &Sample,
        prior: &PriorSpec,
        mle: &MleResult,
    ) -> Result<Self> {
        let d = model.dim();
        if d > 3 {
            return Err(Error::Unsupported(format!(
                "expansion supports d <= 3, got {d}"
            )));
        }
        let p = mle.point();
        let g_inv_m = mle.g_inverse()?;
        let mut g_inv = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                g_inv[i * d + j] = 0.5 * (g_inv_m[(i, j)] + g_inv_m[(j, i)]);
            }
        }
        let det_g = mle.g_matrix().determinant();
        let a11 = hat_tensor(model, sample, &p, 1, 1)?;
        let a30 = hat_tensor(model, sample, &p, 3, 0)?;
        let a02 = hat_tensor(model, sample, &p, 0, 2)?[0];
        let a21 = hat_tensor(model, sample, &p, 2, 1)?;
        let a40 = hat_tensor(model, sample, &p, 4, 0)?;
        let jet = PriorJet::at(prior, &p)?;

        let gg = vec_power(&g_inv, 2);
        let c = mle.c_hat;
        let constants = Constants {
            d2_g: dot(&jet.d2_theta, &g_inv),
            dpi_a11_g: dot(&kron(&jet.d_theta, &a11), &g_inv),
            dpi_a30_gg: dot(&kron(&jet.d_theta, &a30), &gg),
            a21_g: dot(&a21, &g_inv),
            a40_gg: dot(&a40, &gg),
            a11_a11_g: dot(&kron(&a11, &a11), &g_inv),
            a30_a30_s6_g3: dot(&kron(&a30, &a30), &symmetrize(&vec_power(&g_inv, 3), d, 6)?),
            a11_a30_gg: dot(&kron(&a11, &a30), &gg),
        };
        let k = &constants;
        let k_n =
            -jet.d_gamma / c + 0.5 * k.d2_g - k.dpi_a11_g / c + 0.5 * k.dpi_a30_gg + a02 / (c * c)
                - k.a21_g / (2.0 * c)
                + k.a40_gg / 8.0
                + k.a11_a11_g / (c * c)
                + 15.0 / 72.0 * k.a30_a30_s6_g3
                - k.a11_a30_gg / (2.0 * c);
        Ok(Self {
            mle: mle.clone(),
            a11,
            a30,
            a02,
            a21,
            a40,
            prior: jet,
            g_inv,
            det_g,
            constants,
            k_n,
        })
    }

    pub fn dim(&self) -> usize {
        self.a11.len()
    }

    /// Leading density `(2π)^{−d/2} √det ĝ_θ e^{t − u'ĝ_θu/2}`, zero for `t > 0`.
    pub fn leading(&self, u: &[f64], t: f64) -> f64 {
        if t > 0.0 {
            return 0.0;
        }
        let d = self.dim();
        let g = &self.mle.g_theta_hat;
        let quad = dot(&outer_power(u, 2), g);
        (2.0 * std::f64::consts::PI).powf(-0.5 * d as f64)
            * self.det_g.sqrt()
            * (t - 0.5 * quad).exp()
    }

    pub fn b1(&self, u: &[f64], t: f64) -> f64 {
        let c = self.mle.c_hat;
        dot(&self.prior.d_theta, u) + dot(&self.a11, u) * t / c + contract(&self.a30, u, 3) / 6.0
    }

    pub fn b2(&self, u: &[f64], t: f64) -> f64 {
        let c = self.mle.c_hat;
        let k = &self.constants;
        let s1 = dot(&self.prior.d_theta, u);
        let q11 = dot(&self.a11, u);
        let a30u = contract(&self.a30, u, 3);
        let a40u = contract(&self.a40, u, 4);
        let a21u = contract(&self.a21, u, 2);
        let d2u = contract(&self.prior.d2_theta, u, 2);
        self.prior.d_gamma / c * (t + 1.0)
            + 0.5 * (d2u - k.d2_g)
            + (s1 * q11 * t + k.dpi_a11_g) / c
            + (s1 * a30u - 3.0 * k.dpi_a30_gg) / 6.0
            + self.a02 / (2.0 * c * c) * (t * t - 2.0)
            - (a21u * t + k.a21_g) / (2.0 * c)
            + (a40u - 3.0 * k.a40_gg) / 24.0
            + (q11 * q11 * t * t - 2.0 * k.a11_a11_g) / (2.0 * c * c)
            + (a30u * a30u - 15.0 * k.a30_a30_s6_g3) / 72.0
            + (q11 * a30u * t + 3.0 * k.a11_a30_gg) / (6.0 * c)
    }

    /// Expansion of the posterior density of `(u, t)` truncated after
    /// `n^{−order/2}`.
    pub fn density(&self, u: &[f64], t: f64, order: usize) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::Argument(format!(
                "u has length {}, expected {}",
                u.len(),
                self.dim()
            )));
        }
        let n = self.mle.n as f64;
        let bracket = match order {
            0 => 1.0,
            1 => 1.0 + self.b1(u, t) / n.sqrt(),
            2 => 1.0 + self.b1(u, t) / n.sqrt() + self.b2(u, t) / n,
            _ => {
                return Err(Error::Unsupported(format!(
                    "expansion order {order} (supported: 0, 1, 2)"
                )))
            }
        };
        Ok(self.leading(u, t) * bracket)
    }
}

/// Free-function form of [`ExpansionStats::density`].
pub fn expansion_density(stats: &ExpansionStats, u: &[f64], t: f64, order: usize) -> Result<f64> {
    stats.density(u, t, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::fit_mle;
    use crate::quadrature::gauss_legendre;

    #[test]
    fn leading_term_at_origin() {
        let mle = MleResult {
            theta_hat: vec![1.0],
            gamma_hat: 0.0,
            c_hat: 1.0,
            g_theta_hat: vec![1.0],
            gamma_star: -0.1,
            n: 10,
            converged: true,
            iterations: 0,
            score_norm: 0.0,
        };
        let stats = ExpansionStats {
            mle,
            a11: vec![0.0],
            a30: vec![0.0],
            a02: 0.0,
            a21: vec![0.0],
            a40: vec![0.0],
            prior: PriorJet {
                log_pi: 0.0,
                d_theta: vec![0.0],
                d_gamma: 0.0,
                d2_theta: vec![0.0],
            },
            g_inv: vec![1.0],
            det_g: 1.0,
            constants: Constants {
                d2_g: 0.0,
                dpi_a11_g: 0.0,
                dpi_a30_gg: 0.0,
                a21_g: 0.0,
                a40_gg: 0.0,
                a11_a11_g: 0.0,
                a30_a30_s6_g3: 0.0,
                a11_a30_gg: 0.0,
            },
            k_n: 0.0,
        };
        assert!((stats.density(&[0.0], 0.0, 0).unwrap() - 0.398942280401).abs() < 1e-11);
        assert!(matches!(
            stats.density(&[0.0], 0.0, 3),
            Err(Error::Unsupported(_))
        ));
        assert_eq!(stats.density(&[0.0], 0.5, 2).unwrap(), 0.0);
    }

    fn trunc_exp_stats(n: usize, prior: &str) -> ExpansionStats {
        let m = ModelSpec::trunc_exp();
        let s = m
            .draw_sample(&ParamPoint::new(vec![2.0], 0.0), n, 11)
            .unwrap();
        let fit = fit_mle(&m, &s).unwrap();
        let pr = PriorSpec::parse(prior, &m).unwrap();
        ExpansionStats::new(&m, &s, &pr, &fit).unwrap()
    }

    /// Integrates `f(u, t) × leading` over `u ∈ [−12σ, 12σ]`, `t ∈ [−60, 0]`.
    fn integrate(stats: &ExpansionStats, f: impl Fn(f64, f64) -> f64) -> f64 {
        let sigma = stats.g_inv[0].sqrt();
        let (x, w) = gauss_legendre(64);
        let mut total = 0.0;
        for panel_u in 0..8 {
            for panel_t in 0..12 {
                let (ua, ub) = (
                    -12.0 * sigma + 3.0 * sigma * panel_u as f64,
                    -12.0 * sigma + 3.0 * sigma * (panel_u + 1) as f64,
                );
                let (ta, tb) = (
                    -60.0 + 5.0 * panel_t as f64,
                    -60.0 + 5.0 * (panel_t + 1) as f64,
                );
                for (xu, wu) in x.iter().zip(&w) {
                    let u = 0.5 * (ua + ub) + 0.5 * (ub - ua) * xu;
                    for (xt, wt) in x.iter().zip(&w) {
                        let t = 0.5 * (ta + tb) + 0.5 * (tb - ta) * xt;
                        total += 0.25
                            * (ub - ua)
                            * (tb - ta)
                            * wu
                            * wt
                            * f(u, t)
                            * stats.leading(&[u], t);
                    }
                }
            }
        }
        total
    }

    #[test]
    fn correction_terms_integrate_to_zero() {
        let stats = trunc_exp_stats(60, "1/theta");
        assert!((integrate(&stats, |_, _| 1.0) - 1.0).abs() < 1e-10);
        assert!(integrate(&stats, |u, t| stats.b1(&[u], t)).abs() < 1e-8);
        assert!(integrate(&stats, |u, t| stats.b2(&[u], t)).abs() < 1e-8);
    }

    #[test]
    fn trunc_exp_hat_tensors() {
        // log p = −θx − log(1/θ) + θγ: every θ-derivative of order ≥ 2 comes
        // from ψ alone, and ∂_γ log p = θ.
        let stats = trunc_exp_stats(40, "1");
        let th = stats.mle.theta_hat[0];
        assert!((stats.a11[0] - 1.0).abs() < 1e-6);
        assert!((stats.a30[0] - 2.0 / th.powi(3)).abs() < 1e-6 * (1.0 + 2.0 / th.powi(3)));
        assert!((stats.a40[0] + 6.0 / th.powi(4)).abs() < 1e-5 * (1.0 + 6.0 / th.powi(4)));
        assert!(stats.a02.abs() < 1e-8);
        assert!(stats.a21[0].abs() < 1e-6);
        assert!((stats.mle.g_theta_hat[0] - 1.0 / (th * th)).abs() < 1e-8);
    }

    #[test]
    fn gaussian_moments_match_quadrature() {
        let g = [1.3, 0.4, 0.4, 0.8];
        let det: f64 = g[0] * g[3] - g[1] * g[2];
        let inv = [g[3] / det, -g[1] / det, -g[2] / det, g[0] / det];
        let (x, w) = gauss_legendre(80);
        let lim = 12.0;
        let norm = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt());
        for r in [1usize, 2, 3, 4] {
            let want = gaussian_moment(&g, 2, r).unwrap();
            let mut got = vec![0.0; 2usize.pow(r as u32)];
            for (xa, wa) in x.iter().zip(&w) {
                for (xb, wb) in x.iter().zip(&w) {
                    let u = [lim * xa, lim * xb];
                    let q =
                        inv[0] * u[0] * u[0] + 2.0 * inv[1] * u[0] * u[1] + inv[3] * u[1] * u[1];
                    let dens = norm * (-0.5 * q).exp() * lim * lim * wa * wb;
                    for (slot, v) in got.iter_mut().zip(outer_power(&u, r)) {
                        *slot += dens * v;
                    }
                }
            }
            let tol = if r % 2 == 1 { 1e-8 } else { 1e-6 };
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < tol, "r={r}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn exponential_moments() {
        let (x, w) = gauss_legendre(64);
        for r in 0..=3 {
            let mut got = 0.0;
            for k in 0..20 {
                let (a, b) = (-(k + 1) as f64 * 5.0, -(k as f64) * 5.0);
                for (xi, wi) in x.iter().zip(&w) {
                    let t: f64 = 0.5 * (a + b) + 0.5 * (b - a) * xi;
                    got += 0.5 * (b - a) * wi * t.powi(r as i32) * t.exp();
                }
            }
            assert!((got - exponential_moment(r)).abs() < 1e-10, "r={r}");
        }
    }

    #[test]
    fn s6_contraction_matches_pairings() {
        // 15 (A⊗A)·S₆ vec(G)^{⊗3} = 9 vᵀGv + 6 Σ A_abc A_def G_ad G_be G_cf with v_c = A_abc G_ab.
        let d = 2;
        let a = symmetrize(&[0.3, -0.2, 0.5, 0.1, 0.7, -0.4, 0.2, 0.9], d, 3).unwrap();
        let g = [1.1, 0.3, 0.3, 0.6];
        let lhs = 15.0 * dot(&kron(&a, &a), &symmetrize(&vec_power(&g, 3), d, 6).unwrap());
        let at = |i: usize, j: usize, k: usize| a[flat_index(&[i, j, k], d)];
        let gm = |i: usize, j: usize| g[i * d + j];
        let mut v = vec![0.0; d];
        for (c, vc) in v.iter_mut().enumerate() {
            for i in 0..d {
                for j in 0..d {
                    *vc += at(i, j, c) * gm(i, j);
                }
            }
        }
        let mut rhs = 0.0;
        for i in 0..d {
            for j in 0..d {
                rhs += 9.0 * v[i] * gm(i, j) * v[j];
            }
        }
        for idx in crate::tensor::multi_indices(d, 6) {
            rhs += 6.0
                * at(idx[0], idx[1], idx[2])
                * at(idx[3], idx[4], idx[5])
                * gm(idx[0], idx[3])
                * gm(idx[1], idx[4])
                * gm(idx[2], idx[5]);
        }
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    }
}
