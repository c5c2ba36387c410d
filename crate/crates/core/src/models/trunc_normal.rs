use crate::error::{Error, Result};
use crate::quadrature::TailMap;
use crate::special::{log_sf, log_sf_derivs, norm_sf, norm_sf_inv};

use super::{compose_partial, power_deriv, Family, Sample, ThetaDomain};

const HALF_LN_PI: f64 = 0.572_364_942_924_700_1;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Coordinate label used for γ inside the chain-rule helpers.
const G: usize = 2;

fn counts(coords: &[usize]) -> [usize; 3] {
    let mut c = [0; 3];
    for &k in coords {
        c[k] += 1;
    }
    c
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

fn mean_sd(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n.max(2.0);
    (mean, var.sqrt().max(1e-3))
}

/// Truncated normal in natural coordinates `(α, β)`:
/// `log q = αx + βx² - ½ log π`,
/// `ψ = -½ log(-β) - α²/(4β) + Ψ(ν)` with `ν = γ√(-2β) - α/√(-2β)` and
/// `Ψ(v) = log(1 - Φ(v))`.
///
/// With `fixed_beta` set, only α is a parameter.
#[derive(Debug, Clone)]
pub struct TruncNormalNatural {
    fixed_beta: Option<f64>,
    domain: ThetaDomain,
    name: &'static str,
}

impl TruncNormalNatural {
    pub fn full() -> Self {
        Self {
            fixed_beta: None,
            domain: ThetaDomain {
                lower: vec![f64::NEG_INFINITY, f64::NEG_INFINITY],
                upper: vec![f64::INFINITY, 0.0],
            },
            name: "trunc_normal_natural",
        }
    }

    pub fn fixed_beta(beta: f64) -> Result<Self> {
        if !(beta < 0.0 && beta.is_finite()) {
            return Err(Error::Argument(format!(
                "fixed beta must be negative, got {beta}"
            )));
        }
        Ok(Self {
            fixed_beta: Some(beta),
            domain: ThetaDomain {
                lower: vec![f64::NEG_INFINITY],
                upper: vec![f64::INFINITY],
            },
            name: "trunc_normal_fixed_scale",
        })
    }

    fn alpha_beta(&self, theta: &[f64]) -> (f64, f64) {
        match self.fixed_beta {
            Some(b) => (theta[0], b),
            None => (theta[0], theta[1]),
        }
    }

    fn nu(alpha: f64, beta: f64, gamma: f64) -> f64 {
        let w = -2.0 * beta;
        gamma * w.sqrt() - alpha / w.sqrt()
    }

    /// Partial of ν along coordinates (0 = α, 1 = β, 2 = γ).
    fn nu_partial(alpha: f64, beta: f64, gamma: f64, coords: &[usize]) -> f64 {
        let [a, b, c] = counts(coords);
        if a + c > 1 {
            return 0.0;
        }
        let w = -2.0 * beta;
        // ∂_β = -2 ∂_w
        let chain = (-2.0f64).powi(b as i32);
        let body = if a == 1 {
            -power_deriv(w, -0.5, b)
        } else if c == 1 {
            power_deriv(w, 0.5, b)
        } else {
            gamma * power_deriv(w, 0.5, b) - alpha * power_deriv(w, -0.5, b)
        };
        chain * body
    }

    /// `ψ` partial along coordinates in (α, β, γ) labels.
    fn psi_coords(alpha: f64, beta: f64, gamma: f64, coords: &[usize]) -> f64 {
        let [a, b, c] = counts(coords);
        let mut total = 0.0;
        if a == 0 && c == 0 {
            total += if b == 0 {
                -0.5 * (-beta).ln()
            } else {
                // d^b/dβ^b log(-β) = (-1)^{b-1} (b-1)! β^{-b}
                let sign = if b % 2 == 1 { 1.0 } else { -1.0 };
                -0.5 * sign * factorial(b - 1) * beta.powi(-(b as i32))
            };
        }
        if c == 0 && a <= 2 {
            let da = [alpha * alpha, 2.0 * alpha, 2.0][a];
            let sign = if b % 2 == 0 { 1.0 } else { -1.0 };
            let db = sign * factorial(b) * beta.powi(-(b as i32) - 1);
            total += -0.25 * da * db;
        }
        let nu = Self::nu(alpha, beta, gamma);
        let outer = log_sf_derivs(nu);
        total + compose_partial(&outer, &|s| Self::nu_partial(alpha, beta, gamma, s), coords)
    }

    fn to_coords(&self, index: &[usize], s: usize) -> Vec<usize> {
        let mut coords: Vec<usize> = index.to_vec();
        coords.extend(std::iter::repeat_n(G, s));
        coords
    }
}

impl Family for TruncNormalNatural {
    fn name(&self) -> &str {
        self.name
    }

    fn dim(&self) -> usize {
        if self.fixed_beta.is_some() {
            1
        } else {
            2
        }
    }

    fn theta_domain(&self) -> &ThetaDomain {
        &self.domain
    }

    fn log_q(&self, x: f64, theta: &[f64]) -> f64 {
        let (a, b) = self.alpha_beta(theta);
        a * x + b * x * x - HALF_LN_PI
    }

    fn psi_closed(&self, theta: &[f64], gamma: f64) -> Option<f64> {
        let (a, b) = self.alpha_beta(theta);
        Some(-0.5 * (-b).ln() - a * a / (4.0 * b) + log_sf(Self::nu(a, b, gamma)))
    }

    fn psi_partial_closed(
        &self,
        theta: &[f64],
        gamma: f64,
        index: &[usize],
        s: usize,
    ) -> Option<f64> {
        let (a, b) = self.alpha_beta(theta);
        Some(Self::psi_coords(a, b, gamma, &self.to_coords(index, s)))
    }

    fn log_q_partial_closed(&self, x: f64, theta: &[f64], index: &[usize]) -> Option<f64> {
        Some(match index {
            [] => self.log_q(x, theta),
            [0] => x,
            [1] => x * x,
            _ => 0.0,
        })
    }

    fn sufficient(&self, x: f64) -> Option<Vec<f64>> {
        Some(match self.fixed_beta {
            Some(_) => vec![x],
            None => vec![x, x * x],
        })
    }

    fn is_otef(&self) -> bool {
        true
    }

    fn tail_map(&self, theta: &[f64], gamma: f64) -> TailMap {
        let (a, b) = self.alpha_beta(theta);
        let sigma = (-0.5 / b).sqrt();
        let mu = -a / (2.0 * b);
        TailMap::Rational {
            scale: sigma + (mu - gamma).max(0.0),
        }
    }

    fn inverse_survival(&self, theta: &[f64], gamma: f64, v: f64) -> Option<f64> {
        let (a, b) = self.alpha_beta(theta);
        let sigma = (-0.5 / b).sqrt();
        let mu = -a / (2.0 * b);
        let nu = (gamma - mu) / sigma;
        Some((mu + sigma * norm_sf_inv(v * norm_sf(nu))).max(gamma))
    }

    fn reference_theta(&self) -> Vec<f64> {
        match self.fixed_beta {
            Some(_) => vec![0.0],
            None => vec![0.0, -0.5],
        }
    }

    fn initial_theta(&self, sample: &Sample) -> Vec<f64> {
        let (mean, sd) = mean_sd(sample.values());
        match self.fixed_beta {
            Some(b) => vec![-2.0 * b * mean],
            None => {
                let beta = -0.5 / (sd * sd);
                vec![-2.0 * beta * mean, beta]
            }
        }
    }
}

/// Truncated normal in mean–sd coordinates `(μ, σ)`:
/// `log q = -½ log 2π - (x-μ)²/(2σ²)`, `ψ = log σ + Ψ((γ-μ)/σ)`.
/// Not an exponential family in these coordinates.
#[derive(Debug, Clone)]
pub struct TruncNormalMeanSd {
    domain: ThetaDomain,
}

impl TruncNormalMeanSd {
    pub fn new() -> Self {
        Self {
            domain: ThetaDomain {
                lower: vec![f64::NEG_INFINITY, 0.0],
                upper: vec![f64::INFINITY, f64::INFINITY],
            },
        }
    }

    /// Partial of ν = (γ-μ)/σ along (0 = μ, 1 = σ, 2 = γ).
    fn nu_partial(mu: f64, sigma: f64, gamma: f64, coords: &[usize]) -> f64 {
        let [a, b, c] = counts(coords);
        if a + c > 1 {
            return 0.0;
        }
        let inv = power_deriv(sigma, -1.0, b);
        if a == 1 {
            -inv
        } else if c == 1 {
            inv
        } else {
            (gamma - mu) * inv
        }
    }
}

impl Default for TruncNormalMeanSd {
    fn default() -> Self {
        Self::new()
    }
}

impl Family for TruncNormalMeanSd {
    fn name(&self) -> &str {
        "trunc_normal_meansd"
    }

    fn dim(&self) -> usize {
        2
    }

    fn theta_domain(&self) -> &ThetaDomain {
        &self.domain
    }

    fn log_q(&self, x: f64, theta: &[f64]) -> f64 {
        let z = (x - theta[0]) / theta[1];
        -HALF_LN_2PI - 0.5 * z * z
    }

    fn psi_closed(&self, theta: &[f64], gamma: f64) -> Option<f64> {
        Some(theta[1].ln() + log_sf((gamma - theta[0]) / theta[1]))
    }

    fn psi_partial_closed(
        &self,
        theta: &[f64],
        gamma: f64,
        index: &[usize],
        s: usize,
    ) -> Option<f64> {
        let (mu, sigma) = (theta[0], theta[1]);
        let mut coords = index.to_vec();
        coords.extend(std::iter::repeat_n(G, s));
        let [a, b, c] = counts(&coords);
        let mut total = 0.0;
        if a == 0 && c == 0 {
            total += if b == 0 {
                sigma.ln()
            } else {
                let sign = if b % 2 == 1 { 1.0 } else { -1.0 };
                sign * factorial(b - 1) * sigma.powi(-(b as i32))
            };
        }
        let nu = (gamma - mu) / sigma;
        let outer = log_sf_derivs(nu);
        total += compose_partial(
            &outer,
            &|sub| Self::nu_partial(mu, sigma, gamma, sub),
            &coords,
        );
        Some(total)
    }

    fn log_q_partial_closed(&self, x: f64, theta: &[f64], index: &[usize]) -> Option<f64> {
        let [a, b, _] = counts(index);
        let e = x - theta[0];
        let da = match a {
            0 => -0.5 * e * e,
            1 => e,
            2 => -1.0,
            _ => return Some(0.0),
        };
        let mut v = da * power_deriv(theta[1], -2.0, b);
        if a == 0 && b == 0 {
            v -= HALF_LN_2PI;
        }
        Some(v)
    }

    fn tail_map(&self, theta: &[f64], gamma: f64) -> TailMap {
        TailMap::Rational {
            scale: theta[1] + (theta[0] - gamma).max(0.0),
        }
    }

    fn inverse_survival(&self, theta: &[f64], gamma: f64, v: f64) -> Option<f64> {
        let nu = (gamma - theta[0]) / theta[1];
        Some((theta[0] + theta[1] * norm_sf_inv(v * norm_sf(nu))).max(gamma))
    }

    fn reference_theta(&self) -> Vec<f64> {
        vec![0.0, 1.0]
    }

    fn initial_theta(&self, sample: &Sample) -> Vec<f64> {
        let (mean, sd) = mean_sd(sample.values());
        vec![mean, sd]
    }
}

#[cfg(test)]
mod tests {
    use crate::diff;
    use crate::models::{ModelSpec, ParamPoint};
    use crate::special::{inv_mills, norm_cdf};

    fn models() -> Vec<(ModelSpec, Vec<ParamPoint>)> {
        vec![
            (
                ModelSpec::trunc_normal_natural(),
                vec![
                    ParamPoint::new(vec![0.0, -0.5], 0.0),
                    ParamPoint::new(vec![1.3, -0.8], 0.4),
                    ParamPoint::new(vec![-0.7, -0.3], -1.2),
                ],
            ),
            (
                ModelSpec::trunc_normal_meansd(),
                vec![
                    ParamPoint::new(vec![0.0, 1.0], 0.0),
                    ParamPoint::new(vec![0.8, 1.7], -0.5),
                ],
            ),
            (
                ModelSpec::trunc_normal_fixed_scale(-0.5).unwrap(),
                vec![ParamPoint::new(vec![0.6], 0.2)],
            ),
        ]
    }

    #[test]
    fn log_density_at_standard_point() {
        let m = ModelSpec::trunc_normal_natural();
        let p = ParamPoint::new(vec![0.0, -0.5], 0.0);
        // the standard normal restricted to [0, ∞): 2 φ(1)
        let expected = (2.0 * (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert!((m.log_density(1.0, &p).unwrap() - expected).abs() < 1e-13);
        let alt = ModelSpec::trunc_normal_meansd();
        let q = ParamPoint::new(vec![0.0, 1.0], 0.0);
        assert!((alt.log_density(1.0, &q).unwrap() - expected).abs() < 1e-13);
        assert!((1.0 - norm_cdf(0.0) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn closed_psi_matches_quadrature() {
        for (m, points) in models() {
            for p in points {
                let closed = m.psi_value(&p).unwrap();
                let quad = m.psi_by_quadrature(&p).unwrap();
                assert!(
                    (closed - quad).abs() < 1e-10,
                    "{} {:?}: {closed} vs {quad}",
                    m.name(),
                    p
                );
            }
        }
    }

    #[test]
    fn closed_partials_match_finite_differences() {
        let coords_sets: &[&[usize]] =
            &[&[0], &[1], &[0, 1], &[0, 0, 1], &[1, 1, 0, 0], &[0, 0, 0]];
        for (m, points) in models() {
            let d = m.dim();
            for p in &points {
                let psi = |c: &[f64]| m.psi_value(&ParamPoint::from_coords(c));
                for &raw in coords_sets {
                    for s in 0..=(4 - raw.len()).min(2) {
                        let index: Vec<usize> = raw.iter().map(|&k| k % d).collect();
                        let mut fd_coords = index.clone();
                        fd_coords.extend(std::iter::repeat_n(d, s));
                        if fd_coords.len() > 4 {
                            continue;
                        }
                        let closed = m.psi_partial(p, &index, s).unwrap();
                        let fd = diff::partial(psi, &p.coords(), &fd_coords).unwrap();
                        let tol = 1e-6 * (1.0 + closed.abs());
                        assert!(
                            (closed - fd).abs() < tol,
                            "{} {:?} index {:?} s {}: {closed} vs {fd}",
                            m.name(),
                            p,
                            index,
                            s
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn sampler_stays_in_support() {
        let m = ModelSpec::trunc_normal_natural();
        let p = ParamPoint::new(vec![0.0, -0.5], 0.0);
        let s = m.draw_sample(&p, 20_000, 7).unwrap();
        assert!(s.min() >= 0.0);
        let mean = s.values().iter().sum::<f64>() / s.n() as f64;
        // mean of the half normal is λ(0) = √(2/π), sd ≈ 0.6
        assert!((mean - inv_mills(0.0)).abs() < 3.0 * 0.61 / (s.n() as f64).sqrt());
    }
}
