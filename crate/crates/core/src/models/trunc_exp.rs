use crate::quadrature::TailMap;

use super::{Family, Sample, ThetaDomain};

/// Truncated exponential `θ e^{-θ(x-γ)}` on `[γ, ∞)`, with `q = e^{-θx}`
/// and `ψ = -θγ - log θ`.
#[derive(Debug, Clone)]
pub struct TruncExp {
    domain: ThetaDomain,
}

impl TruncExp {
    pub fn new() -> Self {
        Self {
            domain: ThetaDomain {
                lower: vec![0.0],
                upper: vec![f64::INFINITY],
            },
        }
    }
}

impl Default for TruncExp {
    fn default() -> Self {
        Self::new()
    }
}

impl Family for TruncExp {
    fn name(&self) -> &str {
        "trunc_exp"
    }

    fn dim(&self) -> usize {
        1
    }

    fn theta_domain(&self) -> &ThetaDomain {
        &self.domain
    }

    fn log_q(&self, x: f64, theta: &[f64]) -> f64 {
        -theta[0] * x
    }

    fn psi_closed(&self, theta: &[f64], gamma: f64) -> Option<f64> {
        Some(-theta[0] * gamma - theta[0].ln())
    }

    fn psi_partial_closed(
        &self,
        theta: &[f64],
        gamma: f64,
        index: &[usize],
        s: usize,
    ) -> Option<f64> {
        let t = theta[0];
        let r = index.len();
        Some(match (r, s) {
            (0, 0) => -t * gamma - t.ln(),
            (1, 0) => -gamma - 1.0 / t,
            (r, 0) => {
                // d^r/dθ^r (-log θ) = (-1)^r (r-1)! / θ^r
                let fact: f64 = (1..r).map(|k| k as f64).product();
                let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                sign * fact / t.powi(r as i32)
            }
            (0, 1) => -t,
            (1, 1) => -1.0,
            _ => 0.0,
        })
    }

    fn log_q_partial_closed(&self, x: f64, theta: &[f64], index: &[usize]) -> Option<f64> {
        Some(match index.len() {
            0 => -theta[0] * x,
            1 => -x,
            _ => 0.0,
        })
    }

    fn sufficient(&self, x: f64) -> Option<Vec<f64>> {
        Some(vec![-x])
    }

    fn is_otef(&self) -> bool {
        true
    }

    /// `η = 1/θ + γ`, the mean of X. This is `-D_θψ`; the sign is chosen so
    /// that H = {η > γ}.
    fn eta_closed(&self, theta: &[f64], gamma: f64) -> Option<Vec<f64>> {
        Some(vec![1.0 / theta[0] + gamma])
    }

    fn eta_image_contains(&self, eta: &[f64], gamma: f64) -> Option<bool> {
        Some(eta.len() == 1 && eta[0] > gamma)
    }

    fn tail_map(&self, theta: &[f64], _gamma: f64) -> TailMap {
        // e^{-θx} becomes (1-u)^2 under this map, so the mapped integrand vanishes at u = 1
        TailMap::Exponential {
            scale: 2.0 / theta[0],
        }
    }

    fn inverse_survival(&self, theta: &[f64], gamma: f64, v: f64) -> Option<f64> {
        Some(gamma - v.ln() / theta[0])
    }

    fn reference_theta(&self) -> Vec<f64> {
        vec![1.0]
    }

    fn initial_theta(&self, sample: &Sample) -> Vec<f64> {
        let min = sample.min();
        let spread: f64 = sample.values().iter().map(|x| x - min).sum();
        if spread > 0.0 {
            vec![sample.n() as f64 / spread]
        } else {
            vec![1.0]
        }
    }
}
