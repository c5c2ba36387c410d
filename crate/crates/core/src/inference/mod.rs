//! Maximum likelihood, exact grid posteriors and the posterior expansion.

mod expansion;
mod mle;
mod posterior;

pub use expansion::{
    expansion_density, exponential_moment, gaussian_moment, hat_tensor, ExpansionStats, PriorJet,
};
pub use mle::{fit_mle, MleResult};
pub use posterior::{
    posterior_grid, posterior_means, Axis, GridConfig, Pivot, PivotCdf, PosteriorGrid,
};

use crate::error::{Error, Result};
use crate::models::{ModelSpec, ParamPoint, Sample};

/// `Σⱼ log p(Xⱼ; θ, γ)` with the sufficient statistics summed once on an oTEF.
#[derive(Debug, Clone)]
pub struct LogLikelihood<'a> {
    model: &'a ModelSpec,
    sample: &'a Sample,
    /// `(Σ F(Xⱼ), Σ M(Xⱼ))` when the model is an oTEF.
    sums: Option<(Vec<f64>, f64)>,
}

impl<'a> LogLikelihood<'a> {
    pub fn new(model: &'a ModelSpec, sample: &'a Sample) -> Self {
        let family = model.family();
        let sums = model.is_otef().then(|| {
            let d = model.dim();
            let zero = vec![0.0; d];
            let mut f_sum = vec![0.0; d];
            let mut m_sum = 0.0;
            for &x in sample.values() {
                let f = family
                    .sufficient(x)
                    .expect("oTEF family has sufficient statistics");
                for (s, v) in f_sum.iter_mut().zip(f) {
                    *s += v;
                }
                m_sum += family.log_q(x, &zero);
            }
            (f_sum, m_sum)
        });
        Self {
            model,
            sample,
            sums,
        }
    }

    pub fn model(&self) -> &ModelSpec {
        self.model
    }

    pub fn sample(&self) -> &Sample {
        self.sample
    }

    pub fn n(&self) -> f64 {
        self.sample.n() as f64
    }

    /// `Σ log q(Xⱼ; θ)`.
    pub fn sum_log_q(&self, theta: &[f64]) -> f64 {
        match &self.sums {
            Some((f, m)) => m + f.iter().zip(theta).map(|(f, t)| f * t).sum::<f64>(),
            None => {
                let family = self.model.family();
                self.sample
                    .values()
                    .iter()
                    .map(|&x| family.log_q(x, theta))
                    .sum()
            }
        }
    }

    /// Log-likelihood; `-∞` when γ exceeds the sample minimum.
    pub fn value(&self, p: &ParamPoint) -> Result<f64> {
        if p.gamma > self.sample.min() {
            return Ok(f64::NEG_INFINITY);
        }
        let psi = self.model.psi_value(p)?;
        Ok(self.sum_log_q(&p.theta) - self.n() * psi)
    }

    /// `Σⱼ D_θ^index log q(Xⱼ; θ)`.
    pub fn sum_log_q_partial(&self, theta: &[f64], index: &[usize]) -> Result<f64> {
        if let Some((f, _)) = &self.sums {
            return Ok(match index.len() {
                0 => self.sum_log_q(theta),
                1 => f[index[0]],
                _ => 0.0,
            });
        }
        self.sample
            .values()
            .iter()
            .map(|&x| self.model.log_q_partial(x, theta, index))
            .sum()
    }
}

pub(crate) fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Argument(msg()))
    }
}
