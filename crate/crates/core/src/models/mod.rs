//! One-sided truncated families and the built-in models.
//!
//! A family implements [`Family`]; [`ModelSpec`] wraps it with the shared
//! numerical fallbacks (quadrature normalizer, finite-difference partials,
//! inverse-CDF sampling) so every downstream module works with any family.

mod otef;
mod trunc_exp;
mod trunc_normal;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diff;
use crate::error::{Error, Result};
use crate::quadrature::{self, QuadratureConfig, TailMap};

pub use otef::{OtefDefinition, OtefModel};
pub use trunc_exp::TruncExp;
pub use trunc_normal::{TruncNormalMeanSd, TruncNormalNatural};

/// Registry names of the built-in models.
pub const BUILTIN_MODELS: [&str; 4] = [
    "trunc_exp",
    "trunc_normal_natural",
    "trunc_normal_meansd",
    "trunc_normal_fixed_scale",
];

/// A point `(θ, γ)` of the parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    pub theta: Vec<f64>,
    pub gamma: f64,
}

impl ParamPoint {
    pub fn new(theta: Vec<f64>, gamma: f64) -> Self {
        Self { theta, gamma }
    }

    /// `(θ¹, …, θᵈ, γ)` as one coordinate vector.
    pub fn coords(&self) -> Vec<f64> {
        let mut v = self.theta.clone();
        v.push(self.gamma);
        v
    }

    pub fn from_coords(coords: &[f64]) -> Self {
        let (theta, gamma) = coords.split_at(coords.len() - 1);
        Self {
            theta: theta.to_vec(),
            gamma: gamma[0],
        }
    }
}

/// An i.i.d. sample, kept sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument("sample is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("sample contains non-finite values".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }
}

/// Open box `Π (lowerᵢ, upperᵢ)` describing Θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ThetaDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Argument(
                "domain bounds must have equal, positive length".into(),
            ));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::Argument(
                "domain lower bounds must be below upper bounds".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.lower.len()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(t, (l, u))| t.is_finite() && l < t && t < u)
    }
}

/// Open truncation interval `I = (I₁, I₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }
}

/// Interface every one-sided truncated family implements.
///
/// Only the density pieces are mandatory; every closed form is optional and
/// falls back to quadrature or finite differences in [`ModelSpec`].
pub trait Family: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn theta_domain(&self) -> &ThetaDomain;
    fn interval(&self) -> Interval {
        Interval::REAL_LINE
    }
    fn log_q(&self, x: f64, theta: &[f64]) -> f64;

    fn psi_closed(&self, _theta: &[f64], _gamma: f64) -> Option<f64> {
        None
    }

    /// `D_θ^index ∂_γ^s ψ` in closed form.
    fn psi_partial_closed(
        &self,
        _theta: &[f64],
        _gamma: f64,
        _index: &[usize],
        _s: usize,
    ) -> Option<f64> {
        None
    }

    /// `D_θ^index log q(x; θ)` in closed form.
    fn log_q_partial_closed(&self, _x: f64, _theta: &[f64], _index: &[usize]) -> Option<f64> {
        None
    }

    /// Sufficient statistics `F(x)` when the family is an oTEF in these coordinates.
    fn sufficient(&self, _x: f64) -> Option<Vec<f64>> {
        None
    }

    fn is_otef(&self) -> bool {
        false
    }

    /// Expectation parameters when the family fixes its own convention.
    fn eta_closed(&self, _theta: &[f64], _gamma: f64) -> Option<Vec<f64>> {
        None
    }

    /// Whether `(η, γ)` lies in the image set H, when that is known.
    fn eta_image_contains(&self, _eta: &[f64], _gamma: f64) -> Option<bool> {
        None
    }

    fn tail_map(&self, _theta: &[f64], _gamma: f64) -> TailMap {
        TailMap::default()
    }

    /// Quantile at upper-tail probability `v ∈ (0, 1)`.
    fn inverse_survival(&self, _theta: &[f64], _gamma: f64, _v: f64) -> Option<f64> {
        None
    }

    /// A valid interior θ used to start iterations.
    fn reference_theta(&self) -> Vec<f64>;

    /// Starting point for the MLE iteration.
    fn initial_theta(&self, _sample: &Sample) -> Vec<f64> {
        self.reference_theta()
    }
}

/// A model: a family plus the quadrature settings used by its fallbacks.
#[derive(Clone)]
pub struct ModelSpec {
    family: Arc<dyn Family>,
    quad: QuadratureConfig,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("family", &self.family)
            .finish()
    }
}

/// Tighter tolerances for normalizers that get differentiated numerically.
pub(crate) fn tight(cfg: &QuadratureConfig) -> QuadratureConfig {
    QuadratureConfig {
        rel_tol: cfg.rel_tol.min(1e-13),
        abs_tol: cfg.abs_tol.min(1e-15),
        max_subdivisions: cfg.max_subdivisions.max(500),
        tail_map: cfg.tail_map,
    }
}

fn gamma_counts(index: &[usize], s: usize, d: usize) -> Vec<usize> {
    let mut coords = index.to_vec();
    coords.extend(std::iter::repeat_n(d, s));
    coords
}

impl ModelSpec {
    pub fn new(family: Arc<dyn Family>) -> Self {
        Self {
            family,
            quad: QuadratureConfig::default(),
        }
    }

    pub fn with_quadrature(mut self, cfg: QuadratureConfig) -> Self {
        self.quad = cfg;
        self
    }

    pub fn trunc_exp() -> Self {
        Self::new(Arc::new(TruncExp::new()))
    }

    pub fn trunc_normal_natural() -> Self {
        Self::new(Arc::new(TruncNormalNatural::full()))
    }

    /// Truncated normal with natural `α` free and `β` held fixed.
    pub fn trunc_normal_fixed_scale(beta: f64) -> Result<Self> {
        Ok(Self::new(Arc::new(TruncNormalNatural::fixed_beta(beta)?)))
    }

    pub fn trunc_normal_meansd() -> Self {
        Self::new(Arc::new(TruncNormalMeanSd::new()))
    }

    /// Looks up a built-in model by registry name.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "trunc_exp" => Ok(Self::trunc_exp()),
            "trunc_normal_natural" => Ok(Self::trunc_normal_natural()),
            "trunc_normal_meansd" => Ok(Self::trunc_normal_meansd()),
            "trunc_normal_fixed_scale" => Self::trunc_normal_fixed_scale(-0.5),
            other => Err(Error::Config(format!(
                "unknown model `{other}` (built-ins: {})",
                BUILTIN_MODELS.join(", ")
            ))),
        }
    }

    pub fn family(&self) -> &dyn Family {
        self.family.as_ref()
    }

    pub fn quadrature(&self) -> &QuadratureConfig {
        &self.quad
    }

    pub fn name(&self) -> &str {
        self.family.name()
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    pub fn is_otef(&self) -> bool {
        self.family.is_otef()
    }

    pub fn interval(&self) -> Interval {
        self.family.interval()
    }

    pub fn theta_domain(&self) -> &ThetaDomain {
        self.family.theta_domain()
    }

    pub fn is_valid(&self, p: &ParamPoint) -> bool {
        p.theta.len() == self.dim()
            && self.theta_domain().contains(&p.theta)
            && p.gamma.is_finite()
            && self.interval().contains(p.gamma)
    }

    pub fn check_point(&self, p: &ParamPoint) -> Result<()> {
        if p.theta.len() != self.dim() {
            return Err(Error::Domain(format!(
                "{} expects {} regular parameter(s), got {}",
                self.name(),
                self.dim(),
                p.theta.len()
            )));
        }
        if !self.is_valid(p) {
            return Err(Error::Domain(format!(
                "point theta={:?}, gamma={} is outside the parameter space of {}",
                p.theta,
                p.gamma,
                self.name()
            )));
        }
        Ok(())
    }

    fn tail(&self, p: &ParamPoint) -> TailMap {
        self.quad
            .tail_map
            .unwrap_or_else(|| self.family.tail_map(&p.theta, p.gamma))
    }

    /// `∫_γ^{I₂} f(x) dx`, anchored at γ.
    pub(crate) fn integrate_support<F: Fn(f64) -> f64>(
        &self,
        f: F,
        p: &ParamPoint,
        cfg: &QuadratureConfig,
    ) -> Result<quadrature::Estimate> {
        let hi = self.interval().hi;
        if hi.is_finite() {
            quadrature::integrate(f, p.gamma, hi, cfg)
        } else {
            quadrature::integrate_upper_tail(f, p.gamma, self.tail(p), cfg)
        }
    }

    fn psi_quadrature(&self, p: &ParamPoint, cfg: &QuadratureConfig) -> Result<f64> {
        let shift = self.family.log_q(p.gamma, &p.theta);
        if !shift.is_finite() {
            return Err(Error::Normalization(format!(
                "log q is not finite at gamma = {}",
                p.gamma
            )));
        }
        let est =
            self.integrate_support(|x| (self.family.log_q(x, &p.theta) - shift).exp(), p, cfg)?;
        if !(est.value.is_finite() && est.value > 0.0) {
            return Err(Error::Normalization(format!(
                "normalizing integral is {}",
                est.value
            )));
        }
        Ok(shift + est.value.ln())
    }

    /// ψ(θ, γ), in closed form when the family has one, else by quadrature.
    pub fn psi_value(&self, p: &ParamPoint) -> Result<f64> {
        self.check_point(p)?;
        match self.family.psi_closed(&p.theta, p.gamma) {
            Some(v) if v.is_finite() => Ok(v),
            Some(v) => Err(Error::Normalization(format!("closed-form psi is {v}"))),
            None => self.psi_quadrature(p, &self.quad),
        }
    }

    /// ψ evaluated by quadrature regardless of any closed form.
    pub fn psi_by_quadrature(&self, p: &ParamPoint) -> Result<f64> {
        self.check_point(p)?;
        self.psi_quadrature(p, &self.quad)
    }

    fn psi_for_fd(&self, coords: &[f64]) -> Result<f64> {
        let p = ParamPoint::from_coords(coords);
        self.check_point(&p)?;
        match self.family.psi_closed(&p.theta, p.gamma) {
            Some(v) => Ok(v),
            None => self.psi_quadrature(&p, &tight(&self.quad)),
        }
    }

    /// `log p(x; θ, γ)`; `-∞` below the support.
    pub fn log_density(&self, x: f64, p: &ParamPoint) -> Result<f64> {
        self.check_point(p)?;
        if !self.interval().contains(x) {
            return Err(Error::Domain(format!(
                "x = {x} is outside the interval of {}",
                self.name()
            )));
        }
        if x < p.gamma {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.family.log_q(x, &p.theta) - self.psi_value(p)?)
    }

    /// `D_θ^index ∂_γ^s ψ(θ, γ)`.
    pub fn psi_partial(&self, p: &ParamPoint, index: &[usize], s: usize) -> Result<f64> {
        self.check_point(p)?;
        let d = self.dim();
        if index.iter().any(|&i| i >= d) {
            return Err(Error::Argument(format!(
                "theta index out of range for d = {d}"
            )));
        }
        if index.len() + s > 4 {
            return Err(Error::Argument(
                "partials are supported up to total order 4".into(),
            ));
        }
        if let Some(v) = self.family.psi_partial_closed(&p.theta, p.gamma, index, s) {
            return Ok(v);
        }
        if index.is_empty() && s == 0 {
            return self.psi_value(p);
        }
        let coords = p.coords();
        if self.family.psi_closed(&p.theta, p.gamma).is_some() {
            return diff::partial(|c| self.psi_for_fd(c), &coords, &gamma_counts(index, s, d));
        }
        if s == 0 && self.is_otef() {
            return self.psi_cumulant(p, index);
        }
        if s >= 1 {
            // ∂_γ ψ = -p(γ; θ, γ) for every oTF, so one derivative is exact.
            let dpsi = |c: &[f64]| -> Result<f64> {
                let q = ParamPoint::from_coords(c);
                Ok(-(self.family.log_q(q.gamma, &q.theta) - self.psi_for_fd(c)?).exp())
            };
            return diff::partial(dpsi, &coords, &gamma_counts(index, s - 1, d));
        }
        diff::partial(|c| self.psi_for_fd(c), &coords, index)
    }

    /// Joint cumulant of `F_{index}` under p, which equals `D_θ^index ψ` on an oTEF.
    fn psi_cumulant(&self, p: &ParamPoint, index: &[usize]) -> Result<f64> {
        let cfg = tight(&self.quad);
        let psi = self.psi_quadrature(p, &cfg)?;
        let moment = |g: &dyn Fn(&[f64]) -> f64| -> Result<f64> {
            let est = self.integrate_support(
                |x| {
                    let f = self
                        .family
                        .sufficient(x)
                        .expect("oTEF family has sufficient statistics");
                    g(&f) * (self.family.log_q(x, &p.theta) - psi).exp()
                },
                p,
                &cfg,
            )?;
            Ok(est.value)
        };
        let d = self.dim();
        let mut mean = vec![0.0; d];
        for (i, m) in mean.iter_mut().enumerate() {
            *m = moment(&|f| f[i])?;
        }
        if index.len() == 1 {
            return Ok(mean[index[0]]);
        }
        let central = |slots: &[usize]| -> Result<f64> {
            let mean = &mean;
            moment(&|f| slots.iter().map(|&k| f[k] - mean[k]).product())
        };
        match index.len() {
            2 | 3 => central(index),
            4 => {
                let (a, b, c, e) = (index[0], index[1], index[2], index[3]);
                Ok(central(index)?
                    - central(&[a, b])? * central(&[c, e])?
                    - central(&[a, c])? * central(&[b, e])?
                    - central(&[a, e])? * central(&[b, c])?)
            }
            _ => unreachable!("orders checked by caller"),
        }
    }

    /// `D_θ^index log q(x; θ)`.
    pub fn log_q_partial(&self, x: f64, theta: &[f64], index: &[usize]) -> Result<f64> {
        if let Some(v) = self.family.log_q_partial_closed(x, theta, index) {
            return Ok(v);
        }
        if index.is_empty() {
            return Ok(self.family.log_q(x, theta));
        }
        if self.is_otef() {
            let f = self
                .family
                .sufficient(x)
                .expect("oTEF family has sufficient statistics");
            return Ok(if index.len() == 1 { f[index[0]] } else { 0.0 });
        }
        let domain = self.theta_domain();
        diff::partial(
            |t| {
                if domain.contains(t) {
                    Ok(self.family.log_q(x, t))
                } else {
                    Err(Error::Domain("theta outside domain".into()))
                }
            },
            theta,
            index,
        )
    }

    /// `D_θ^index ∂_γ^s log p(x; θ, γ)` at `x > γ`.
    pub fn log_density_partial(
        &self,
        x: f64,
        p: &ParamPoint,
        index: &[usize],
        s: usize,
    ) -> Result<f64> {
        if !(x > p.gamma) {
            return Err(Error::Domain(format!(
                "log p is not differentiable at x = {x} <= gamma = {}",
                p.gamma
            )));
        }
        if !self.interval().contains(x) {
            return Err(Error::Domain(format!(
                "x = {x} is outside the interval of {}",
                self.name()
            )));
        }
        self.log_density_partial_right(x, p, index, s)
    }

    /// As [`Self::log_density_partial`] but also accepts `x = γ`, returning
    /// the right-limit value. Used at `x₍₁₎ = γ̂`.
    pub fn log_density_partial_right(
        &self,
        x: f64,
        p: &ParamPoint,
        index: &[usize],
        s: usize,
    ) -> Result<f64> {
        let psi = self.psi_partial(p, index, s)?;
        if s >= 1 {
            return Ok(-psi);
        }
        Ok(self.log_q_partial(x, &p.theta, index)? - psi)
    }

    /// Expectation parameters η.
    pub fn eta(&self, p: &ParamPoint) -> Result<Vec<f64>> {
        self.check_point(p)?;
        if !self.is_otef() {
            return Err(Error::Unsupported(format!(
                "expectation parameters need an oTEF; {} is not one in these coordinates",
                self.name()
            )));
        }
        if let Some(eta) = self.family.eta_closed(&p.theta, p.gamma) {
            return Ok(eta);
        }
        (0..self.dim())
            .map(|i| self.psi_partial(p, &[i], 0))
            .collect()
    }

    /// `n` i.i.d. draws, deterministic in `seed`.
    pub fn draw_sample(&self, p: &ParamPoint, n: usize, seed: u64) -> Result<Sample> {
        self.check_point(p)?;
        if n == 0 {
            return Err(Error::Argument("sample size must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.draw_with(p, n, &mut rng)
    }

    pub(crate) fn draw_with<R: Rng>(
        &self,
        p: &ParamPoint,
        n: usize,
        rng: &mut R,
    ) -> Result<Sample> {
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            let v = loop {
                let u: f64 = rng.random();
                if u > 0.0 {
                    break 1.0 - u;
                }
            };
            let x = match self.family.inverse_survival(&p.theta, p.gamma, v) {
                Some(x) => x,
                None => self.numeric_inverse_survival(p, v)?,
            };
            values.push(x);
        }
        Sample::new(values)
    }

    fn numeric_inverse_survival(&self, p: &ParamPoint, v: f64) -> Result<f64> {
        let psi = self.psi_value(p)?;
        let survival = |x: f64| -> Result<f64> {
            let cfg = &self.quad;
            let q = |y: f64| (self.family.log_q(y, &p.theta) - psi).exp();
            let hi = self.interval().hi;
            let est = if hi.is_finite() {
                quadrature::integrate(q, x, hi, cfg)?
            } else {
                quadrature::integrate_upper_tail(q, x, self.tail(p), cfg)?
            };
            Ok(est.value)
        };
        let mut lo = p.gamma;
        let mut step = 1.0;
        let mut hi = lo + step;
        while survival(hi)? > v {
            lo = hi;
            step *= 2.0;
            hi = lo + step;
            if !hi.is_finite() || step > 1e12 {
                return Err(Error::Domain("could not bracket quantile".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if survival(mid)? > v {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * (1.0 + mid.abs()) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Falling factorial `p (p-1) … (p-k+1)`.
pub(crate) fn falling(p: f64, k: usize) -> f64 {
    (0..k).map(|j| p - j as f64).product()
}

/// `k`-th derivative of `w^p`.
pub(crate) fn power_deriv(w: f64, p: f64, k: usize) -> f64 {
    falling(p, k) * w.powf(p - k as f64)
}

/// All set partitions of `{0, …, k-1}`.
pub(crate) fn set_partitions(k: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out: Vec<Vec<Vec<usize>>> = vec![vec![]];
    for item in 0..k {
        let mut next = Vec::new();
        for part in &out {
            for b in 0..part.len() {
                let mut p = part.clone();
                p[b].push(item);
                next.push(p);
            }
            let mut p = part.clone();
            p.push(vec![item]);
            next.push(p);
        }
        out = next;
    }
    out
}

/// Mixed partial of `Ψ(ν(·))` along the coordinate list `coords`, by Faà di
/// Bruno over set partitions. `outer[k]` is `Ψ^(k)(ν)`; `inner` returns the
/// partial of ν along a coordinate sub-list.
pub(crate) fn compose_partial(
    outer: &[f64; 5],
    inner: &dyn Fn(&[usize]) -> f64,
    coords: &[usize],
) -> f64 {
    if coords.is_empty() {
        return outer[0];
    }
    set_partitions(coords.len())
        .iter()
        .map(|part| {
            let mut term = outer[part.len()];
            for block in part {
                if term == 0.0 {
                    break;
                }
                let sub: Vec<usize> = block.iter().map(|&k| coords[k]).collect();
                term *= inner(&sub);
            }
            term
        })
        .sum()
}
