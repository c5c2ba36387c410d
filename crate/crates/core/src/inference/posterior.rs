use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{LogLikelihood, MleResult};
use crate::error::{Error, Result};
use crate::models::{ModelSpec, ParamPoint, Sample};
use crate::priors::PriorSpec;
use crate::quadrature::{composite_gauss_legendre, gauss_legendre};

/// Extent and resolution of the tensor-product posterior grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Half-width in θ, in units of `1/√n · √(ĝ^{ii})`.
    pub theta_sd: f64,
    /// Width below `x₍₁₎` in γ, in units of `1/(n ĉ)`.
    pub gamma_width: f64,
    pub panels: usize,
    pub nodes_per_panel: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            theta_sd: 8.0,
            gamma_width: 40.0,
            panels: 8,
            nodes_per_panel: 8,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_sd > 0.0 && self.gamma_width > 0.0) {
            return Err(Error::Config("grid widths must be positive".into()));
        }
        if self.panels == 0 || self.nodes_per_panel < 2 {
            return Err(Error::Config(
                "grid needs >= 1 panel and >= 2 nodes per panel".into(),
            ));
        }
        Ok(())
    }
}

/// One axis of the grid: composite Gauss–Legendre nodes on equal panels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub panels: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Axis {
    fn new(lo: f64, hi: f64, panels: usize, per_panel: usize) -> Self {
        let (nodes, weights) = composite_gauss_legendre(lo, hi, panels, per_panel);
        Self {
            lo,
            hi,
            panels,
            nodes,
            weights,
        }
    }

    fn per_panel(&self) -> usize {
        self.nodes.len() / self.panels
    }

    /// `∫_lo^b m` for a function known at the nodes, via the degree
    /// `per_panel − 1` interpolant inside the panel containing `b`.
    fn integral_below(&self, values: &[f64], b: f64) -> f64 {
        if b <= self.lo {
            return 0.0;
        }
        if b >= self.hi {
            return values.iter().zip(&self.weights).map(|(v, w)| v * w).sum();
        }
        let width = (self.hi - self.lo) / self.panels as f64;
        let k = (((b - self.lo) / width) as usize).min(self.panels - 1);
        let m = self.per_panel();
        let mut total: f64 = values[..k * m]
            .iter()
            .zip(&self.weights[..k * m])
            .map(|(v, w)| v * w)
            .sum();
        let a = self.lo + k as f64 * width;
        let xs = &self.nodes[k * m..(k + 1) * m];
        let ys = &values[k * m..(k + 1) * m];
        let (gx, gw) = gauss_legendre(m);
        let half = 0.5 * (b - a);
        for (x, w) in gx.iter().zip(&gw) {
            let t = a + half * (x + 1.0);
            total += half * w * lagrange(xs, ys, t);
        }
        total
    }
}

fn lagrange(xs: &[f64], ys: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    for (i, (&xi, &yi)) in xs.iter().zip(ys).enumerate() {
        let mut basis = 1.0;
        for (j, &xj) in xs.iter().enumerate() {
            if i != j {
                basis *= (t - xj) / (xi - xj);
            }
        }
        acc += yi * basis;
    }
    acc
}

/// Normalized tensor-product quadrature of the exact posterior over `(θ, γ)`.
///
/// Nodes are flattened row-major with γ last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorGrid {
    pub theta_axes: Vec<Axis>,
    pub gamma_axis: Axis,
    /// `log` of the product quadrature weight at each node.
    pub log_weights: Vec<f64>,
    /// Unnormalized log posterior at each node.
    pub log_post: Vec<f64>,
    pub log_z: f64,
    pub mle: MleResult,
    pub sigma_hat: Vec<f64>,
}

/// Which pivot a posterior probability refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Pivot {
    /// `T = n ĉ (γ − γ̂)`.
    T,
    /// `Uⁱ/σ̂ᵢ` with `U = √n (θ − θ̂)`, zero-based `i`.
    U(usize),
}

impl Pivot {
    /// `T`, `U` (first component) or `U:<i>` with one-based `i`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "T" | "t" => Ok(Self::T),
            "U" | "u" => Ok(Self::U(0)),
            other => {
                let idx = other
                    .strip_prefix("U:")
                    .or_else(|| other.strip_prefix("u:"))
                    .and_then(|i| i.parse::<usize>().ok())
                    .filter(|&i| i >= 1)
                    .ok_or_else(|| Error::Config(format!("unknown pivot `{other}`")))?;
                Ok(Self::U(idx - 1))
            }
        }
    }
}

impl std::fmt::Display for Pivot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Pivot::T => write!(f, "T"),
            Pivot::U(i) => write!(f, "U:{}", i + 1),
        }
    }
}

/// A posterior pivot probability; `clamped` marks a `z` beyond the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PivotCdf {
    pub probability: f64,
    pub clamped: bool,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Builds the grid around the MLE and normalizes it.
pub fn posterior_grid(
    model: &ModelSpec,
    sample: &Sample,
    prior: &PriorSpec,
    mle: &MleResult,
    cfg: &GridConfig,
) -> Result<PosteriorGrid> {
    cfg.validate()?;
    let d = model.dim();
    let n = sample.n() as f64;
    let g_inv = mle.g_inverse()?;
    let sigma_hat: Vec<f64> = (0..d).map(|i| g_inv[(i, i)].sqrt()).collect();
    let domain = model.theta_domain();
    let theta_axes: Vec<Axis> = (0..d)
        .map(|i| {
            let half = cfg.theta_sd * sigma_hat[i] / n.sqrt();
            let lo = (mle.theta_hat[i] - half).max(domain.lower[i]);
            let hi = (mle.theta_hat[i] + half).min(domain.upper[i]);
            Axis::new(lo, hi, cfg.panels, cfg.nodes_per_panel)
        })
        .collect();
    let x1 = sample.min();
    let g_lo = (x1 - cfg.gamma_width / (n * mle.c_hat)).max(model.interval().lo);
    let gamma_axis = Axis::new(g_lo, x1, cfg.panels, cfg.nodes_per_panel);

    let ll = LogLikelihood::new(model, sample);
    let per_axis = cfg.panels * cfg.nodes_per_panel;
    let total = per_axis.pow(d as u32 + 1);
    let mut log_weights = Vec::with_capacity(total);
    let mut log_post = Vec::with_capacity(total);
    let mut cursor = vec![0usize; d];
    for _ in 0..per_axis.pow(d as u32) {
        let theta: Vec<f64> = cursor
            .iter()
            .enumerate()
            .map(|(i, &k)| theta_axes[i].nodes[k])
            .collect();
        let log_w_theta: f64 = cursor
            .iter()
            .enumerate()
            .map(|(i, &k)| theta_axes[i].weights[k].ln())
            .sum();
        let sum_log_q = ll.sum_log_q(&theta);
        for (g, w) in gamma_axis.nodes.iter().zip(&gamma_axis.weights) {
            let p = ParamPoint::new(theta.clone(), *g);
            let lp = sum_log_q - n * model.psi_value(&p)? + prior.log_pi(&p)?;
            log_weights.push(log_w_theta + w.ln());
            log_post.push(lp);
        }
        for i in (0..d).rev() {
            cursor[i] += 1;
            if cursor[i] < per_axis {
                break;
            }
            cursor[i] = 0;
        }
    }
    let log_z = log_sum_exp(log_post.iter().zip(&log_weights).map(|(a, b)| a + b));
    if !log_z.is_finite() {
        return Err(Error::Posterior(format!("log normalizer is {log_z}")));
    }
    Ok(PosteriorGrid {
        theta_axes,
        gamma_axis,
        log_weights,
        log_post,
        log_z,
        mle: mle.clone(),
        sigma_hat,
    })
}

impl PosteriorGrid {
    pub fn dim(&self) -> usize {
        self.theta_axes.len()
    }

    fn per_axis(&self) -> usize {
        self.gamma_axis.nodes.len()
    }

    /// Normalized posterior density at node `k`.
    fn density(&self, k: usize) -> f64 {
        (self.log_post[k] - self.log_z).exp()
    }

    /// Decomposes a flat node index into per-axis indices (θ axes then γ).
    fn axes_of(&self, mut k: usize) -> Vec<usize> {
        let m = self.per_axis();
        let mut out = vec![0; self.dim() + 1];
        for slot in (0..=self.dim()).rev() {
            out[slot] = k % m;
            k /= m;
        }
        out
    }

    /// Total normalized mass, 1 up to rounding.
    pub fn total_mass(&self) -> f64 {
        self.log_post
            .iter()
            .zip(&self.log_weights)
            .map(|(a, w)| (a + w - self.log_z).exp())
            .sum()
    }

    /// Marginal density along `axis` (θ indices first, then γ at `dim()`),
    /// evaluated at that axis's nodes.
    pub fn marginal(&self, axis: usize) -> Vec<f64> {
        let m = self.per_axis();
        let axis_weights = |slot: usize| -> &[f64] {
            if slot == self.dim() {
                &self.gamma_axis.weights
            } else {
                &self.theta_axes[slot].weights
            }
        };
        let mut out = vec![0.0; m];
        for k in 0..self.log_post.len() {
            let idx = self.axes_of(k);
            let w_own = axis_weights(axis)[idx[axis]];
            out[idx[axis]] += (self.log_weights[k]).exp() / w_own * self.density(k);
        }
        out
    }

    fn axis(&self, slot: usize) -> &Axis {
        if slot == self.dim() {
            &self.gamma_axis
        } else {
            &self.theta_axes[slot]
        }
    }

    /// Posterior probability of `{pivot ≤ z}`.
    pub fn pivot_cdf(&self, pivot: Pivot, z: f64) -> Result<PivotCdf> {
        let n = self.mle.n as f64;
        let (slot, bound) = match pivot {
            Pivot::T => (self.dim(), self.mle.gamma_hat + z / (n * self.mle.c_hat)),
            Pivot::U(i) => {
                if i >= self.dim() {
                    return Err(Error::Argument(format!(
                        "pivot index {} exceeds d = {}",
                        i + 1,
                        self.dim()
                    )));
                }
                (i, self.mle.theta_hat[i] + z * self.sigma_hat[i] / n.sqrt())
            }
        };
        if z.is_nan() {
            return Err(Error::Argument("pivot value is NaN".into()));
        }
        let axis = self.axis(slot);
        if bound <= axis.lo {
            return Ok(PivotCdf {
                probability: 0.0,
                clamped: true,
            });
        }
        if bound >= axis.hi {
            // Above x₍₁₎ the posterior has no γ mass at all, so that case is exact.
            let clamped = !(slot == self.dim());
            return Ok(PivotCdf {
                probability: 1.0,
                clamped,
            });
        }
        let marginal = self.marginal(slot);
        let p = axis.integral_below(&marginal, bound).clamp(0.0, 1.0);
        Ok(PivotCdf {
            probability: p,
            clamped: false,
        })
    }

    /// Posterior probability of `{γ ≤ g}`.
    pub fn gamma_cdf(&self, g: f64) -> f64 {
        let axis = &self.gamma_axis;
        axis.integral_below(&self.marginal(self.dim()), g)
            .clamp(0.0, 1.0)
    }

    /// Quantile of a pivot under the posterior, by bisection on [`Self::pivot_cdf`].
    pub fn pivot_quantile(&self, pivot: Pivot, level: f64) -> Result<f64> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Argument(format!(
                "level must lie in (0, 1), got {level}"
            )));
        }
        let n = self.mle.n as f64;
        let (slot, to_z): (usize, Box<dyn Fn(f64) -> f64>) = match pivot {
            Pivot::T => {
                let (g, c) = (self.mle.gamma_hat, self.mle.c_hat);
                (self.dim(), Box::new(move |b| n * c * (b - g)))
            }
            Pivot::U(i) => {
                let (t, s) = (self.mle.theta_hat[i], self.sigma_hat[i]);
                (i, Box::new(move |b| (b - t) * n.sqrt() / s))
            }
        };
        let axis = self.axis(slot);
        let marginal = self.marginal(slot);
        let (mut lo, mut hi) = (axis.lo, axis.hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if axis.integral_below(&marginal, mid) < level {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
                break;
            }
        }
        Ok(to_z(0.5 * (lo + hi)))
    }

    /// Exact normalized posterior density at `(u, t)` with
    /// `θ = θ̂ + u/√n`, `γ = γ̂ + t/(n ĉ)`.
    pub fn density_ut(
        &self,
        model: &ModelSpec,
        sample: &Sample,
        prior: &PriorSpec,
        u: &[f64],
        t: f64,
    ) -> Result<f64> {
        let n = self.mle.n as f64;
        let d = self.dim();
        if t > 0.0 {
            return Ok(0.0);
        }
        let theta: Vec<f64> = self
            .mle
            .theta_hat
            .iter()
            .zip(u)
            .map(|(th, u)| th + u / n.sqrt())
            .collect();
        let p = ParamPoint::new(theta, self.mle.gamma_hat + t / (n * self.mle.c_hat));
        if !model.is_valid(&p) {
            return Ok(0.0);
        }
        let ll = LogLikelihood::new(model, sample);
        let lp = ll.value(&p)? + prior.log_pi(&p)? - self.log_z;
        let log_jac = -0.5 * d as f64 * n.ln() - (n * self.mle.c_hat).ln();
        Ok((lp + log_jac).exp())
    }

    /// Nodes and normalized log densities, for plotting.
    pub fn to_json(&self) -> Value {
        json!({
            "theta_nodes": self.theta_axes.iter().map(|a| a.nodes.clone()).collect::<Vec<_>>(),
            "gamma_nodes": self.gamma_axis.nodes,
            "log_weights": self.log_weights,
            "log_density": self.log_post.iter().map(|v| v - self.log_z).collect::<Vec<_>>(),
            "log_z": self.log_z,
            "mle": self.mle,
        })
    }
}

/// Posterior means `(θ̄, γ̄)`.
pub fn posterior_means(post: &PosteriorGrid) -> (Vec<f64>, f64) {
    let d = post.dim();
    let mut theta = vec![0.0; d];
    let mut gamma = 0.0;
    for k in 0..post.log_post.len() {
        let w = (post.log_post[k] + post.log_weights[k] - post.log_z).exp();
        let idx = post.axes_of(k);
        for i in 0..d {
            theta[i] += w * post.theta_axes[i].nodes[idx[i]];
        }
        gamma += w * post.gamma_axis.nodes[idx[d]];
    }
    (theta, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::fit_mle;

    fn setup(n: usize, seed: u64, prior: &str) -> (ModelSpec, Sample, PriorSpec, PosteriorGrid) {
        let m = ModelSpec::trunc_exp();
        let s = m
            .draw_sample(&ParamPoint::new(vec![2.0], 0.0), n, seed)
            .unwrap();
        let pr = PriorSpec::parse(prior, &m).unwrap();
        let fit = fit_mle(&m, &s).unwrap();
        let g = posterior_grid(&m, &s, &pr, &fit, &GridConfig::default()).unwrap();
        (m, s, pr, g)
    }

    #[test]
    fn normalized_and_supported_below_minimum() {
        let (_, s, _, g) = setup(50, 1, "1/theta");
        assert!((g.total_mass() - 1.0).abs() < 1e-12);
        assert!(g.gamma_axis.nodes.iter().all(|&x| x <= s.min()));
        assert_eq!(g.pivot_cdf(Pivot::T, 0.0).unwrap().probability, 1.0);
        assert_eq!(g.pivot_cdf(Pivot::T, -1e6).unwrap().probability, 0.0);
    }

    #[test]
    fn gamma_marginal_matches_conjugate_form() {
        // Under π = 1/θ the γ-marginal is ∝ [Σ(xᵢ − γ)]^{−n} on γ ≤ x₍₁₎.
        let (_, s, _, g) = setup(40, 3, "1/theta");
        let n = s.n() as f64;
        let sum: f64 = s.values().iter().sum();
        let x1 = s.min();
        let cdf = |b: f64| {
            let tail = |y: f64| (sum - n * y).powf(1.0 - n) / (n * (n - 1.0));
            tail(b) / tail(x1)
        };
        let lo = g.gamma_axis.lo;
        let mut worst: f64 = 0.0;
        for k in 0..=50 {
            let b = lo + (x1 - lo) * k as f64 / 50.0;
            worst = worst.max((g.gamma_cdf(b) - cdf(b)).abs());
        }
        assert!(worst < 1e-5, "{worst}");
    }

    #[test]
    fn pivot_t_near_half_at_log_half() {
        let (_, _, _, g) = setup(400, 5, "1/theta");
        let p = g.pivot_cdf(Pivot::T, 0.5f64.ln()).unwrap().probability;
        assert!((p - 0.5).abs() < 10.0 / 400.0, "{p}");
        let q = g.pivot_quantile(Pivot::T, p).unwrap();
        assert!((q - 0.5f64.ln()).abs() < 1e-8);
        let u = g.pivot_cdf(Pivot::U(0), 0.0).unwrap().probability;
        assert!((u - 0.5).abs() < 3.0 / 20.0, "{u}");
    }

    #[test]
    fn posterior_mean_of_t_under_theta_prior() {
        let (_, s, _, g) = setup(200, 9, "theta");
        let (_, gamma_bar) = posterior_means(&g);
        assert!(gamma_bar < s.min());
        let n = 200.0;
        let et = n * g.mle.c_hat * (gamma_bar - g.mle.gamma_hat);
        assert!((et + 1.0).abs() < 5.0 / n, "{et}");
    }

    #[test]
    fn pivot_parsing() {
        assert_eq!(Pivot::parse("T").unwrap(), Pivot::T);
        assert_eq!(Pivot::parse("U:2").unwrap(), Pivot::U(1));
        assert!(Pivot::parse("U:0").is_err());
    }
}
