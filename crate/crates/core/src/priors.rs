//! Priors over `(θ, γ)` and the matching-condition residuals.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::diff;
use crate::error::{Error, Result};
use crate::expectations::{a_tensor, c_value, score_triple};
use crate::expr::{Expr, Vars};
use crate::geometry::{eta_inverse, log_extended_volume, metric_jet, MetricJet};
use crate::models::{tight, ModelSpec, ParamPoint};

type LogFn = Arc<dyn Fn(&ParamPoint) -> Result<f64> + Send + Sync>;
type GradFn = Arc<dyn Fn(&ParamPoint) -> Result<Vec<f64>> + Send + Sync>;

/// How a prior was constructed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorTag {
    AlphaParallel { alpha: f64 },
    ExtendedVolume { rho: f64, tau: f64 },
    Jeffreys,
    Custom { name: String },
}

impl fmt::Display for PriorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorTag::AlphaParallel { alpha } => write!(f, "alpha_parallel:{alpha}"),
            PriorTag::ExtendedVolume { rho, tau } => write!(f, "extended_volume:{rho},{tau}"),
            PriorTag::Jeffreys => write!(f, "jeffreys"),
            PriorTag::Custom { name } => write!(f, "{name}"),
        }
    }
}

/// A prior density given through `log π`, with an optional closed gradient.
#[derive(Clone)]
pub struct PriorSpec {
    tag: PriorTag,
    log_pi: LogFn,
    grad: Option<GradFn>,
}

impl fmt::Debug for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PriorSpec")
            .field("tag", &self.tag)
            .field("closed_gradient", &self.grad.is_some())
            .finish()
    }
}

impl PriorSpec {
    pub fn custom<F>(name: impl Into<String>, log_pi: F) -> Self
    where
        F: Fn(&ParamPoint) -> Result<f64> + Send + Sync + 'static,
    {
        Self {
            tag: PriorTag::Custom { name: name.into() },
            log_pi: Arc::new(log_pi),
            grad: None,
        }
    }

    /// Attaches a closed-form gradient `(∂_θ log π, ∂_γ log π)`, flattened.
    pub fn with_gradient<G>(mut self, grad: G) -> Self
    where
        G: Fn(&ParamPoint) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        self.grad = Some(Arc::new(grad));
        self
    }

    /// `π ≡ 1`.
    pub fn flat() -> Self {
        Self::custom("flat", |_| Ok(0.0)).with_gradient(|p| Ok(vec![0.0; p.theta.len() + 1]))
    }

    /// A prior density `π(θ, γ)` written as an expression in `theta`, `theta_k` and `gamma`.
    pub fn from_expr(source: &str, d: usize) -> Result<Self> {
        let expr = Expr::parse(source)?;
        expr.check_scope(d, false)?;
        let name = source.trim().to_string();
        Ok(Self::custom(name, move |p| {
            let v = expr.eval(Vars {
                theta: &p.theta,
                gamma: p.gamma,
                x: f64::NAN,
            });
            if v > 0.0 && v.is_finite() {
                Ok(v.ln())
            } else {
                Err(Error::Domain(format!(
                    "prior `{}` is {v} at theta={:?}, gamma={}",
                    expr.source(),
                    p.theta,
                    p.gamma
                )))
            }
        }))
    }

    /// `e_{ρ,τ} = (det g_θ)^{ρ+½} (g_γγ)^{τ+½}`.
    pub fn extended_volume(model: &ModelSpec, rho: f64, tau: f64) -> Self {
        let m = model.clone().with_quadrature(tight(model.quadrature()));
        Self {
            tag: PriorTag::ExtendedVolume { rho, tau },
            log_pi: Arc::new(move |p| log_extended_volume(&m, p, rho, tau)),
            grad: None,
        }
    }

    /// Jeffreys prior `√det g = e_{0,0}`.
    pub fn jeffreys(model: &ModelSpec) -> Self {
        let mut prior = Self::extended_volume(model, 0.0, 0.0);
        prior.tag = PriorTag::Jeffreys;
        prior
    }

    /// α-parallel prior `e_{0,α/2}`; defined on an oTEF only.
    pub fn alpha_parallel(model: &ModelSpec, alpha: f64) -> Result<Self> {
        if !model.is_otef() {
            return Err(Error::Unsupported(format!(
                "alpha-parallel priors are defined on an oTEF; {} is not one",
                model.name()
            )));
        }
        let mut prior = Self::extended_volume(model, 0.0, 0.5 * alpha);
        prior.tag = PriorTag::AlphaParallel { alpha };
        Ok(prior)
    }

    /// Resolves `jeffreys`, `flat`, `alpha_parallel:<α>`, `extended_volume:<ρ>,<τ>`,
    /// or otherwise treats `spec` as a prior-density expression.
    pub fn parse(spec: &str, model: &ModelSpec) -> Result<Self> {
        let s = spec.trim();
        let number = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number `{v}` in prior `{spec}`")))
        };
        if s == "jeffreys" {
            return Ok(Self::jeffreys(model));
        }
        if s == "flat" {
            return Ok(Self::flat());
        }
        if let Some(rest) = s.strip_prefix("alpha_parallel:") {
            return Self::alpha_parallel(model, number(rest)?);
        }
        if let Some(rest) = s.strip_prefix("extended_volume:") {
            let (r, t) = rest.split_once(',').ok_or_else(|| {
                Error::Config(format!("extended_volume needs `rho,tau`, got `{rest}`"))
            })?;
            return Ok(Self::extended_volume(model, number(r)?, number(t)?));
        }
        Self::from_expr(s, model.dim())
    }

    pub fn tag(&self) -> &PriorTag {
        &self.tag
    }

    pub fn name(&self) -> String {
        self.tag.to_string()
    }

    pub fn log_pi(&self, p: &ParamPoint) -> Result<f64> {
        let v = (self.log_pi)(p)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain(format!(
                "log prior is {v} at theta={:?}, gamma={}",
                p.theta, p.gamma
            )))
        }
    }

    /// `(∂_θ log π, ∂_γ log π)` flattened to length `d + 1`; central
    /// differences when no closed form was attached.
    pub fn grad_log_pi(&self, p: &ParamPoint) -> Result<Vec<f64>> {
        if let Some(g) = &self.grad {
            return g(p);
        }
        diff::gradient(|c| self.log_pi(&ParamPoint::from_coords(c)), &p.coords())
    }

    pub fn has_closed_gradient(&self) -> bool {
        self.grad.is_some()
    }
}

/// The prior `γ ↦ e_{ρ,τ}(θ(η₀, γ), γ)` on the fixed-η submodel through `eta0`.
/// As a prior on `(θ, γ)` it ignores θ.
pub fn submodel_prior(model: &ModelSpec, eta0: Vec<f64>, rho: f64, tau: f64) -> Result<PriorSpec> {
    if !model.is_otef() {
        return Err(Error::Unsupported(format!(
            "{} is not an oTEF",
            model.name()
        )));
    }
    let m = model.clone().with_quadrature(tight(model.quadrature()));
    let name = format!("submodel_e:{rho},{tau}");
    let log_pi = move |p: &ParamPoint| -> Result<f64> {
        let q = eta_inverse(&m, &eta0, p.gamma, Some(&p.theta))
            .or_else(|_| eta_inverse(&m, &eta0, p.gamma, None))?;
        log_extended_volume(&m, &q, rho, tau)
    };
    let log_pi = Arc::new(log_pi);
    let for_grad = Arc::clone(&log_pi);
    Ok(PriorSpec {
        tag: PriorTag::Custom { name },
        log_pi,
        grad: None,
    }
    .with_gradient(move |p| {
        let d = p.theta.len();
        let theta = p.theta.clone();
        let dg = diff::partial(
            |g| for_grad(&ParamPoint::new(theta.clone(), g[0])),
            &[p.gamma],
            &[0],
        )?;
        let mut out = vec![0.0; d];
        out.push(dg);
        Ok(out)
    }))
}

/// One of the four matching conditions. Regular indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum MatchingCondition {
    PmGamma,
    PmTheta(usize),
    MmGamma,
    MmTheta(usize),
}

impl MatchingCondition {
    /// Parses `pm_gamma`, `mm_gamma`, `pm_theta`, `mm_theta` (index 1) or
    /// `pm_theta:<i>` / `mm_theta:<i>` with a one-based `i`.
    pub fn parse(s: &str) -> Result<Self> {
        let (head, idx) = match s.split_once(':') {
            Some((h, i)) => {
                let i: usize = i
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad condition index in `{s}`")))?;
                if i == 0 {
                    return Err(Error::Config("condition indices are one-based".into()));
                }
                (h, i - 1)
            }
            None => (s, 0),
        };
        match head.trim() {
            "pm_gamma" => Ok(Self::PmGamma),
            "mm_gamma" => Ok(Self::MmGamma),
            "pm_theta" => Ok(Self::PmTheta(idx)),
            "mm_theta" => Ok(Self::MmTheta(idx)),
            other => Err(Error::Config(format!("unknown condition `{other}`"))),
        }
    }

    fn check(self, d: usize) -> Result<()> {
        match self {
            Self::PmTheta(i) | Self::MmTheta(i) if i >= d => Err(Error::Argument(format!(
                "condition index {} exceeds d = {d}",
                i + 1
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for MatchingCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PmGamma => write!(f, "pm_gamma"),
            Self::MmGamma => write!(f, "mm_gamma"),
            Self::PmTheta(i) => write!(f, "pm_theta:{}", i + 1),
            Self::MmTheta(i) => write!(f, "mm_theta:{}", i + 1),
        }
    }
}

/// Coefficients shared by the residuals at one point.
struct Coefficients {
    jet: MetricJet,
    a11: Vec<f64>,
    c: f64,
    /// `∂_a A_j^(1,1)`, flat `[a][j]` over all `d + 1` coordinates.
    da11: Vec<f64>,
    /// `∂_a log c`.
    dlogc: Vec<f64>,
}

fn coefficients(model: &ModelSpec, p: &ParamPoint) -> Result<Coefficients> {
    model.check_point(p)?;
    let jet = metric_jet(model, p)?;
    let d = model.dim();
    let a11 = a_tensor(model, p, 1, 1, model.quadrature())?.data;
    let c = c_value(model, p)?;
    let fd_model = model.clone().with_quadrature(tight(model.quadrature()));
    let fields = |coords: &[f64]| -> Result<Vec<f64>> {
        let q = ParamPoint::from_coords(coords);
        fd_model.check_point(&q)?;
        let mut v = a_tensor(&fd_model, &q, 1, 1, fd_model.quadrature())?.data;
        v.push(c_value(&fd_model, &q)?.ln());
        Ok(v)
    };
    let coords = p.coords();
    let mut da11 = vec![0.0; (d + 1) * d];
    let mut dlogc = vec![0.0; d + 1];
    for a in 0..=d {
        let v = diff::vector_derivative(fields, &coords, a)?;
        da11[a * d..(a + 1) * d].copy_from_slice(&v[..d]);
        dlogc[a] = v[d];
    }
    Ok(Coefficients {
        jet,
        a11,
        c,
        da11,
        dlogc,
    })
}

/// Right-hand side of the probability-matching γ condition, by the
/// divergence form `−c[∂_γ(1/c) + D_θᵀ((1/c) g_θ⁻¹ A^(1,1))]`.
fn pm_gamma_rhs_divergence(model: &ModelSpec, p: &ParamPoint) -> Result<f64> {
    let d = model.dim();
    let fd_model = model.clone().with_quadrature(tight(model.quadrature()));
    let field = |coords: &[f64]| -> Result<Vec<f64>> {
        let q = ParamPoint::from_coords(coords);
        fd_model.check_point(&q)?;
        let jet_inv = crate::geometry::metric(&fd_model, &q)?.1;
        let a11 = a_tensor(&fd_model, &q, 1, 1, fd_model.quadrature())?.data;
        let c = c_value(&fd_model, &q)?;
        let v = jet_inv * DVector::from_vec(a11) / c;
        let mut out: Vec<f64> = v.iter().copied().collect();
        out.push(1.0 / c);
        Ok(out)
    };
    let coords = p.coords();
    let mut div = 0.0;
    for i in 0..d {
        div += diff::vector_derivative(field, &coords, i)?[i];
    }
    let d_inv_c = diff::vector_derivative(field, &coords, d)?[d];
    let c = c_value(model, p)?;
    Ok(-c * (d_inv_c + div))
}

/// `LHS − RHS` of the chosen matching condition at `p`.
///
/// For the probability-matching γ condition the connection term enters as
/// `+ A_j g^{jm} g^{ik}(Γ_{ik,m} − Γ_{km,i})`, which is the sign that makes
/// the expanded equation agree with its divergence form. The value is cross-
/// checked against that divergence form and a geometry error is raised if the
/// two disagree.
pub fn matching_residual(
    model: &ModelSpec,
    p: &ParamPoint,
    prior: &PriorSpec,
    cond: MatchingCondition,
) -> Result<f64> {
    let d = model.dim();
    cond.check(d)?;
    let k = coefficients(model, p)?;
    let grad = prior.grad_log_pi(p)?;
    let ginv = &k.jet.g_theta_inv;
    // χ_j = A_i g^{ij}
    let chi: Vec<f64> = (0..d)
        .map(|j| (0..d).map(|i| k.a11[i] * ginv[(i, j)]).sum())
        .collect();
    match cond {
        MatchingCondition::PmGamma => {
            let lhs = grad[d] + (0..d).map(|j| chi[j] * grad[j]).sum::<f64>();
            let mut rhs = k.dlogc[d];
            for i in 0..d {
                for j in 0..d {
                    rhs -= k.da11[i * d + j] * ginv[(i, j)];
                }
            }
            let mut gamma_term_a = 0.0;
            let mut gamma_term_b = 0.0;
            for m in 0..d {
                // g^{ik}(Γ_{ik,m} − Γ_{km,i}) and the alternative contraction (Γ_{ak,m} − Γ_{km,a})g^{ka}
                let mut inner_a = 0.0;
                let mut inner_b = 0.0;
                for i in 0..d {
                    for kk in 0..d {
                        inner_a += ginv[(i, kk)]
                            * (k.jet.christoffel(i, kk, m) - k.jet.christoffel(kk, m, i));
                        inner_b += ginv[(kk, i)]
                            * (k.jet.christoffel(i, kk, m) - k.jet.christoffel(kk, m, i));
                    }
                }
                rhs += chi[m] * (k.dlogc[m] + k.jet.d_log_det_theta(m) + inner_a);
                gamma_term_a += chi[m] * inner_a;
                gamma_term_b += chi[m] * inner_b;
            }
            let divergence = pm_gamma_rhs_divergence(model, p)?;
            let scale = 1.0 + rhs.abs() + divergence.abs();
            if (gamma_term_a - gamma_term_b).abs() > 1e-8 * scale
                || (rhs - divergence).abs() > 1e-5 * scale
            {
                return Err(Error::Geometry(format!(
                    "connection-term readings disagree at theta={:?}, gamma={}: expanded {rhs}, divergence {divergence}",
                    p.theta, p.gamma
                )));
            }
            Ok(lhs - rhs)
        }
        MatchingCondition::PmTheta(i) => {
            let gii = ginv[(i, i)];
            if !(gii > 0.0) {
                return Err(Error::Geometry(format!("g^ii = {gii} is not positive")));
            }
            let root = gii.sqrt();
            let lhs = (0..d).map(|j| ginv[(i, j)] / root * grad[j]).sum::<f64>();
            let mut div = 0.0;
            for j in 0..d {
                let dinv = k.jet.d_inverse(j);
                div += dinv[(i, j)] / root - 0.5 * ginv[(i, j)] * dinv[(i, i)] / (gii * root);
            }
            Ok(lhs + div)
        }
        MatchingCondition::MmGamma => {
            let a21 = a_tensor(model, p, 2, 1, model.quadrature())?.data;
            let a30 = a_tensor(model, p, 3, 0, model.quadrature())?.data;
            let mut value = grad[d] - 2.0 * k.dlogc[d];
            for i in 0..d {
                for j in 0..d {
                    value += 0.5 * a21[i * d + j] * ginv[(i, j)];
                }
            }
            for j in 0..d {
                let mut contraction = 0.0;
                for kk in 0..d {
                    for m in 0..d {
                        contraction += a30[(j * d + kk) * d + m] * ginv[(kk, m)];
                    }
                }
                value += chi[j] * (grad[j] - 2.0 * k.dlogc[j] + 0.5 * contraction);
            }
            Ok(value)
        }
        MatchingCondition::MmTheta(i) => {
            let triple = score_triple(model, p, model.quadrature())?;
            // ∂_i log π_J with π_J = √det g_θ · |c|
            let dlog_jeffreys = 0.5 * k.jet.d_log_det_theta(i) + k.dlogc[i];
            let mut gamma_e = 0.0;
            for j in 0..d {
                for kk in 0..d {
                    let e = k.jet.christoffel(j, kk, i) - 0.5 * triple[(j * d + kk) * d + i];
                    gamma_e += e * ginv[(j, kk)];
                }
            }
            Ok(grad[i] - dlog_jeffreys - 0.5 * gamma_e)
        }
    }
}

/// `c` and the identities `A^(0,2) = ∂_γ c`, `A_i^(1,1) = ∂_i c` at `p`.
/// Returns the largest absolute discrepancy.
pub fn c_identity_gap(model: &ModelSpec, p: &ParamPoint) -> Result<f64> {
    let d = model.dim();
    let k = coefficients(model, p)?;
    let a02 = a_tensor(model, p, 0, 2, model.quadrature())?.scalar();
    let mut gap = (k.dlogc[d] * k.c - a02).abs();
    for i in 0..d {
        gap = gap.max((k.dlogc[i] * k.c - k.a11[i]).abs());
    }
    Ok(gap)
}
