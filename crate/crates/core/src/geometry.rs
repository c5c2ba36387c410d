//! Fisher metric, connections, the vector field χ, expectation parameters and
//! streamlines of χ.
//!
//! Coordinates are ordered `(θ¹, …, θᵈ, γ)`; index `d` is γ.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::diff;
use crate::error::{Error, Result};
use crate::expectations::{a_tensor, c_value, score_triple};
use crate::models::{tight, ModelSpec, ParamPoint};
use crate::priors::PriorSpec;

/// Metric and its first derivatives at a point.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub d: usize,
    pub g_theta: DMatrix<f64>,
    pub g_theta_inv: DMatrix<f64>,
    pub g_gammagamma: f64,
    /// `∂_a g_{bc}` over the full coordinates, flat `[a][b][c]`.
    pub dg: Vec<f64>,
}

impl MetricJet {
    fn dim(&self) -> usize {
        self.d + 1
    }

    /// Entry of the full block-diagonal metric.
    pub fn g(&self, a: usize, b: usize) -> f64 {
        let d = self.d;
        match (a == d, b == d) {
            (true, true) => self.g_gammagamma,
            (false, false) => self.g_theta[(a, b)],
            _ => 0.0,
        }
    }

    pub fn dg(&self, a: usize, b: usize, c: usize) -> f64 {
        let n = self.dim();
        self.dg[(a * n + b) * n + c]
    }

    /// `Γ^g_{ab,c} = ½(∂_a g_{bc} + ∂_b g_{ac} − ∂_c g_{ab})`.
    pub fn christoffel(&self, a: usize, b: usize, c: usize) -> f64 {
        0.5 * (self.dg(a, b, c) + self.dg(b, a, c) - self.dg(c, a, b))
    }

    /// `∂_a log det g_θ = tr(g_θ⁻¹ ∂_a g_θ)`.
    pub fn d_log_det_theta(&self, a: usize) -> f64 {
        let mut tr = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                tr += self.g_theta_inv[(i, j)] * self.dg(a, j, i);
            }
        }
        tr
    }

    pub fn d_log_gammagamma(&self, a: usize) -> f64 {
        self.dg(a, self.d, self.d) / self.g_gammagamma
    }

    /// `∂_a g^{ij} = −(g⁻¹ ∂_a g g⁻¹)^{ij}` on the regular block.
    pub fn d_inverse(&self, a: usize) -> DMatrix<f64> {
        let d = self.d;
        let da = DMatrix::from_fn(d, d, |i, j| self.dg(a, i, j));
        -(&self.g_theta_inv * da * &self.g_theta_inv)
    }
}

/// `g_θ = −A^(2,0)` and `g_γγ = c²` at `p`, with a positive-definiteness check.
pub fn metric(model: &ModelSpec, p: &ParamPoint) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
    let d = model.dim();
    let a20 = a_tensor(model, p, 2, 0, model.quadrature())?;
    let g = DMatrix::from_fn(d, d, |i, j| -a20.get(&[i, j]));
    let chol = g.clone().cholesky().ok_or_else(|| {
        Error::Geometry(format!(
            "g_theta is not positive definite at theta={:?}, gamma={}",
            p.theta, p.gamma
        ))
    })?;
    let inv = chol.inverse();
    let c = c_value(model, p)?;
    let ggg = c * c;
    if !(ggg > 0.0 && ggg.is_finite()) {
        return Err(Error::Geometry(format!(
            "g_gammagamma = {ggg} at gamma={}",
            p.gamma
        )));
    }
    Ok((g, inv, ggg))
}

/// Metric plus first derivatives of each metric component.
///
/// On an oTEF `g_θ = D²_θψ` and `c = −∂_γψ`, so the derivatives are third
/// partials of ψ. Other models fall back to central differences.
pub fn metric_jet(model: &ModelSpec, p: &ParamPoint) -> Result<MetricJet> {
    let (g, inv, ggg) = metric(model, p)?;
    let d = model.dim();
    let n = d + 1;
    if model.is_otef() {
        let c = c_value(model, p)?;
        let mut dg = vec![0.0; n * n * n];
        for a in 0..n {
            let (extra, s) = if a == d { (None, 1) } else { (Some(a), 0) };
            for i in 0..d {
                for j in i..d {
                    let idx: Vec<usize> = [i, j].into_iter().chain(extra).collect();
                    let v = model.psi_partial(p, &idx, s)?;
                    dg[(a * n + i) * n + j] = v;
                    dg[(a * n + j) * n + i] = v;
                }
            }
            let idx: Vec<usize> = extra.into_iter().collect();
            dg[(a * n + d) * n + d] = -2.0 * c * model.psi_partial(p, &idx, s + 1)?;
        }
        return Ok(MetricJet {
            d,
            g_theta: g,
            g_theta_inv: inv,
            g_gammagamma: ggg,
            dg,
        });
    }
    let fd_model = model.clone().with_quadrature(tight(model.quadrature()));
    let components = |coords: &[f64]| -> Result<Vec<f64>> {
        let q = ParamPoint::from_coords(coords);
        fd_model.check_point(&q)?;
        let a20 = a_tensor(&fd_model, &q, 2, 0, fd_model.quadrature())?;
        let c = c_value(&fd_model, &q)?;
        let mut out: Vec<f64> = a20.data.iter().map(|v| -v).collect();
        out.push(c * c);
        Ok(out)
    };
    let coords = p.coords();
    let mut dg = vec![0.0; n * n * n];
    for a in 0..n {
        let deriv = diff::vector_derivative(components, &coords, a)?;
        for i in 0..d {
            for j in 0..d {
                dg[(a * n + i) * n + j] = deriv[i * d + j];
            }
        }
        dg[(a * n + d) * n + d] = deriv[d * d];
    }
    Ok(MetricJet {
        d,
        g_theta: g,
        g_theta_inv: inv,
        g_gammagamma: ggg,
        dg,
    })
}

/// α-connection coefficients `Γ^α_{ij,k}` on the regular block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaConnection {
    pub alpha: f64,
    /// Flat `d³`, index order `(i, j, k)`.
    pub data: Vec<f64>,
}

/// Geometric quantities at one parameter point.
#[derive(Debug, Clone)]
pub struct GeometryAt {
    pub point: ParamPoint,
    pub g_theta: DMatrix<f64>,
    pub g_gammagamma: f64,
    pub g_theta_inv: DMatrix<f64>,
    /// `Γ^g_{ab,c}`, flat `(d+1)³` over `(θ, γ)` coordinates.
    pub gamma_christoffel: Vec<f64>,
    pub alpha_christoffel: Vec<AlphaConnection>,
    pub a11: Vec<f64>,
    pub a21: Vec<f64>,
    pub a30: Vec<f64>,
    pub a02: f64,
    pub c: f64,
}

impl GeometryAt {
    pub fn dim(&self) -> usize {
        self.g_theta.nrows()
    }

    pub fn christoffel(&self, a: usize, b: usize, c: usize) -> f64 {
        let n = self.dim() + 1;
        self.gamma_christoffel[(a * n + b) * n + c]
    }

    pub fn alpha_connection(&self, alpha: f64) -> Option<&[f64]> {
        self.alpha_christoffel
            .iter()
            .find(|a| a.alpha == alpha)
            .map(|a| a.data.as_slice())
    }

    /// Determinant of the full metric, `det g_θ · g_γγ`.
    pub fn det_g(&self) -> f64 {
        self.g_theta.determinant() * self.g_gammagamma
    }

    pub fn to_json(&self) -> Value {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| m.row(i).iter().copied().collect())
                .collect()
        };
        json!({
            "point": { "theta": self.point.theta, "gamma": self.point.gamma },
            "g_theta": rows(&self.g_theta),
            "g_gammagamma": self.g_gammagamma,
            "g_theta_inv": rows(&self.g_theta_inv),
            "gamma_christoffel": self.gamma_christoffel,
            "alpha_christoffel": self.alpha_christoffel,
            "a11": self.a11,
            "a21": self.a21,
            "a30": self.a30,
            "a02": self.a02,
            "c": self.c,
        })
    }
}

/// Default α list: Levi-Civita and the e-connection.
pub const DEFAULT_ALPHAS: [f64; 2] = [0.0, 1.0];

/// Every [`GeometryAt`] field at `p`.
///
/// `Γ^α_{ij,k} = Γ^g_{ij,k} − (α/2) E[∂ᵢl ∂ⱼl ∂ₖl]`.
pub fn geometry_at(model: &ModelSpec, p: &ParamPoint, alphas: &[f64]) -> Result<GeometryAt> {
    model.check_point(p)?;
    let jet = metric_jet(model, p)?;
    let d = model.dim();
    let n = d + 1;
    let mut lc = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                lc[(a * n + b) * n + c] = jet.christoffel(a, b, c);
            }
        }
    }
    let cfg = model.quadrature();
    let triple = if alphas.iter().any(|&a| a != 0.0) {
        score_triple(model, p, cfg)?
    } else {
        vec![0.0; d * d * d]
    };
    let alpha_christoffel = alphas
        .iter()
        .map(|&alpha| {
            let mut data = vec![0.0; d * d * d];
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        let flat = (i * d + j) * d + k;
                        data[flat] = jet.christoffel(i, j, k) - 0.5 * alpha * triple[flat];
                    }
                }
            }
            AlphaConnection { alpha, data }
        })
        .collect();
    Ok(GeometryAt {
        point: p.clone(),
        g_theta: jet.g_theta.clone(),
        g_gammagamma: jet.g_gammagamma,
        g_theta_inv: jet.g_theta_inv.clone(),
        gamma_christoffel: lc,
        alpha_christoffel,
        a11: a_tensor(model, p, 1, 1, cfg)?.data,
        a21: a_tensor(model, p, 2, 1, cfg)?.data,
        a30: a_tensor(model, p, 3, 0, cfg)?.data,
        a02: a_tensor(model, p, 0, 2, cfg)?.scalar(),
        c: c_value(model, p)?,
    })
}

/// A tangent vector `d_θ·∂_θ + d_γ ∂_γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub d_theta: Vec<f64>,
    pub d_gamma: f64,
}

/// `χ = ∂_γ + A_i^(1,1) g^{ij} ∂_j`.
pub fn chi_vector(model: &ModelSpec, p: &ParamPoint) -> Result<TangentVector> {
    let (_, inv, _) = metric(model, p)?;
    let a11 = a_tensor(model, p, 1, 1, model.quadrature())?;
    let d_theta = &inv * DVector::from_vec(a11.data);
    Ok(TangentVector {
        d_theta: d_theta.iter().copied().collect(),
        d_gamma: 1.0,
    })
}

/// `log e_{ρ,τ} = (ρ+½) log det g_θ + (τ+½) log g_γγ`.
pub fn log_extended_volume(model: &ModelSpec, p: &ParamPoint, rho: f64, tau: f64) -> Result<f64> {
    let (g, _, ggg) = metric(model, p)?;
    Ok((rho + 0.5) * g.determinant().ln() + (tau + 0.5) * ggg.ln())
}

/// The extended volume element `e_{ρ,τ} = (det g_θ)^{ρ+½} (g_γγ)^{τ+½}`.
pub fn extended_volume(model: &ModelSpec, p: &ParamPoint, rho: f64, tau: f64) -> Result<f64> {
    Ok(log_extended_volume(model, p, rho, tau)?.exp())
}

/// Which Lie-derivative form of the γ matching conditions to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LieKind {
    /// `L_χ{log π − log det g_θ − ½ log g_γγ}`.
    PmGammaLie,
    /// `L_χ{log π − ½ log det g_θ − log g_γγ}`.
    MmGammaLie,
}

impl LieKind {
    fn weights(self) -> (f64, f64) {
        match self {
            LieKind::PmGammaLie => (1.0, 0.5),
            LieKind::MmGammaLie => (0.5, 1.0),
        }
    }
}

/// Lie derivative along χ of the log-prior minus the volume terms of `kind`.
/// Only defined on an oTEF.
pub fn lie_residual(
    model: &ModelSpec,
    p: &ParamPoint,
    prior: &PriorSpec,
    kind: LieKind,
) -> Result<f64> {
    if !model.is_otef() {
        return Err(Error::Unsupported(format!(
            "the Lie form holds on an oTEF; {} is not one",
            model.name()
        )));
    }
    let jet = metric_jet(model, p)?;
    let a11 = a_tensor(model, p, 1, 1, model.quadrature())?;
    let chi = &jet.g_theta_inv * DVector::from_vec(a11.data);
    let grad = prior.grad_log_pi(p)?;
    let (w_det, w_gg) = kind.weights();
    let d = model.dim();
    let df = |a: usize| grad[a] - w_det * jet.d_log_det_theta(a) - w_gg * jet.d_log_gammagamma(a);
    Ok(df(d) + (0..d).map(|i| chi[i] * df(i)).sum::<f64>())
}

/// Expectation parameters `η = D_θψ`.
pub fn eta_forward(model: &ModelSpec, p: &ParamPoint) -> Result<Vec<f64>> {
    model.eta(p)
}

/// `∂η_i/∂θ^j` by central differences of η.
fn eta_jacobian(model: &ModelSpec, p: &ParamPoint) -> Result<DMatrix<f64>> {
    let d = model.dim();
    let gamma = p.gamma;
    let f = |t: &[f64]| model.eta(&ParamPoint::new(t.to_vec(), gamma));
    let mut jac = DMatrix::zeros(d, d);
    for j in 0..d {
        let col = diff::vector_derivative(f, &p.theta, j)?;
        for i in 0..d {
            jac[(i, j)] = col[i];
        }
    }
    Ok(jac)
}

/// θ with `η(θ, γ) = eta`, by damped Newton on the residual norm.
pub fn eta_inverse(
    model: &ModelSpec,
    eta: &[f64],
    gamma: f64,
    start: Option<&[f64]>,
) -> Result<ParamPoint> {
    if !model.is_otef() {
        return Err(Error::Unsupported(format!(
            "{} is not an oTEF",
            model.name()
        )));
    }
    let d = model.dim();
    if eta.len() != d {
        return Err(Error::Argument(format!(
            "eta has length {}, expected {d}",
            eta.len()
        )));
    }
    if model.family().eta_image_contains(eta, gamma) == Some(false) {
        return Err(Error::Inversion(format!(
            "(eta={eta:?}, gamma={gamma}) is outside the image H"
        )));
    }
    let mut theta = start.map_or_else(|| model.family().reference_theta(), <[f64]>::to_vec);
    let mut p = ParamPoint::new(theta.clone(), gamma);
    model
        .check_point(&p)
        .map_err(|e| Error::Inversion(format!("start point invalid: {e}")))?;
    let target = DVector::from_column_slice(eta);
    let residual =
        |p: &ParamPoint| -> Result<DVector<f64>> { Ok(DVector::from_vec(model.eta(p)?) - &target) };
    let tol = 1e-12 * (1.0 + target.norm());
    let mut r = residual(&p)?;
    for _ in 0..100 {
        if r.norm() <= tol {
            return Ok(p);
        }
        let jac = eta_jacobian(model, &p).map_err(|e| Error::Inversion(e.to_string()))?;
        let step = jac
            .lu()
            .solve(&(-&r))
            .ok_or_else(|| Error::Inversion("singular Jacobian".into()))?;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = theta
                .iter()
                .zip(step.iter())
                .map(|(t, s)| t + scale * s)
                .collect();
            let q = ParamPoint::new(trial.clone(), gamma);
            if model.is_valid(&q) {
                if let Ok(rq) = residual(&q) {
                    if rq.norm() < r.norm() {
                        theta = trial;
                        p = q;
                        r = rq;
                        accepted = true;
                        break;
                    }
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            if r.norm() <= 1e-9 * (1.0 + target.norm()) {
                return Ok(p);
            }
            return Err(Error::Inversion(format!(
                "Newton stalled with residual {:e}",
                r.norm()
            )));
        }
    }
    if r.norm() <= 1e-9 * (1.0 + target.norm()) {
        return Ok(p);
    }
    Err(Error::Inversion(format!(
        "no convergence after 100 iterations, residual {:e}",
        r.norm()
    )))
}

/// How a streamline trace ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamlineStatus {
    Completed,
    ExitedDomain,
}

impl StreamlineStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            StreamlineStatus::Completed => "completed",
            StreamlineStatus::ExitedDomain => "exited_domain",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamlineNode {
    pub s: f64,
    pub point: ParamPoint,
    pub eta: Vec<f64>,
}

/// RK4 trace of `d(θ, γ)/ds = χ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Streamline {
    pub points: Vec<StreamlineNode>,
    pub status: StreamlineStatus,
}

impl Streamline {
    /// Largest `|η(s) − η(0)|` over all nodes and components.
    pub fn eta_drift(&self) -> f64 {
        let first = &self.points[0].eta;
        self.points
            .iter()
            .flat_map(|n| n.eta.iter().zip(first).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    pub fn last(&self) -> &StreamlineNode {
        self.points
            .last()
            .expect("a streamline has at least its start")
    }

    /// CSV with columns `s, theta_1..theta_d, gamma, eta_1..eta_d, status`.
    /// Each `metadata` line is written first, prefixed with `# `.
    pub fn to_csv(&self, metadata: &[String]) -> String {
        let d = self.points[0].point.theta.len();
        let mut out = String::new();
        for line in metadata {
            let _ = writeln!(out, "# {line}");
        }
        let mut header = vec!["s".to_string()];
        header.extend((1..=d).map(|i| format!("theta_{i}")));
        header.push("gamma".into());
        header.extend((1..=d).map(|i| format!("eta_{i}")));
        header.push("status".into());
        let _ = writeln!(out, "{}", header.join(","));
        let last = self.points.len() - 1;
        for (k, node) in self.points.iter().enumerate() {
            let mut row = vec![format!("{:.16e}", node.s)];
            row.extend(node.point.theta.iter().map(|v| format!("{v:.16e}")));
            row.push(format!("{:.16e}", node.point.gamma));
            row.extend(node.eta.iter().map(|v| format!("{v:.16e}")));
            row.push(
                if k == last {
                    self.status.as_str()
                } else {
                    "ok"
                }
                .into(),
            );
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// Default RK4 step.
pub const DEFAULT_STREAMLINE_STEP: f64 = 1e-3;

/// Integrates χ from `start` for arc length `s_max` with fixed RK4 steps.
/// Stops early, with [`StreamlineStatus::ExitedDomain`], when a stage leaves
/// the parameter space.
pub fn trace_streamline(
    model: &ModelSpec,
    start: &ParamPoint,
    s_max: f64,
    step: f64,
) -> Result<Streamline> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Argument(format!(
            "streamline step must be positive, got {step}"
        )));
    }
    if !(s_max >= 0.0 && s_max.is_finite()) {
        return Err(Error::Argument(format!(
            "s_max must be finite and >= 0, got {s_max}"
        )));
    }
    if !model.is_otef() {
        return Err(Error::Unsupported(format!(
            "{} is not an oTEF",
            model.name()
        )));
    }
    model.check_point(start)?;
    let field = |y: &[f64]| -> Result<Vec<f64>> {
        let p = ParamPoint::from_coords(y);
        model.check_point(&p)?;
        let chi = chi_vector(model, &p)?;
        let mut v = chi.d_theta;
        v.push(chi.d_gamma);
        Ok(v)
    };
    let node = |s: f64, y: &[f64]| -> Result<StreamlineNode> {
        let point = ParamPoint::from_coords(y);
        let eta = model.eta(&point)?;
        Ok(StreamlineNode { s, point, eta })
    };
    let mut y = start.coords();
    let mut s = 0.0;
    let mut points = vec![node(0.0, &y)?];
    let mut status = StreamlineStatus::Completed;
    let axpy = |y: &[f64], h: f64, k: &[f64]| -> Vec<f64> {
        y.iter().zip(k).map(|(a, b)| a + h * b).collect()
    };
    while s < s_max {
        let h = step.min(s_max - s);
        let stage = || -> Result<Vec<f64>> {
            let k1 = field(&y)?;
            let k2 = field(&axpy(&y, 0.5 * h, &k1))?;
            let k3 = field(&axpy(&y, 0.5 * h, &k2))?;
            let k4 = field(&axpy(&y, h, &k3))?;
            let next: Vec<f64> = (0..y.len())
                .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect();
            model.check_point(&ParamPoint::from_coords(&next))?;
            Ok(next)
        };
        match stage() {
            Ok(next) => {
                y = next;
                // Snap to s_max to avoid an extra sliver step from rounding.
                s = if s_max - (s + h) <= 1e-12 * step {
                    s_max
                } else {
                    s + h
                };
                points.push(node(s, &y)?);
            }
            Err(Error::Domain(_) | Error::Geometry(_) | Error::Normalization(_)) => {
                if points.len() == 1 && s_max > 0.0 {
                    return Err(Error::Domain(
                        "streamline leaves the parameter space on its first step".into(),
                    ));
                }
                status = StreamlineStatus::ExitedDomain;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Streamline { points, status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::inv_mills;

    fn texp(theta: f64, gamma: f64) -> (ModelSpec, ParamPoint) {
        (ModelSpec::trunc_exp(), ParamPoint::new(vec![theta], gamma))
    }

    #[test]
    fn trunc_exp_metric_and_connections() {
        let (m, p) = texp(2.0, 0.0);
        let geo = geometry_at(&m, &p, &[0.0, 1.0, -1.0]).unwrap();
        assert!((geo.g_theta[(0, 0)] - 0.25).abs() < 1e-12);
        assert!((geo.g_gammagamma - 4.0).abs() < 1e-12);
        for alpha in [0.0, 1.0, -1.0] {
            let got = geo.alpha_connection(alpha).unwrap()[0];
            let want = -(1.0 - alpha) / 8.0;
            assert!((got - want).abs() < 1e-7, "alpha {alpha}: {got} vs {want}");
        }
        assert!((geo.det_g() - 1.0).abs() < 1e-12);
        assert!(geo.to_json()["g_theta"][0][0].as_f64().unwrap() - 0.25 < 1e-12);
    }

    #[test]
    fn christoffel_symmetric_in_first_pair() {
        let m = ModelSpec::trunc_normal_natural();
        let p = ParamPoint::new(vec![0.3, -0.6], 0.2);
        let geo = geometry_at(&m, &p, &[]).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    assert!((geo.christoffel(a, b, c) - geo.christoffel(b, a, c)).abs() < 1e-12);
                }
            }
        }
        let id = &geo.g_theta * &geo.g_theta_inv;
        assert!((id - DMatrix::identity(2, 2)).abs().max() < 1e-10);
    }

    #[test]
    fn trunc_normal_g_gammagamma() {
        let m = ModelSpec::trunc_normal_natural();
        let p = ParamPoint::new(vec![0.0, -0.5], 0.0);
        let (_, _, ggg) = metric(&m, &p).unwrap();
        // c = p(γ) = 2φ(0) and ∂_γν = 1 here
        assert!((ggg - inv_mills(0.0).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn chi_examples() {
        let (m, p) = texp(2.0, 0.0);
        let chi = chi_vector(&m, &p).unwrap();
        assert!((chi.d_theta[0] - 4.0).abs() < 1e-12);
        assert_eq!(chi.d_gamma, 1.0);

        let fixed = ModelSpec::trunc_normal_fixed_scale(-0.5).unwrap();
        let chi = chi_vector(&fixed, &ParamPoint::new(vec![0.0], 0.0)).unwrap();
        let psi2 = -inv_mills(0.0).powi(2);
        assert!((chi.d_theta[0] - psi2 / (1.0 + psi2)).abs() < 1e-10);
    }

    #[test]
    fn extended_volume_examples() {
        let (m, p) = texp(3.0, 1.0);
        assert!((extended_volume(&m, &p, 0.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((extended_volume(&m, &p, 0.5, 0.0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((extended_volume(&m, &p, 0.0, 0.5).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eta_round_trip_and_image() {
        let (m, _) = texp(1.0, 0.0);
        let p = eta_inverse(&m, &[0.5], 0.0, None).unwrap();
        assert!((p.theta[0] - 2.0).abs() < 1e-10);
        assert!(matches!(
            eta_inverse(&m, &[0.5], 0.6, None),
            Err(Error::Inversion(_))
        ));

        let n = ModelSpec::trunc_normal_natural();
        let q = ParamPoint::new(vec![0.7, -0.9], -0.4);
        let eta = eta_forward(&n, &q).unwrap();
        let back = eta_inverse(&n, &eta, q.gamma, None).unwrap();
        for (a, b) in back.theta.iter().zip(&q.theta) {
            assert!((a - b).abs() < 1e-10, "{back:?}");
        }
    }

    #[test]
    fn streamline_follows_analytic_flow() {
        let (m, p) = texp(1.0, 0.0);
        let line = trace_streamline(&m, &p, 0.5, DEFAULT_STREAMLINE_STEP).unwrap();
        let last = line.last();
        assert_eq!(line.status, StreamlineStatus::Completed);
        assert!((last.s - 0.5).abs() < 1e-12);
        assert!((last.point.theta[0] - 2.0).abs() < 1e-9);
        assert!((last.point.gamma - 0.5).abs() < 1e-12);
        assert!(line.eta_drift() < 1e-6);

        let zero = trace_streamline(&m, &p, 0.0, 1e-3).unwrap();
        assert_eq!(zero.points.len(), 1);
        assert!(trace_streamline(&m, &p, 1.0, 0.0).is_err());

        // θ(s) = 1/(1-s) blows up at s = 1.
        let out = trace_streamline(&m, &p, 2.0, 0.01).unwrap();
        assert_eq!(out.status, StreamlineStatus::ExitedDomain);
        let csv = out.to_csv(&["tool".into()]);
        assert!(csv.starts_with("# tool\ns,theta_1,gamma,eta_1,status\n"));
        assert!(csv.trim_end().ends_with("exited_domain"));
    }

    #[test]
    fn lie_rejects_non_otef() {
        let m = ModelSpec::trunc_normal_meansd();
        let p = ParamPoint::new(vec![0.0, 1.0], 0.0);
        let prior = PriorSpec::jeffreys(&m);
        assert!(matches!(
            lie_residual(&m, &p, &prior, LieKind::PmGammaLie),
            Err(Error::Unsupported(_))
        ));
    }
}
