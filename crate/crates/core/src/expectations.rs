//! Expectations over the truncated support and the moment tensors `A^(r,s)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelSpec, ParamPoint};
pub use crate::quadrature::{Estimate, QuadratureConfig, TailMap};
use crate::tensor;

/// `A^(r,s) = E[D_θ^{⊗r} ∂_γ^s log p]` as a flat `d^r` tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ATensor {
    pub r: usize,
    pub s: usize,
    pub d: usize,
    pub data: Vec<f64>,
    pub point: ParamPoint,
}

impl ATensor {
    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[tensor::flat_index(index, self.d)]
    }

    /// The single entry of an `r = 0` tensor.
    pub fn scalar(&self) -> f64 {
        self.data[0]
    }
}

/// `∫ f(x) p(x; θ, γ) dx` over `[γ, I₂)`.
pub fn expect<F: Fn(f64) -> f64>(
    model: &ModelSpec,
    p: &ParamPoint,
    integrand: F,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    let psi = model.psi_value(p)?;
    let family = model.family();
    model.integrate_support(
        |x| {
            let density = (family.log_q(x, &p.theta) - psi).exp();
            if density == 0.0 {
                0.0
            } else {
                integrand(x) * density
            }
        },
        p,
        cfg,
    )
}

fn check_order(model: &ModelSpec, r: usize, s: usize) -> Result<()> {
    if r + s > 4 {
        return Err(Error::Argument(format!(
            "A^({r},{s}) exceeds total order 4"
        )));
    }
    if model.dim() == 0 {
        return Err(Error::Argument("model has no regular parameter".into()));
    }
    Ok(())
}

/// Fills a symmetric tensor by computing one entry per sorted multi-index.
fn fill_symmetric<F>(d: usize, r: usize, mut entry: F) -> Result<Vec<f64>>
where
    F: FnMut(&[usize]) -> Result<f64>,
{
    let mut data = vec![f64::NAN; d.pow(r as u32)];
    for idx in tensor::multi_indices(d, r) {
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        let k = tensor::flat_index(&idx, d);
        if sorted == idx {
            data[k] = entry(&idx)?;
        }
    }
    for idx in tensor::multi_indices(d, r) {
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        if sorted != idx {
            data[tensor::flat_index(&idx, d)] = data[tensor::flat_index(&sorted, d)];
        }
    }
    Ok(data)
}

/// `A^(r,s)` at `p`.
///
/// Partials with `s ≥ 1` do not depend on x, and on an oTEF `D_θ^r log q`
/// vanishes for `r ≥ 2`; those entries are taken from ψ directly. Everything
/// else is integrated.
pub fn a_tensor(
    model: &ModelSpec,
    p: &ParamPoint,
    r: usize,
    s: usize,
    cfg: &QuadratureConfig,
) -> Result<ATensor> {
    check_order(model, r, s)?;
    model.check_point(p)?;
    let d = model.dim();
    let shortcut = s >= 1 || (model.is_otef() && r >= 2);
    let data = fill_symmetric(d, r, |idx| {
        let psi = model.psi_partial(p, idx, s)?;
        if shortcut {
            return Ok(-psi);
        }
        let est = expect(
            model,
            p,
            |x| model.log_q_partial(x, &p.theta, idx).unwrap_or(f64::NAN),
            cfg,
        )?;
        Ok(est.value - psi)
    })?;
    Ok(ATensor {
        r,
        s,
        d,
        data,
        point: p.clone(),
    })
}

/// `A^(r,s)` with every entry integrated against the density, no shortcuts.
pub fn a_tensor_quadrature(
    model: &ModelSpec,
    p: &ParamPoint,
    r: usize,
    s: usize,
    cfg: &QuadratureConfig,
) -> Result<ATensor> {
    check_order(model, r, s)?;
    model.check_point(p)?;
    let d = model.dim();
    let data = fill_symmetric(d, r, |idx| {
        let est = expect(
            model,
            p,
            |x| {
                if x > p.gamma {
                    model.log_density_partial(x, p, idx, s).unwrap_or(f64::NAN)
                } else {
                    model
                        .log_density_partial_right(x, p, idx, s)
                        .unwrap_or(f64::NAN)
                }
            },
            cfg,
        )?;
        Ok(est.value)
    })?;
    Ok(ATensor {
        r,
        s,
        d,
        data,
        point: p.clone(),
    })
}

/// `c = A^(0,1) = -∂_γ ψ`.
pub fn c_value(model: &ModelSpec, p: &ParamPoint) -> Result<f64> {
    Ok(-model.psi_partial(p, &[], 1)?)
}

/// `E[∂_i l ∂_j l ∂_k l]` for all regular indices, as a flat `d³` tensor.
pub fn score_triple(model: &ModelSpec, p: &ParamPoint, cfg: &QuadratureConfig) -> Result<Vec<f64>> {
    model.check_point(p)?;
    let d = model.dim();
    let scores = |x: f64| -> Vec<f64> {
        (0..d)
            .map(|i| {
                model
                    .log_density_partial_right(x, p, &[i], 0)
                    .unwrap_or(f64::NAN)
            })
            .collect()
    };
    fill_symmetric(d, 3, |idx| {
        let est = expect(
            model,
            p,
            |x| scores(x)[idx[0]] * scores(x)[idx[1]] * scores(x)[idx[2]],
            cfg,
        )?;
        Ok(est.value)
    })
}

/// `E[∂_j ∂_k l · ∂_i l]`, flat `d³` with index order `(j, k, i)`.
pub fn hessian_score(
    model: &ModelSpec,
    p: &ParamPoint,
    cfg: &QuadratureConfig,
) -> Result<Vec<f64>> {
    model.check_point(p)?;
    let d = model.dim();
    let mut data = vec![0.0; d * d * d];
    for j in 0..d {
        for k in j..d {
            for i in 0..d {
                let est = expect(
                    model,
                    p,
                    |x| {
                        let hjk = model
                            .log_density_partial_right(x, p, &[j, k], 0)
                            .unwrap_or(f64::NAN);
                        let si = model
                            .log_density_partial_right(x, p, &[i], 0)
                            .unwrap_or(f64::NAN);
                        hjk * si
                    },
                    cfg,
                )?;
                data[tensor::flat_index(&[j, k, i], d)] = est.value;
                data[tensor::flat_index(&[k, j, i], d)] = est.value;
            }
        }
    }
    Ok(data)
}
