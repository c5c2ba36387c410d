//! Central finite differences for mixed partials of order <= 4.
//!
//! A mixed partial is given as a list of coordinate indices (repetition
//! allowed, order irrelevant). Each coordinate gets a second-order central
//! stencil of the right order; the tensor product is then refined by one
//! Richardson step, so the truncation error is O(h^4).

use crate::error::{Error, Result};

/// Relative step for a partial of total order `k` (before Richardson halving).
fn base_step(order: usize) -> f64 {
    match order {
        0 | 1 => 2e-3,
        2 => 4e-3,
        3 => 8e-3,
        _ => 1.5e-2,
    }
}

fn stencil(order: usize) -> &'static [(i32, f64)] {
    match order {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        4 => &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
        _ => unreachable!("orders above 4 are rejected earlier"),
    }
}

fn tensor_difference<F>(f: &F, x: &[f64], counts: &[usize], steps: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let active: Vec<usize> = (0..x.len()).filter(|&c| counts[c] > 0).collect();
    let stencils: Vec<&[(i32, f64)]> = active.iter().map(|&c| stencil(counts[c])).collect();
    let mut cursor = vec![0usize; active.len()];
    let mut point = x.to_vec();
    let mut total = 0.0;
    loop {
        let mut weight = 1.0;
        point.copy_from_slice(x);
        for (slot, &c) in active.iter().enumerate() {
            let (off, w) = stencils[slot][cursor[slot]];
            point[c] = x[c] + off as f64 * steps[c];
            weight *= w;
        }
        let value = f(&point)?;
        if !value.is_finite() {
            return Err(Error::Domain(format!("non-finite value at {point:?}")));
        }
        total += weight * value;

        let mut slot = 0;
        loop {
            if slot == active.len() {
                let scale: f64 = active
                    .iter()
                    .map(|&c| steps[c].powi(counts[c] as i32))
                    .product();
                return Ok(total / scale);
            }
            cursor[slot] += 1;
            if cursor[slot] < stencils[slot].len() {
                break;
            }
            cursor[slot] = 0;
            slot += 1;
        }
    }
}

/// Mixed partial of `f` at `x` along the coordinates listed in `index`.
///
/// Steps scale with `max(1, |x_c|)`. If a stencil point leaves the domain
/// (the closure errors or returns a non-finite value) all steps are halved
/// and the evaluation is retried.
pub fn partial<F>(f: F, x: &[f64], index: &[usize]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let scales: Vec<f64> = x.iter().map(|v| v.abs().max(1.0)).collect();
    partial_scaled(f, x, index, &scales)
}

/// Like [`partial`] with explicit per-coordinate step scales.
pub fn partial_scaled<F>(f: F, x: &[f64], index: &[usize], scales: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if index.len() > 4 {
        return Err(Error::Argument(format!(
            "finite differences support order <= 4, got {}",
            index.len()
        )));
    }
    if index.is_empty() {
        return f(x);
    }
    let mut counts = vec![0usize; x.len()];
    for &c in index {
        if c >= x.len() {
            return Err(Error::Argument(format!("coordinate {c} out of range")));
        }
        counts[c] += 1;
    }
    let tau = base_step(index.len());
    let mut steps: Vec<f64> = scales.iter().map(|s| tau * s).collect();
    let mut last_err = None;
    for _ in 0..24 {
        let coarse = tensor_difference(&f, x, &counts, &steps);
        let half: Vec<f64> = steps.iter().map(|h| 0.5 * h).collect();
        let fine = coarse.and_then(|c| tensor_difference(&f, x, &counts, &half).map(|h| (c, h)));
        match fine {
            Ok((c, h)) => return Ok((4.0 * h - c) / 3.0),
            Err(e) => {
                last_err = Some(e);
                steps = half;
            }
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Domain("finite difference failed".into())))
}

/// Gradient of `f` at `x`.
pub fn gradient<F>(f: F, x: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    (0..x.len()).map(|c| partial(&f, x, &[c])).collect()
}

/// Richardson-refined central difference of a vector-valued function along
/// one coordinate. Steps follow the same policy as [`partial`].
pub fn vector_derivative<F>(f: F, x: &[f64], coord: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if coord >= x.len() {
        return Err(Error::Argument(format!("coordinate {coord} out of range")));
    }
    let central = |h: f64| -> Result<Vec<f64>> {
        let mut lo = x.to_vec();
        let mut hi = x.to_vec();
        lo[coord] -= h;
        hi[coord] += h;
        let (a, b) = (f(&lo)?, f(&hi)?);
        if a.len() != b.len() || a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value near {x:?}")));
        }
        Ok(a.iter().zip(&b).map(|(a, b)| (b - a) / (2.0 * h)).collect())
    };
    let mut h = base_step(1) * x[coord].abs().max(1.0);
    let mut last_err = None;
    for _ in 0..24 {
        match central(h).and_then(|c| central(0.5 * h).map(|f| (c, f))) {
            Ok((c, f)) => return Ok(c.iter().zip(&f).map(|(c, f)| (4.0 * f - c) / 3.0).collect()),
            Err(e) => {
                last_err = Some(e);
                h *= 0.5;
            }
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Domain("finite difference failed".into())))
}
