//! Flat Kronecker-order tensors over `R^d`.
//!
//! A rank-`r` tensor is stored as `d^r` entries in row-major multi-index
//! order, the same layout as `v₁ ⊗ … ⊗ v_r` for column vectors. All tensors
//! used by the posterior expansion are symmetric, so row- and column-major
//! `vec` orderings coincide for them.

use crate::error::{Error, Result};

pub fn flat_index(index: &[usize], d: usize) -> usize {
    index.iter().fold(0, |acc, &i| acc * d + i)
}

pub fn multi_index(mut flat: usize, d: usize, r: usize) -> Vec<usize> {
    let mut out = vec![0; r];
    for slot in (0..r).rev() {
        out[slot] = flat % d;
        flat /= d;
    }
    out
}

/// Iterator over all multi-indices of length `r` in row-major order.
pub fn multi_indices(d: usize, r: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..d.pow(r as u32)).map(move |k| multi_index(k, d, r))
}

fn permutations(r: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(r), &mut vec![false; r], &mut out);
    out
}

/// Average of a rank-`r` tensor over all `r!` permutations of its index
/// slots, computed entrywise without forming the `d^r × d^r` matrix.
pub fn symmetrize(data: &[f64], d: usize, r: usize) -> Result<Vec<f64>> {
    if d == 0 || data.len() != d.pow(r as u32) {
        return Err(Error::Argument(format!(
            "tensor length {} is not d^r = {}^{}",
            data.len(),
            d,
            r
        )));
    }
    let perms = permutations(r);
    let norm = perms.len() as f64;
    let mut out = vec![0.0; data.len()];
    let mut permuted = vec![0usize; r];
    for (k, slot) in out.iter_mut().enumerate() {
        let index = multi_index(k, d, r);
        let mut acc = 0.0;
        for p in &perms {
            for (dst, &src) in permuted.iter_mut().zip(p) {
                *dst = index[src];
            }
            acc += data[flat_index(&permuted, d)];
        }
        *slot = acc / norm;
    }
    Ok(out)
}

/// `v^{⊗r}`.
pub fn outer_power(v: &[f64], r: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..r {
        out = kron(&out, v);
    }
    out
}

pub fn kron(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            out.push(x * y);
        }
    }
    out
}

/// `(vec M)^{⊗k}` for a `d × d` matrix stored row-major.
pub fn vec_power(m: &[f64], k: usize) -> Vec<f64> {
    outer_power(m, k)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest deviation from permutation symmetry.
pub fn asymmetry(data: &[f64], d: usize, r: usize) -> Result<f64> {
    let sym = symmetrize(data, d, r)?;
    Ok(data
        .iter()
        .zip(&sym)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Double factorial `(r-1)!!` for even `r` (1 for `r = 0`).
pub fn odd_double_factorial(r: usize) -> f64 {
    let mut acc = 1.0;
    let mut k = r.saturating_sub(1) as i64;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        for k in 0..27 {
            assert_eq!(flat_index(&multi_index(k, 3, 3), 3), k);
        }
    }

    #[test]
    fn symmetrize_pair() {
        // e1 ⊗ e2 in d = 2
        let t = [0.0, 1.0, 0.0, 0.0];
        assert_eq!(symmetrize(&t, 2, 2).unwrap(), vec![0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn length_mismatch() {
        assert!(symmetrize(&[1.0, 2.0, 3.0], 2, 2).is_err());
    }

    #[test]
    fn double_factorials() {
        assert_eq!(odd_double_factorial(2), 1.0);
        assert_eq!(odd_double_factorial(4), 3.0);
        assert_eq!(odd_double_factorial(6), 15.0);
    }
}
