//! Standard-normal helpers and the derivatives of `log(1 - Φ(v))`.

use statrs::function::erf::{erfc, erfc_inv};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Above this point `1 - Φ(v)` is evaluated through its asymptotic expansion.
const TAIL_SWITCH: f64 = 35.0;

pub fn norm_pdf(v: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * v * v).exp()
}

pub fn norm_cdf(v: f64) -> f64 {
    0.5 * erfc(-v / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - Φ(v)`.
pub fn norm_sf(v: f64) -> f64 {
    0.5 * erfc(v / std::f64::consts::SQRT_2)
}

/// Inverse of [`norm_sf`] on `(0, 1)`.
pub fn norm_sf_inv(q: f64) -> f64 {
    std::f64::consts::SQRT_2 * erfc_inv(2.0 * q)
}

/// Inverse Mills ratio `φ(v) / (1 - Φ(v))`.
pub fn inv_mills(v: f64) -> f64 {
    if v < TAIL_SWITCH {
        norm_pdf(v) / norm_sf(v)
    } else {
        // continued fraction of the Mills ratio, truncated deep enough for v >= 35
        let mut frac = v;
        for k in (1..=40).rev() {
            frac = v + k as f64 / frac;
        }
        frac
    }
}

/// `Ψ(v) = log(1 - Φ(v))`.
pub fn log_sf(v: f64) -> f64 {
    if v < TAIL_SWITCH {
        norm_sf(v).ln()
    } else {
        -0.5 * v * v - LN_SQRT_2PI - inv_mills(v).ln()
    }
}

/// `[Ψ, Ψ', Ψ'', Ψ''', Ψ'''']` at `v`, built from the inverse Mills ratio
/// `λ` and the recursion `λ' = λ(λ - v)`.
pub fn log_sf_derivs(v: f64) -> [f64; 5] {
    let l0 = inv_mills(v);
    let gap = l0 - v;
    let l1 = l0 * gap;
    let l2 = l1 * gap + l0 * (l1 - 1.0);
    let l3 = l2 * gap + 2.0 * l1 * (l1 - 1.0) + l0 * l2;
    [log_sf(v), -l0, -l1, -l2, -l3]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mills_at_zero() {
        assert!((inv_mills(0.0) - 0.797_884_560_802_865_4).abs() < 1e-15);
    }

    #[test]
    fn tail_switch_is_continuous() {
        let below = norm_pdf(TAIL_SWITCH - 1e-9) / norm_sf(TAIL_SWITCH - 1e-9);
        assert!((inv_mills(TAIL_SWITCH) - below).abs() / below < 1e-9);
        let lb = norm_sf(TAIL_SWITCH - 1e-9).ln();
        assert!((log_sf(TAIL_SWITCH) - lb).abs() < 1e-6);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for &v in &[-3.0, -0.7, 0.0, 0.4, 2.5, 6.0] {
            let d = log_sf_derivs(v);
            let h = 1e-4;
            for k in 1..5 {
                let fd = (log_sf_derivs(v + h)[k - 1] - log_sf_derivs(v - h)[k - 1]) / (2.0 * h);
                assert!((fd - d[k]).abs() < 1e-6 * (1.0 + d[k].abs()), "k={k} v={v}");
            }
        }
    }

    #[test]
    fn sf_inverse_round_trip() {
        for &v in &[-4.0, -1.0, 0.0, 1.3, 5.0, 9.0] {
            let back = norm_sf_inv(norm_sf(v));
            assert!((back - v).abs() < 1e-9 * (1.0 + v.abs()));
        }
    }
}
