//! Adaptive Gauss–Kronrod (10/21) quadrature and fixed Gauss–Legendre rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_351_996,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

/// Gauss weights for the odd-indexed Kronrod abscissae.
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Change of variables used when the upper limit is `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailMap {
    /// `x = a + s·u/(1-u)`
    Rational { scale: f64 },
    /// `x = a - s·ln(1-u)`; flattens an `exp(-(x-a)/s)` tail.
    Exponential { scale: f64 },
}

impl Default for TailMap {
    fn default() -> Self {
        TailMap::Rational { scale: 1.0 }
    }
}

impl TailMap {
    fn apply(&self, a: f64, u: f64) -> (f64, f64) {
        match *self {
            TailMap::Rational { scale } => {
                let w = 1.0 - u;
                (a + scale * u / w, scale / (w * w))
            }
            TailMap::Exponential { scale } => {
                let w = 1.0 - u;
                (a - scale * w.ln(), scale / w)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Overrides the model's own tail map when set.
    pub tail_map: Option<TailMap>,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_subdivisions: 200,
            tail_map: None,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Argument(
                "quadrature tolerances must be positive".into(),
            ));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Argument("max_subdivisions must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

/// Adaptive integral of `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let (v0, e0) = kronrod21(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel {
        a,
        b,
        value: v0,
        error: e0,
    });
    let mut total = v0;
    let mut total_err = e0;
    let mut splits = 1;
    loop {
        if !total.is_finite() {
            return Err(Error::Quadrature {
                estimate: total,
                error: total_err,
            });
        }
        if total_err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
            return Ok(Estimate {
                value: total,
                error: total_err,
            });
        }
        if splits >= cfg.max_subdivisions {
            return Err(Error::Quadrature {
                estimate: total,
                error: total_err,
            });
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in floating point
            return Err(Error::Quadrature {
                estimate: total,
                error: total_err,
            });
        }
        let (vl, el) = kronrod21(&f, worst.a, mid);
        let (vr, er) = kronrod21(&f, mid, worst.b);
        total += vl + vr - worst.value;
        total_err += el + er - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: vl,
            error: el,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: vr,
            error: er,
        });
        splits += 1;
        // resum occasionally to keep the running error free of drift
        if splits % 32 == 0 {
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
}

/// Integral of `f` over `[a, ∞)` through `map`.
pub fn integrate_upper_tail<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    map: TailMap,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    let mapped = |u: f64| {
        let (x, jac) = map.apply(a, u);
        let v = f(x);
        if v == 0.0 || !x.is_finite() {
            0.0
        } else {
            v * jac
        }
    };
    integrate(mapped, 0.0, 1.0, cfg)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let step = p1 / dp;
            z -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule on `[a, b]` with `panels` equal panels.
pub fn composite_gauss_legendre(
    a: f64,
    b: f64,
    panels: usize,
    per_panel: usize,
) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(per_panel);
    let width = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * per_panel);
    let mut weights = Vec::with_capacity(panels * per_panel);
    for k in 0..panels {
        let lo = a + k as f64 * width;
        for (x, w) in xs.iter().zip(&ws) {
            nodes.push(lo + 0.5 * width * (x + 1.0));
            weights.push(0.5 * width * w);
        }
    }
    (nodes, weights)
}
