use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Vars};
use crate::quadrature::TailMap;

use super::{Family, Interval, ThetaDomain};

/// Serializable description of a user-defined oTEF,
/// `log q(x; θ) = Σ θⁱ Fᵢ(x) + M(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OtefDefinition {
    pub name: String,
    /// `Fᵢ(x)`, one expression per natural parameter.
    pub f: Vec<String>,
    /// `M(x)`; defaults to 0.
    #[serde(default)]
    pub m: Option<String>,
    /// Optional closed-form ψ(θ, γ); quadrature is used otherwise.
    #[serde(default)]
    pub psi: Option<String>,
    pub theta_lower: Vec<f64>,
    pub theta_upper: Vec<f64>,
    #[serde(default = "neg_inf")]
    pub interval_lo: f64,
    #[serde(default = "pos_inf")]
    pub interval_hi: f64,
    /// A valid θ used to start iterations.
    pub reference_theta: Vec<f64>,
    #[serde(default)]
    pub tail: Option<TailMap>,
}

fn neg_inf() -> f64 {
    f64::NEG_INFINITY
}

fn pos_inf() -> f64 {
    f64::INFINITY
}

/// A one-sided truncated exponential family built from expressions.
#[derive(Debug, Clone)]
pub struct OtefModel {
    name: String,
    f: Vec<Expr>,
    m: Option<Expr>,
    psi: Option<Expr>,
    domain: ThetaDomain,
    interval: Interval,
    reference: Vec<f64>,
    tail: TailMap,
}

impl OtefModel {
    pub fn from_definition(def: &OtefDefinition) -> Result<Self> {
        let d = def.f.len();
        if d == 0 {
            return Err(Error::Config(format!(
                "model `{}` needs at least one F_i",
                def.name
            )));
        }
        let f = def
            .f
            .iter()
            .map(|s| {
                let e = Expr::parse(s)?;
                if e.theta_arity() > 0 {
                    return Err(Error::Expr(format!("F_i may only depend on x: `{s}`")));
                }
                Ok(e)
            })
            .collect::<Result<Vec<_>>>()?;
        let m = def.m.as_deref().map(Expr::parse).transpose()?;
        if let Some(m) = &m {
            if m.theta_arity() > 0 {
                return Err(Error::Expr("M may only depend on x".into()));
            }
        }
        let psi = def.psi.as_deref().map(Expr::parse).transpose()?;
        if let Some(psi) = &psi {
            psi.check_scope(d, false)?;
        }
        let domain = ThetaDomain::new(def.theta_lower.clone(), def.theta_upper.clone())
            .map_err(|e| Error::Config(format!("model `{}`: {e}", def.name)))?;
        if domain.lower.len() != d {
            return Err(Error::Config(format!(
                "model `{}`: domain has {} bounds but {} F_i",
                def.name,
                domain.lower.len(),
                d
            )));
        }
        if !domain.contains(&def.reference_theta) {
            return Err(Error::Config(format!(
                "model `{}`: reference_theta outside domain",
                def.name
            )));
        }
        if !(def.interval_lo < def.interval_hi) {
            return Err(Error::Config(format!(
                "model `{}`: empty interval",
                def.name
            )));
        }
        Ok(Self {
            name: def.name.clone(),
            f,
            m,
            psi,
            domain,
            interval: Interval {
                lo: def.interval_lo,
                hi: def.interval_hi,
            },
            reference: def.reference_theta.clone(),
            tail: def.tail.unwrap_or_default(),
        })
    }
}

impl Family for OtefModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.f.len()
    }

    fn theta_domain(&self) -> &ThetaDomain {
        &self.domain
    }

    fn interval(&self) -> Interval {
        self.interval
    }

    fn log_q(&self, x: f64, theta: &[f64]) -> f64 {
        let vars = Vars {
            theta,
            gamma: f64::NAN,
            x,
        };
        let base = self.m.as_ref().map_or(0.0, |m| m.eval(vars));
        base + self
            .f
            .iter()
            .zip(theta)
            .map(|(f, t)| t * f.eval(vars))
            .sum::<f64>()
    }

    fn psi_closed(&self, theta: &[f64], gamma: f64) -> Option<f64> {
        self.psi.as_ref().map(|e| {
            e.eval(Vars {
                theta,
                gamma,
                x: f64::NAN,
            })
        })
    }

    fn sufficient(&self, x: f64) -> Option<Vec<f64>> {
        let vars = Vars {
            theta: &[],
            gamma: f64::NAN,
            x,
        };
        Some(self.f.iter().map(|f| f.eval(vars)).collect())
    }

    fn is_otef(&self) -> bool {
        true
    }

    fn tail_map(&self, _theta: &[f64], _gamma: f64) -> TailMap {
        self.tail
    }

    fn reference_theta(&self) -> Vec<f64> {
        self.reference.clone()
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::models::{ModelSpec, ParamPoint};

    fn exp_like(psi: Option<&str>) -> ModelSpec {
        let def = OtefDefinition {
            name: "custom_exp".into(),
            f: vec!["-x".into()],
            m: None,
            psi: psi.map(str::to_string),
            theta_lower: vec![0.0],
            theta_upper: vec![f64::INFINITY],
            interval_lo: f64::NEG_INFINITY,
            interval_hi: f64::INFINITY,
            reference_theta: vec![1.0],
            tail: Some(TailMap::Exponential { scale: 0.5 }),
        };
        ModelSpec::new(Arc::new(OtefModel::from_definition(&def).unwrap()))
    }

    #[test]
    fn quadrature_fallbacks_reproduce_trunc_exp() {
        let reference = ModelSpec::trunc_exp();
        let p = ParamPoint::new(vec![2.0], 0.3);
        for model in [exp_like(None), exp_like(Some("-theta*gamma - log(theta)"))] {
            for (index, s) in [
                (vec![], 0),
                (vec![0], 0),
                (vec![0, 0], 0),
                (vec![0, 0, 0], 0),
                (vec![], 1),
                (vec![0], 1),
            ] {
                let want = reference.psi_partial(&p, &index, s).unwrap();
                let got = model.psi_partial(&p, &index, s).unwrap();
                assert!(
                    (want - got).abs() < 1e-6 * (1.0 + want.abs()),
                    "{index:?} {s}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn rejects_bad_definitions() {
        let mut def = OtefDefinition {
            name: "bad".into(),
            f: vec!["theta * x".into()],
            m: None,
            psi: None,
            theta_lower: vec![0.0],
            theta_upper: vec![1.0],
            interval_lo: f64::NEG_INFINITY,
            interval_hi: f64::INFINITY,
            reference_theta: vec![0.5],
            tail: None,
        };
        assert!(OtefModel::from_definition(&def).is_err());
        def.f = vec!["x".into()];
        def.reference_theta = vec![2.0];
        assert!(OtefModel::from_definition(&def).is_err());
    }
}
