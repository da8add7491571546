use std::sync::Arc;

use super::{AssumptionMeta, Dynamics, ExactSolution, InitialValue, SdeModel};
use crate::error::{Result, SdeError};

/// Scalar Heston-3/2 variance dynamics `dX = αX(β − |X|) dt + γ|X|^{3/2} dW`.
///
/// `|x|^{3/2}` is used for every real `x`, so negative excursions of a
/// discretization stay well-defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Heston32 {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Dynamics for Heston32 {
    #[inline]
    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.alpha * x[0] * (self.beta - x[0].abs());
    }

    #[inline]
    fn diffusion(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let a = x[0].abs();
        out[0] = self.gamma * a * a.sqrt();
    }
}

/// Geometric Brownian motion `dX = μ₀X dt + σ₀X dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gbm {
    pub mu: f64,
    pub sigma: f64,
}

impl Dynamics for Gbm {
    #[inline]
    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.mu * x[0];
    }

    #[inline]
    fn diffusion(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma * x[0];
    }
}

impl ExactSolution for Gbm {
    fn evaluate(&self, t: f64, w: &[f64], initial: &[f64], out: &mut [f64]) {
        out[0] = initial[0] * ((self.mu - 0.5 * self.sigma * self.sigma) * t + self.sigma * w[0]).exp();
    }
}

/// Zero drift, constant scalar diffusion `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstDiffusion {
    pub c: f64,
}

impl Dynamics for ConstDiffusion {
    fn drift(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }

    fn diffusion(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out[0] = self.c;
    }
}

impl ExactSolution for ConstDiffusion {
    fn evaluate(&self, _t: f64, w: &[f64], initial: &[f64], out: &mut [f64]) {
        out[0] = initial[0] + self.c * w[0];
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroCoefficients;

impl Dynamics for ZeroCoefficients {
    fn drift(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn diffusion(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

impl ExactSolution for ZeroCoefficients {
    fn evaluate(&self, _t: f64, _w: &[f64], initial: &[f64], out: &mut [f64]) {
        out.copy_from_slice(initial);
    }
}

fn params<const K: usize>(name: &str, given: &[f64], defaults: [f64; K]) -> Result<[f64; K]> {
    match given.len() {
        0 => Ok(defaults),
        n if n == K => {
            if given.iter().any(|v| !v.is_finite()) {
                return Err(SdeError::InvalidParams {
                    name: name.into(),
                    reason: "parameters must be finite".into(),
                });
            }
            let mut out = [0.0; K];
            out.copy_from_slice(given);
            Ok(out)
        }
        n => Err(SdeError::InvalidParams {
            name: name.into(),
            reason: format!("expected {K} parameters, got {n}"),
        }),
    }
}

impl SdeModel {
    pub fn heston32(alpha: f64, beta: f64, gamma: f64, xi: f64, horizon: f64) -> Result<Self> {
        SdeModel::new(
            "heston32",
            1,
            1,
            horizon,
            Arc::new(Heston32 { alpha, beta, gamma }),
            InitialValue::Fixed(vec![xi]),
        )?
        .with_meta(AssumptionMeta {
            p_khasminskii: Some(11.0),
            a_monotone: Some(6.0),
            r_poly: Some(1.0),
            notes: "claims stated for alpha=5, beta=1, gamma=1; time-Hölder regularity holds trivially (autonomous)".into(),
        })
    }

    pub fn gbm(mu: f64, sigma: f64, xi: f64, horizon: f64) -> Result<Self> {
        let g = Arc::new(Gbm { mu, sigma });
        Ok(SdeModel::new("gbm", 1, 1, horizon, g.clone(), InitialValue::Fixed(vec![xi]))?
            .with_exact_solution(g)
            .with_meta(AssumptionMeta {
                r_poly: Some(0.0),
                notes: "globally Lipschitz; growth conditions hold for every p and a".into(),
                ..Default::default()
            })?)
    }

    pub fn const_diffusion(c: f64, xi: f64, horizon: f64) -> Result<Self> {
        let cd = Arc::new(ConstDiffusion { c });
        Ok(SdeModel::new("const_diffusion", 1, 1, horizon, cd.clone(), InitialValue::Fixed(vec![xi]))?
            .with_exact_solution(cd)
            .with_meta(AssumptionMeta {
                r_poly: Some(0.0),
                notes: "constant coefficients".into(),
                ..Default::default()
            })?)
    }

    pub fn zero(xi: f64, horizon: f64) -> Result<Self> {
        let z = Arc::new(ZeroCoefficients);
        Ok(SdeModel::new("zero", 1, 1, horizon, z.clone(), InitialValue::Fixed(vec![xi]))?
            .with_exact_solution(z))
    }
}

/// Built-in model by id with positional parameters; an empty list selects
/// the defaults.
///
/// | id                | parameters          | defaults            |
/// |-------------------|---------------------|---------------------|
/// | `heston32`        | `α, β, γ, ξ, T`     | `5, 1, 1, 1, 1`     |
/// | `gbm`             | `μ₀, σ₀, ξ, T`      | `0.1, 0.2, 1, 1`    |
/// | `const_diffusion` | `c, ξ, T`           | `1, 0, 1`           |
/// | `zero`            | `ξ, T`              | `1, 1`              |
pub fn builtin(name: &str, given: &[f64]) -> Result<SdeModel> {
    match name {
        "heston32" => {
            let [a, b, g, xi, t] = params(name, given, [5.0, 1.0, 1.0, 1.0, 1.0])?;
            SdeModel::heston32(a, b, g, xi, t)
        }
        "gbm" => {
            let [mu, s, xi, t] = params(name, given, [0.1, 0.2, 1.0, 1.0])?;
            SdeModel::gbm(mu, s, xi, t)
        }
        "const_diffusion" => {
            let [c, xi, t] = params(name, given, [1.0, 0.0, 1.0])?;
            SdeModel::const_diffusion(c, xi, t)
        }
        "zero" => {
            let [xi, t] = params(name, given, [1.0, 1.0])?;
            SdeModel::zero(xi, t)
        }
        other => Err(SdeError::UnknownModel(other.to_string())),
    }
}
