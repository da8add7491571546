//! Coefficient families `N ↦ (μ_N, σ_N)` used by the modified EM schemes.

use std::fmt;

use crate::error::{Result, SdeError};
use crate::model::{euclidean_norm, SdeModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Taming {
    /// `(μ_N, σ_N) = (μ, σ)`: the classical Euler–Maruyama scheme.
    Identity,
    /// `(μ, σ) / (1 + (T/N)^{1/2} |x|^r)` with the Euclidean `|x|`.
    Sabanis { r: f64 },
}

impl Taming {
    /// Parses `identity`, `sabanis` (with `default_r`) or `sabanis(r)`.
    pub fn parse(id: &str, default_r: f64) -> Result<Self> {
        let id = id.trim();
        if id == "identity" || id == "euler" {
            return Ok(Taming::Identity);
        }
        let r = if id == "sabanis" {
            default_r
        } else if let Some(arg) = id.strip_prefix("sabanis(").and_then(|s| s.strip_suffix(')')) {
            arg.trim()
                .parse::<f64>()
                .map_err(|_| SdeError::UnknownFamily(id.to_string()))?
        } else {
            return Err(SdeError::UnknownFamily(id.to_string()));
        };
        if !(r >= 0.0 && r.is_finite()) {
            return Err(SdeError::InvalidParams {
                name: "sabanis".into(),
                reason: format!("taming exponent must be non-negative, got {r}"),
            });
        }
        Ok(Taming::Sabanis { r })
    }
}

impl fmt::Display for Taming {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Taming::Identity => f.write_str("identity"),
            Taming::Sabanis { r } => write!(f, "sabanis({r})"),
        }
    }
}

/// A model together with its coefficient modification.
#[derive(Debug, Clone)]
pub struct CoefficientFamily {
    model: SdeModel,
    kind: Taming,
}

impl CoefficientFamily {
    pub fn new(model: SdeModel, kind: Taming) -> Self {
        CoefficientFamily { model, kind }
    }

    pub fn identity(model: SdeModel) -> Self {
        Self::new(model, Taming::Identity)
    }

    pub fn sabanis(model: SdeModel, r: f64) -> Self {
        Self::new(model, Taming::Sabanis { r })
    }

    pub fn model(&self) -> &SdeModel {
        &self.model
    }

    pub fn kind(&self) -> Taming {
        self.kind
    }

    /// Denominator `1 + (T/N)^{1/2}|x|^r`; 1 for the identity family.
    #[inline]
    pub fn denominator(&self, n: usize, x: &[f64]) -> f64 {
        match self.kind {
            Taming::Identity => 1.0,
            Taming::Sabanis { r } => {
                let norm = if x.len() == 1 { x[0].abs() } else { euclidean_norm(x) };
                let powered = if r == 1.0 { norm } else { norm.powf(r) };
                1.0 + (self.model.horizon() / n as f64).sqrt() * powered
            }
        }
    }

    /// `μ_N(t, x)` into `mu` and the row-major `σ_N(t, x)` into `sigma`.
    #[inline]
    pub fn evaluate_into(&self, n: usize, t: f64, x: &[f64], mu: &mut [f64], sigma: &mut [f64]) {
        self.model.drift_into(t, x, mu);
        self.model.diffusion_into(t, x, sigma);
        if let Taming::Sabanis { .. } = self.kind {
            let denom = self.denominator(n, x);
            for v in mu.iter_mut() {
                *v /= denom;
            }
            for v in sigma.iter_mut() {
                *v /= denom;
            }
        }
    }

    pub fn evaluate(&self, n: usize, t: f64, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if n == 0 {
            return Err(SdeError::domain("family level N must be at least 1"));
        }
        if x.len() != self.model.state_dim() {
            return Err(SdeError::DimensionMismatch {
                expected: self.model.state_dim(),
                actual: x.len(),
            });
        }
        let mut mu = vec![0.0; self.model.state_dim()];
        let mut sigma = vec![0.0; self.model.state_dim() * self.model.noise_dim()];
        self.evaluate_into(n, t, x, &mut mu, &mut sigma);
        Ok((mu, sigma))
    }
}
