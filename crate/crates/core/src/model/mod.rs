//! SDE problem definitions `dX = μ(t,X) dt + σ(t,X) dW, X(0) = ξ`.

mod assumptions;
mod builtin;

use std::fmt;
use std::sync::Arc;

use crate::brownian::{RngStream, StreamGenerator, INITIAL_VALUE_SUBSTREAM};
use crate::error::{Result, SdeError};

pub use assumptions::{
    check_khasminskii, check_monotonicity, AssumptionId, AssumptionReport, SampleSpec, Witness,
};
pub use builtin::{builtin, ConstDiffusion, Gbm, Heston32, ZeroCoefficients};

/// Drift and diffusion coefficients of an SDE.
///
/// Matrices are row-major `d × m`. Implementations must be total on
/// `[0, T] × ℝ^d`: any finite input yields a (possibly non-finite) output
/// without panicking.
pub trait Dynamics: Send + Sync + fmt::Debug {
    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]);
    fn diffusion(&self, t: f64, x: &[f64], out: &mut [f64]);
}

/// Closed-form solution `X(t)` as a function of `W(t)` and `ξ`.
pub trait ExactSolution: Send + Sync + fmt::Debug {
    fn evaluate(&self, t: f64, w: &[f64], initial: &[f64], out: &mut [f64]);
}

pub type InitialSampler = Arc<dyn Fn(&mut StreamGenerator) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum InitialValue {
    Fixed(Vec<f64>),
    /// Drawn per replication from a dedicated substream of its [`RngStream`].
    Sampled(InitialSampler),
}

impl fmt::Debug for InitialValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialValue::Fixed(x) => f.debug_tuple("Fixed").field(x).finish(),
            InitialValue::Sampled(_) => f.write_str("Sampled(..)"),
        }
    }
}

/// Claimed parameters of the growth and regularity assumptions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssumptionMeta {
    /// Largest `p` for the Khasminskii-type condition; `None` if unbounded or unknown.
    pub p_khasminskii: Option<f64>,
    /// Largest `a` for the monotonicity condition.
    pub a_monotone: Option<f64>,
    /// Polynomial Lipschitz exponent of the drift.
    pub r_poly: Option<f64>,
    pub notes: String,
}

impl AssumptionMeta {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str| SdeError::InvalidParams {
            name: "assumption metadata".into(),
            reason: format!("{name} out of range"),
        };
        if self.p_khasminskii.is_some_and(|p| !(p >= 2.0)) {
            return Err(bad("p"));
        }
        if self.a_monotone.is_some_and(|a| !(a >= 2.0)) {
            return Err(bad("a"));
        }
        if self.r_poly.is_some_and(|r| !(r >= 0.0)) {
            return Err(bad("r"));
        }
        Ok(())
    }
}

/// An SDE with horizon, dimensions, coefficients and initial value.
///
/// Cheap to clone; all coefficient data is shared.
#[derive(Debug, Clone)]
pub struct SdeModel {
    name: String,
    state_dim: usize,
    noise_dim: usize,
    horizon: f64,
    dynamics: Arc<dyn Dynamics>,
    initial: InitialValue,
    exact: Option<Arc<dyn ExactSolution>>,
    meta: AssumptionMeta,
}

impl SdeModel {
    pub fn new(
        name: impl Into<String>,
        state_dim: usize,
        noise_dim: usize,
        horizon: f64,
        dynamics: Arc<dyn Dynamics>,
        initial: InitialValue,
    ) -> Result<Self> {
        let name = name.into();
        if state_dim == 0 || noise_dim == 0 {
            return Err(SdeError::InvalidParams {
                name,
                reason: "dimensions must be positive".into(),
            });
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(SdeError::InvalidParams {
                name,
                reason: format!("horizon must be positive and finite, got {horizon}"),
            });
        }
        if let InitialValue::Fixed(x) = &initial {
            if x.len() != state_dim {
                return Err(SdeError::DimensionMismatch {
                    expected: state_dim,
                    actual: x.len(),
                });
            }
        }
        Ok(SdeModel {
            name,
            state_dim,
            noise_dim,
            horizon,
            dynamics,
            initial,
            exact: None,
            meta: AssumptionMeta::default(),
        })
    }

    pub fn with_exact_solution(mut self, exact: Arc<dyn ExactSolution>) -> Self {
        self.exact = Some(exact);
        self
    }

    pub fn with_meta(mut self, meta: AssumptionMeta) -> Result<Self> {
        meta.validate()?;
        self.meta = meta;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// State dimension `d`.
    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Noise dimension `m`.
    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn meta(&self) -> &AssumptionMeta {
        &self.meta
    }

    pub fn initial(&self) -> &InitialValue {
        &self.initial
    }

    pub fn exact_solution(&self) -> Option<&dyn ExactSolution> {
        self.exact.as_deref()
    }

    #[inline]
    pub fn drift_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.dynamics.drift(t, x, out)
    }

    #[inline]
    pub fn diffusion_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.dynamics.diffusion(t, x, out)
    }

    pub fn drift(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        self.drift_into(t, x, &mut out);
        out
    }

    pub fn diffusion(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim * self.noise_dim];
        self.diffusion_into(t, x, &mut out);
        out
    }

    /// Realized initial value for the replication owning `stream`.
    ///
    /// Every scheme sharing one ledger sees the same `ξ`.
    pub fn initial_value(&self, stream: RngStream) -> Vec<f64> {
        match &self.initial {
            InitialValue::Fixed(x) => x.clone(),
            InitialValue::Sampled(sampler) => {
                let mut rng = stream.with_substream(INITIAL_VALUE_SUBSTREAM).generator();
                sampler(&mut rng)
            }
        }
    }
}

/// `|A|_{∞,2}`: the largest Euclidean norm of a row of the row-major matrix
/// `a` with `cols` columns.
pub fn infty2_norm(a: &[f64], cols: usize) -> f64 {
    if cols == 0 {
        return 0.0;
    }
    a.chunks_exact(cols)
        .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Squared `|A|_{∞,2}`, skipping the square root.
#[inline]
pub(crate) fn infty2_norm_sq(a: &[f64], cols: usize) -> f64 {
    a.chunks_exact(cols)
        .map(|row| row.iter().map(|v| v * v).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn frobenius_norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn euclidean_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
