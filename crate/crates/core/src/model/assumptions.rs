//! Sampling-based falsifiers for the Khasminskii-type and monotonicity
//! conditions.
//!
//! Both conditions quantify over all of `[0, T] × ℝ^d`, so they cannot be
//! verified mechanically. The checkers evaluate the defining inequality on a
//! random sample and report the worst signed margin `LHS − RHS`; a positive
//! margin is a concrete counterexample, a non-positive one means no violation
//! was found. The time-Hölder condition is not sampled; it is recorded in
//! [`AssumptionMeta::notes`](super::AssumptionMeta) only.

use rand::Rng;

use super::{euclidean_norm, SdeModel};
use crate::brownian::{RngStream, StreamGenerator};
use crate::error::{Result, SdeError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSpec {
    pub samples: usize,
    /// States are drawn uniformly from `[-bound, bound]^d`.
    pub bound: f64,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            samples: 100_000,
            bound: 50.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssumptionId {
    Khasminskii,
    Monotonicity,
}

impl AssumptionId {
    pub fn as_str(&self) -> &'static str {
        match self {
            AssumptionId::Khasminskii => "khasminskii",
            AssumptionId::Monotonicity => "monotonicity",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub assumption: AssumptionId,
    /// `p` for Khasminskii, `a` for monotonicity.
    pub parameter: f64,
    pub constant: f64,
    /// Largest sampled `LHS − RHS`; `+∞` if a coefficient was non-finite.
    pub margin: f64,
    pub witness: Witness,
    pub samples: usize,
}

impl AssumptionReport {
    pub fn violated(&self) -> bool {
        !(self.margin <= 0.0)
    }
}

fn validate(parameter: f64, constant: f64, spec: &SampleSpec) -> Result<()> {
    if !(parameter >= 2.0) {
        return Err(SdeError::domain(format!("assumption parameter must be >= 2, got {parameter}")));
    }
    if !(constant > 0.0) {
        return Err(SdeError::domain(format!("constant must be positive, got {constant}")));
    }
    if spec.samples == 0 || !(spec.bound > 0.0 && spec.bound.is_finite()) {
        return Err(SdeError::domain("sample spec needs samples > 0 and a positive finite bound"));
    }
    Ok(())
}

fn uniform_state(rng: &mut StreamGenerator, bound: f64, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = bound * (2.0 * rng.random::<f64>() - 1.0);
    }
}

/// Falsifier for `2xᵀμ(t,x) + (p−1)|σ(t,x)|² ≤ C(1 + |x|²)`, `|·|` Frobenius.
pub fn check_khasminskii(
    model: &SdeModel,
    p: f64,
    constant: f64,
    spec: &SampleSpec,
) -> Result<AssumptionReport> {
    validate(p, constant, spec)?;
    let (d, m) = (model.state_dim(), model.noise_dim());
    let mut rng = RngStream::new(spec.seed, 0).with_substream(0xA55).generator();
    let mut x = vec![0.0; d];
    let mut mu = vec![0.0; d];
    let mut sigma = vec![0.0; d * m];
    let mut worst = f64::NEG_INFINITY;
    let mut witness = Witness { t: 0.0, x: x.clone(), y: None };

    for _ in 0..spec.samples {
        let t = model.horizon() * rng.random::<f64>();
        uniform_state(&mut rng, spec.bound, &mut x);
        model.drift_into(t, &x, &mut mu);
        model.diffusion_into(t, &x, &mut sigma);
        let inner: f64 = x.iter().zip(&mu).map(|(a, b)| a * b).sum();
        let sigma_sq: f64 = sigma.iter().map(|v| v * v).sum();
        let x_sq = euclidean_norm(&x).powi(2);
        let mut margin = 2.0 * inner + (p - 1.0) * sigma_sq - constant * (1.0 + x_sq);
        if !margin.is_finite() {
            margin = f64::INFINITY;
        }
        if margin > worst {
            worst = margin;
            witness = Witness { t, x: x.clone(), y: None };
            if margin == f64::INFINITY {
                break;
            }
        }
    }
    Ok(AssumptionReport {
        assumption: AssumptionId::Khasminskii,
        parameter: p,
        constant,
        margin: worst,
        witness,
        samples: spec.samples,
    })
}

/// Falsifier for
/// `2(x−y)ᵀ(μ(t,x)−μ(t,y)) + (a−1)|σ(t,x)−σ(t,y)|² ≤ C|x−y|²`.
///
/// Half of the pairs are independent uniform draws; the other half place `y`
/// within a relative distance of `10⁻³` from `x`, where one-sided Lipschitz
/// violations of smooth coefficients show up first.
pub fn check_monotonicity(
    model: &SdeModel,
    a: f64,
    constant: f64,
    spec: &SampleSpec,
) -> Result<AssumptionReport> {
    validate(a, constant, spec)?;
    let (d, m) = (model.state_dim(), model.noise_dim());
    let mut rng = RngStream::new(spec.seed, 0).with_substream(0xB77).generator();
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut mu_x = vec![0.0; d];
    let mut mu_y = vec![0.0; d];
    let mut sig_x = vec![0.0; d * m];
    let mut sig_y = vec![0.0; d * m];
    let mut worst = f64::NEG_INFINITY;
    let mut witness = Witness { t: 0.0, x: x.clone(), y: Some(y.clone()) };

    for i in 0..spec.samples {
        let t = model.horizon() * rng.random::<f64>();
        uniform_state(&mut rng, spec.bound, &mut x);
        if i % 2 == 0 {
            uniform_state(&mut rng, spec.bound, &mut y);
        } else {
            let scale = 1e-3 * (1.0 + euclidean_norm(&x));
            for (yi, xi) in y.iter_mut().zip(&x) {
                *yi = xi + scale * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        let diff_sq: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        if diff_sq == 0.0 {
            continue;
        }
        model.drift_into(t, &x, &mut mu_x);
        model.drift_into(t, &y, &mut mu_y);
        model.diffusion_into(t, &x, &mut sig_x);
        model.diffusion_into(t, &y, &mut sig_y);
        let inner: f64 = (0..d).map(|k| (x[k] - y[k]) * (mu_x[k] - mu_y[k])).sum();
        let sig_sq: f64 = sig_x.iter().zip(&sig_y).map(|(p, q)| (p - q) * (p - q)).sum();
        let mut margin = 2.0 * inner + (a - 1.0) * sig_sq - constant * diff_sq;
        if !margin.is_finite() {
            margin = f64::INFINITY;
        }
        if margin > worst {
            worst = margin;
            witness = Witness { t, x: x.clone(), y: Some(y.clone()) };
            if margin == f64::INFINITY {
                break;
            }
        }
    }
    Ok(AssumptionReport {
        assumption: AssumptionId::Monotonicity,
        parameter: a,
        constant,
        margin: worst,
        witness,
        samples: spec.samples,
    })
}
