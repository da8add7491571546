//! Estimators for the asymptotic constants `C_q^eq` and `C_q^ad`.
//!
//! Per replication the equidistant family scheme with `N` steps is run and
//! the base diffusion `σ` is evaluated along it:
//!
//! - `Ĉ^eq = (T/2)^{1/2} · (mean of (max_{ℓ≤N} |σ(t_ℓ, X̂(t_ℓ))|_{∞,2})^q)^{1/q}`
//! - `Ĉ^ad = 2^{-1/2} · (mean of S^{ρ/2})^{1/ρ}`, `ρ = 2q/(q+2)`, with the
//!   left Riemann sum `S = (T/N) Σ_{ℓ<N} |σ(t_ℓ, X̂(t_ℓ))|²_{∞,2}`.

use super::{powered_mean, pow_exact, replicate, EstimateWithCi};
use crate::brownian::{sample_grid, RngStream};
use crate::error::{Result, SdeError};
use crate::model::{infty2_norm_sq, SdeModel};
use crate::schemes::equidistant_em;
use crate::taming::CoefficientFamily;

/// Per-replication inner samples; `None` where the scheme exploded.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantSamples {
    pub q: f64,
    pub horizon: f64,
    /// `(max_ℓ |σ|²_{∞,2})^{q/2}`.
    pub eq: Vec<Option<f64>>,
    /// `S^{ρ/2}`.
    pub ad: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsEstimate {
    pub ad: EstimateWithCi,
    pub eq: EstimateWithCi,
    pub samples: ConstantSamples,
}

impl ConstantSamples {
    pub(crate) fn new(q: f64, horizon: f64, capacity: usize) -> Self {
        ConstantSamples {
            q,
            horizon,
            eq: Vec::with_capacity(capacity),
            ad: Vec::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.eq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eq.is_empty()
    }

    pub(crate) fn push(&mut self, sample: Option<(f64, f64)>) {
        self.eq.push(sample.map(|s| s.0));
        self.ad.push(sample.map(|s| s.1));
    }

    fn rho(&self) -> f64 {
        2.0 * self.q / (self.q + 2.0)
    }

    pub fn eq_estimate(&self, m_used: usize) -> Result<EstimateWithCi> {
        let m = m_used.min(self.len());
        powered_mean(&self.eq[..m], 1.0 / self.q, (self.horizon / 2.0).sqrt())
    }

    pub fn ad_estimate(&self, m_used: usize) -> Result<EstimateWithCi> {
        let m = m_used.min(self.len());
        powered_mean(&self.ad[..m], 1.0 / self.rho(), 0.5f64.sqrt())
    }

    /// Both constants from the first `m_used` replications.
    pub fn estimate(&self, m_used: usize) -> Result<(EstimateWithCi, EstimateWithCi)> {
        Ok((self.ad_estimate(m_used)?, self.eq_estimate(m_used)?))
    }
}

/// `(eq, ad)` inner samples along equidistant values on `n + 1` sites.
pub(crate) fn constant_sample(model: &SdeModel, sites: &[f64], values: &[f64], q: f64) -> (f64, f64) {
    let (d, m) = (model.state_dim(), model.noise_dim());
    let n = sites.len() - 1;
    let mut sigma = vec![0.0; d * m];
    let mut max_sq = 0.0f64;
    let mut sum_sq = 0.0;
    for (l, &t) in sites.iter().enumerate() {
        model.diffusion_into(t, &values[l * d..(l + 1) * d], &mut sigma);
        let s = infty2_norm_sq(&sigma, m);
        if !(s <= max_sq) {
            max_sq = s;
        }
        if l < n {
            sum_sq += s;
        }
    }
    let riemann = sum_sq / n as f64 * model.horizon();
    let rho = 2.0 * q / (q + 2.0);
    (pow_exact(max_sq, q / 2.0), pow_exact(riemann, rho / 2.0))
}

fn check_args(q: f64, m: usize, n: usize) -> Result<()> {
    if !(q >= 1.0) {
        return Err(SdeError::domain(format!("q must be >= 1, got {q}")));
    }
    if m < 2 {
        return Err(SdeError::domain(format!("need at least 2 replications, got {m}")));
    }
    if n == 0 {
        return Err(SdeError::domain("grid size N must be at least 1"));
    }
    Ok(())
}

/// Runs `m` replications of the `n`-step equidistant scheme and estimates
/// both constants; replication `i` uses stream `(seed, i)`.
pub fn estimate_constants(
    family: &CoefficientFamily,
    q: f64,
    m: usize,
    n: usize,
    seed: u64,
) -> Result<ConstantsEstimate> {
    check_args(q, m, n)?;
    let model = family.model();
    let outcomes = replicate(m, |i| -> Result<Option<(f64, f64)>> {
        let mut ledger = sample_grid(RngStream::new(seed, i as u64), n, model.horizon(), model.noise_dim())?;
        let tr = equidistant_em(family, n, &mut ledger)?;
        if tr.is_exploded() {
            return Ok(None);
        }
        let s = constant_sample(model, tr.sites(), tr.values(), q);
        Ok((s.0.is_finite() && s.1.is_finite()).then_some(s))
    });
    let mut samples = ConstantSamples::new(q, model.horizon(), m);
    for o in outcomes {
        samples.push(o?);
    }
    let (ad, eq) = samples.estimate(m)?;
    Ok(ConstantsEstimate { ad, eq, samples })
}

pub fn estimate_constant_eq(
    family: &CoefficientFamily,
    q: f64,
    m: usize,
    n: usize,
    seed: u64,
) -> Result<EstimateWithCi> {
    Ok(estimate_constants(family, q, m, n, seed)?.eq)
}

pub fn estimate_constant_ad(
    family: &CoefficientFamily,
    q: f64,
    m: usize,
    n: usize,
    seed: u64,
) -> Result<EstimateWithCi> {
    Ok(estimate_constants(family, q, m, n, seed)?.ad)
}
