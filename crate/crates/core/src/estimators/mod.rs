//! Monte Carlo estimators: asymptotic constants, sup-errors on coupled
//! paths, adaptive costs and Brownian-bridge extrema.
//!
//! Replications run on the rayon pool, one [`RngStream`](crate::RngStream)
//! per replication index. Results are collected in index order and reduced
//! serially, so any pool size gives bit-identical estimates.

mod bridge;
mod constants;
mod errors;

use rayon::prelude::*;

use crate::error::{Result, SdeError};

pub use bridge::{bridge_extrema_ratio, bridge_extrema_ratios, bridge_sup_mean, weighted_bridge_extrema};
pub use constants::{estimate_constant_ad, estimate_constant_eq, estimate_constants, ConstantSamples, ConstantsEstimate};
pub use errors::{
    estimate_cost, estimate_error, estimate_errors, CostEstimate, EnvelopeRecord, ErrorStudy, Reference,
    SchemeEstimate, SchemeSpec, StudyResult,
};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959964;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithCi {
    pub value: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    /// Replications attempted, including exploded ones.
    pub replications: usize,
    pub exploded: usize,
}

impl EstimateWithCi {
    fn from_parts(value: f64, stderr: f64, replications: usize, exploded: usize) -> Self {
        EstimateWithCi {
            value,
            stderr,
            ci95: (value - Z95 * stderr, value + Z95 * stderr),
            replications,
            exploded,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci95.0 <= x && x <= self.ci95.1
    }
}

/// Sample mean with a CLT-based 95% interval.
pub fn clt_ci(samples: &[f64]) -> Result<EstimateWithCi> {
    let n = samples.len();
    if n < 2 {
        return Err(SdeError::domain(format!("confidence interval needs at least 2 samples, got {n}")));
    }
    // shifted by the first sample; constant input gives an exact mean and zero spread
    let x0 = samples[0];
    let shift = samples.iter().map(|x| x - x0).sum::<f64>() / n as f64;
    let mean = x0 + shift;
    let ss: f64 = samples.iter().map(|x| (x - x0 - shift).powi(2)).sum();
    let stderr = (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt();
    Ok(EstimateWithCi::from_parts(mean, stderr, n, 0))
}

/// `x^p`, exact for the powers the `q = 2` estimators use.
#[inline]
pub(crate) fn pow_exact(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 0.5 {
        x.sqrt()
    } else if p == 2.0 {
        x * x
    } else {
        x.powf(p)
    }
}

/// `scale · (mean of samples)^outer`, stderr by the delta method.
///
/// `None` marks an exploded replication; those are excluded and counted.
pub(crate) fn powered_mean(samples: &[Option<f64>], outer: f64, scale: f64) -> Result<EstimateWithCi> {
    let finite: Vec<f64> = samples.iter().flatten().copied().collect();
    let exploded = samples.len() - finite.len();
    if finite.is_empty() {
        return Err(SdeError::AllExploded {
            replications: samples.len(),
        });
    }
    if finite.len() < 2 {
        return Err(SdeError::TooFewSamples { finite: finite.len() });
    }
    let inner = clt_ci(&finite)?;
    let value = scale * pow_exact(inner.value, outer);
    let stderr = if inner.stderr == 0.0 {
        0.0
    } else {
        scale * outer * inner.value.powf(outer - 1.0) * inner.stderr
    };
    Ok(EstimateWithCi::from_parts(value, stderr, samples.len(), exploded))
}

/// Runs `f` for replication indices `0..m` on the current rayon pool and
/// returns the results in index order.
pub(crate) fn replicate<T, F>(m: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..m).into_par_iter().map(f).collect()
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    /// `N` for equidistant schemes, mean cost `ĉ` for adaptive ones.
    pub size: f64,
    pub error: f64,
    /// `(size / log size)^{1/2} · error`.
    pub normalized: f64,
    pub constant: f64,
    /// `normalized / constant`; `None` when the constant is not positive.
    pub ratio: Option<f64>,
}

pub fn normalized_error(size: f64, error: f64, constant: f64) -> Result<ConvergenceRow> {
    if !(size > 1.0) {
        return Err(SdeError::domain(format!("normalization needs N or cost > 1, got {size}")));
    }
    let normalized = (size / size.ln()).sqrt() * error;
    let ratio = (constant > 0.0).then(|| normalized / constant);
    Ok(ConvergenceRow {
        size,
        error,
        normalized,
        constant,
        ratio,
    })
}
