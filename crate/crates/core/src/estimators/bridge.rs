//! Extremes of independent Brownian bridges on `[0, 1]`.
//!
//! A bridge is simulated on a uniform grid with `grid` intervals as
//! `B_j = W_j − (j/grid) W_grid`, and its sup is taken over the grid points.
//! The discrete sup is biased low by roughly `0.58·grid^{-1/2}`; this is
//! not corrected.

use super::{powered_mean, pow_exact, replicate, EstimateWithCi};
use crate::brownian::{standard_normal, RngStream, StreamGenerator};
use crate::error::{Result, SdeError};

fn check_common(q: f64, m: usize, grid: usize) -> Result<()> {
    if !(q >= 1.0) {
        return Err(SdeError::domain(format!("q must be >= 1, got {q}")));
    }
    if m < 2 {
        return Err(SdeError::domain("need at least 2 replications"));
    }
    if grid == 0 {
        return Err(SdeError::domain("bridge grid needs at least one interval"));
    }
    Ok(())
}

/// `sup_j |B_j|` of one simulated bridge; `buf.len()` is the grid size.
#[inline]
fn bridge_sup(rng: &mut StreamGenerator, buf: &mut [f64]) -> f64 {
    let grid = buf.len();
    let sd = (1.0 / grid as f64).sqrt();
    let mut w = 0.0;
    for slot in buf.iter_mut() {
        w += sd * standard_normal(rng);
        *slot = w;
    }
    let slope = w / grid as f64;
    let mut sup = 0.0f64;
    for (j, &v) in buf.iter().enumerate() {
        sup = sup.max((v - slope * (j + 1) as f64).abs());
    }
    sup
}

/// `(log N)^{-1/2} (E[max_{ℓ≤N} sup|B_ℓ|^q])^{1/q}` for every `N` in `ns`.
///
/// Each replication simulates `max(ns)` bridges once; smaller `N` use the
/// leading bridges of the same replication.
pub fn bridge_extrema_ratios(q: f64, ns: &[usize], m: usize, grid: usize, seed: u64) -> Result<Vec<EstimateWithCi>> {
    check_common(q, m, grid)?;
    if ns.is_empty() {
        return Err(SdeError::domain("N list empty"));
    }
    if let Some(&n) = ns.iter().find(|&&n| n < 2) {
        return Err(SdeError::domain(format!("bridge count N must be >= 2, got {n}")));
    }
    let mut order: Vec<usize> = (0..ns.len()).collect();
    order.sort_by_key(|&i| ns[i]);
    let n_max = ns[order[ns.len() - 1]];

    let samples = replicate(m, |r| {
        let mut rng = RngStream::new(seed, r as u64).generator();
        let mut buf = vec![0.0; grid];
        let mut out = vec![0.0; ns.len()];
        let mut max = 0.0f64;
        let mut next = 0;
        for l in 1..=n_max {
            max = max.max(bridge_sup(&mut rng, &mut buf));
            while next < order.len() && ns[order[next]] == l {
                out[order[next]] = pow_exact(max, q);
                next += 1;
            }
        }
        out
    });

    ns.iter()
        .enumerate()
        .map(|(j, &n)| {
            let col: Vec<Option<f64>> = samples.iter().map(|s| Some(s[j])).collect();
            powered_mean(&col, 1.0 / q, 1.0 / (n as f64).ln().sqrt())
        })
        .collect()
}

pub fn bridge_extrema_ratio(q: f64, n: usize, m: usize, grid: usize, seed: u64) -> Result<EstimateWithCi> {
    Ok(bridge_extrema_ratios(q, &[n], m, grid, seed)?[0])
}

/// `E[sup_{[0,1]} |B|]` for a single bridge.
pub fn bridge_sup_mean(m: usize, grid: usize, seed: u64) -> Result<EstimateWithCi> {
    check_common(1.0, m, grid)?;
    let samples = replicate(m, |r| {
        let mut rng = RngStream::new(seed, r as u64).generator();
        let mut buf = vec![0.0; grid];
        Some(bridge_sup(&mut rng, &mut buf))
    });
    powered_mean(&samples, 1.0, 1.0)
}

/// `(E[max_ℓ (|w_ℓ| sup|B_ℓ|)^q])^{1/q}` over independent bridges.
pub fn weighted_bridge_extrema(weights: &[f64], q: f64, m: usize, grid: usize, seed: u64) -> Result<EstimateWithCi> {
    check_common(q, m, grid)?;
    if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
        return Err(SdeError::domain("weights must be finite and non-empty"));
    }
    let samples = replicate(m, |r| {
        let mut rng = RngStream::new(seed, r as u64).generator();
        let mut buf = vec![0.0; grid];
        let max = weights
            .iter()
            .map(|w| w.abs() * bridge_sup(&mut rng, &mut buf))
            .fold(0.0, f64::max);
        Some(pow_exact(max, q))
    });
    powered_mean(&samples, 1.0 / q, 1.0)
}
