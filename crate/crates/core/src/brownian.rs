//! Seedable Brownian motion with consistent refinement.
//!
//! A [`SiteLedger`] records the values of one `m`-dimensional Brownian path at
//! a growing set of time sites. New sites beyond the last recorded one are
//! sampled with a forward Gaussian increment; sites strictly between two
//! recorded ones are sampled from the exact Brownian-bridge conditional law.
//! Recorded values are never rewritten, so every scheme that reads from the
//! same ledger observes the same path.
//!
//! # Random numbers
//!
//! Each [`RngStream`] `(master_seed, stream_index, substream_index)` seeds a
//! xoshiro256++ generator. The 256-bit state is built from SplitMix64 images
//! of the three indices, which makes the map from triples to states
//! injective. Standard normals are produced by the ziggurat transform of
//! `rand_distr::StandardNormal`, consuming the generator in call order, so a
//! fixed triple and call sequence reproduce the same values bit-for-bit.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Result, SdeError};

/// Generator type behind every [`RngStream`].
pub type StreamGenerator = Xoshiro256PlusPlus;

/// Substream used to draw realized initial values of a replication.
pub const INITIAL_VALUE_SUBSTREAM: u64 = 1;

/// Relative tolerance under which two sites are considered equal.
pub const SITE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    /// Replication id; replication `r` uses stream `r`.
    pub stream_index: u64,
    pub substream_index: u64,
}

fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        RngStream {
            master_seed,
            stream_index,
            substream_index: 0,
        }
    }

    pub fn with_substream(self, substream_index: u64) -> Self {
        RngStream {
            substream_index,
            ..self
        }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn generator(&self) -> StreamGenerator {
        let a = splitmix64(self.master_seed);
        let b = splitmix64(self.stream_index ^ 0xA5A5_A5A5_A5A5_A5A5);
        let c = splitmix64(self.substream_index ^ 0x3C3C_3C3C_C3C3_C3C3);
        let d = splitmix64(a ^ b.rotate_left(17) ^ c.rotate_left(41));
        let mut seed = [0u8; 32];
        for (chunk, word) in seed.chunks_exact_mut(8).zip([a, b, c, d]) {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        Xoshiro256PlusPlus::from_seed(seed)
    }
}

#[inline]
pub(crate) fn standard_normal(rng: &mut StreamGenerator) -> f64 {
    StandardNormal.sample(rng)
}

/// `ℓ·T/n`, computed so that nested grids agree bit-for-bit on common sites.
#[inline]
pub fn grid_time(l: usize, n: usize, horizon: f64) -> f64 {
    (l as f64 / n as f64) * horizon
}

/// Values of one Brownian path at a sorted set of sites in `[0, T]`.
#[derive(Debug, Clone)]
pub struct SiteLedger {
    dim: usize,
    horizon: f64,
    times: Vec<f64>,
    /// Row-major, `dim` entries per site.
    values: Vec<f64>,
    stream: RngStream,
    rng: StreamGenerator,
}

impl SiteLedger {
    /// Ledger containing only `W(0) = 0`.
    pub fn new(stream: RngStream, horizon: f64, dim: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(SdeError::domain(format!("horizon must be positive, got {horizon}")));
        }
        if dim == 0 {
            return Err(SdeError::domain("noise dimension must be positive"));
        }
        Ok(SiteLedger {
            dim,
            horizon,
            times: vec![0.0],
            values: vec![0.0; dim],
            stream,
            rng: stream.generator(),
        })
    }

    /// Ledger seeded with prescribed path values, e.g. to condition on a
    /// known endpoint. `sites` must start at 0 with a zero value.
    pub fn with_sites(
        stream: RngStream,
        horizon: f64,
        dim: usize,
        sites: &[f64],
        values: &[f64],
    ) -> Result<Self> {
        let mut ledger = SiteLedger::new(stream, horizon, dim)?;
        if sites.first() != Some(&0.0) {
            return Err(SdeError::domain("ledger sites must start at 0"));
        }
        if values.len() != sites.len() * dim {
            return Err(SdeError::DimensionMismatch {
                expected: sites.len() * dim,
                actual: values.len(),
            });
        }
        if values[..dim].iter().any(|&v| v != 0.0) {
            return Err(SdeError::domain("W(0) must be the zero vector"));
        }
        if sites.windows(2).any(|w| w[1] <= w[0]) || sites.iter().any(|&t| t > horizon) {
            return Err(SdeError::domain("ledger sites must be strictly increasing within [0, T]"));
        }
        ledger.times = sites.to_vec();
        ledger.values = values.to_vec();
        Ok(ledger)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn stream(&self) -> RngStream {
        self.stream
    }

    /// Number of recorded sites, including 0.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn sites(&self) -> &[f64] {
        &self.times
    }

    /// Recorded value at site index `i`.
    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Index of the recorded site within tolerance of `t`, if any.
    pub fn find(&self, t: f64) -> Option<usize> {
        let tol = SITE_TOLERANCE * self.horizon;
        let i = self.times.partition_point(|&s| s < t - tol);
        (i < self.times.len() && (self.times[i] - t).abs() < tol).then_some(i)
    }

    /// `W(t)`, sampling and recording it if `t` is new.
    pub fn value_at(&mut self, t: f64) -> Result<Vec<f64>> {
        self.observe(&[t])
    }

    /// `W` at every time in `times` (non-decreasing), flattened row-major.
    ///
    /// New sites are sampled in the given order, each conditioned on all
    /// values recorded before it, and merged into the ledger in one pass.
    pub fn observe(&mut self, times: &[f64]) -> Result<Vec<f64>> {
        let dim = self.dim;
        let tol = SITE_TOLERANCE * self.horizon;
        let mut prev = f64::NEG_INFINITY;
        for &t in times {
            if !(0.0..=self.horizon).contains(&t) {
                return Err(SdeError::domain(format!(
                    "time {t} outside [0, {}]",
                    self.horizon
                )));
            }
            if t < prev {
                return Err(SdeError::domain("observation times must be non-decreasing"));
            }
            prev = t;
        }

        let n_old = self.times.len();
        let mut out = Vec::with_capacity(times.len() * dim);
        // Fresh sites with the old index they are inserted before.
        let mut fresh_pos: Vec<usize> = Vec::new();
        let mut fresh_times: Vec<f64> = Vec::new();
        let mut fresh_values: Vec<f64> = Vec::new();
        let mut cursor = 0usize;

        for &t in times {
            while cursor < n_old && self.times[cursor] < t - tol {
                cursor += 1;
            }
            if cursor < n_old && (self.times[cursor] - t).abs() < tol {
                out.extend_from_slice(&self.values[cursor * dim..(cursor + 1) * dim]);
                continue;
            }
            if let Some(&last) = fresh_times.last() {
                if (last - t).abs() < tol {
                    let j = fresh_times.len() - 1;
                    out.extend_from_slice(&fresh_values[j * dim..(j + 1) * dim]);
                    continue;
                }
            }

            // Left neighbour: the newest fresh site if it sits in the same gap.
            let left_fresh = fresh_pos.last() == Some(&cursor);
            let (s, left_start) = if left_fresh {
                let j = fresh_times.len() - 1;
                (fresh_times[j], j * dim)
            } else {
                (self.times[cursor - 1], (cursor - 1) * dim)
            };
            let start = fresh_values.len();
            if cursor < n_old {
                let u = self.times[cursor];
                let weight = (t - s) / (u - s);
                let sd = ((t - s) * (u - t) / (u - s)).sqrt();
                for j in 0..dim {
                    let ws = if left_fresh {
                        fresh_values[left_start + j]
                    } else {
                        self.values[left_start + j]
                    };
                    let wu = self.values[cursor * dim + j];
                    let z = standard_normal(&mut self.rng);
                    fresh_values.push(ws + weight * (wu - ws) + sd * z);
                }
            } else {
                let sd = (t - s).sqrt();
                for j in 0..dim {
                    let ws = if left_fresh {
                        fresh_values[left_start + j]
                    } else {
                        self.values[left_start + j]
                    };
                    let z = standard_normal(&mut self.rng);
                    fresh_values.push(ws + sd * z);
                }
            }
            out.extend_from_slice(&fresh_values[start..start + dim]);
            fresh_pos.push(cursor);
            fresh_times.push(t);
        }

        if !fresh_times.is_empty() {
            self.merge(&fresh_pos, &fresh_times, &fresh_values);
        }
        Ok(out)
    }

    fn merge(&mut self, pos: &[usize], times: &[f64], values: &[f64]) {
        let dim = self.dim;
        let total = self.times.len() + times.len();
        let mut merged_t = Vec::with_capacity(total);
        let mut merged_v = Vec::with_capacity(total * dim);
        let mut old = 0usize;
        for (j, (&p, &t)) in pos.iter().zip(times).enumerate() {
            merged_t.extend_from_slice(&self.times[old..p]);
            merged_v.extend_from_slice(&self.values[old * dim..p * dim]);
            old = p;
            merged_t.push(t);
            merged_v.extend_from_slice(&values[j * dim..(j + 1) * dim]);
        }
        merged_t.extend_from_slice(&self.times[old..]);
        merged_v.extend_from_slice(&self.values[old * dim..]);
        self.times = merged_t;
        self.values = merged_v;
    }
}

/// Brownian path on the equidistant grid `{ℓT/n : ℓ = 0..n}`.
pub fn sample_grid(stream: RngStream, n: usize, horizon: f64, dim: usize) -> Result<SiteLedger> {
    if n == 0 {
        return Err(SdeError::domain("grid size N must be at least 1"));
    }
    let mut ledger = SiteLedger::new(stream, horizon, dim)?;
    let sd = (horizon / n as f64).sqrt();
    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity((n + 1) * dim);
    times.push(0.0);
    values.extend(std::iter::repeat_n(0.0, dim));
    for l in 1..=n {
        times.push(grid_time(l, n, horizon));
        for j in 0..dim {
            let prev = values[(l - 1) * dim + j];
            values.push(prev + sd * standard_normal(&mut ledger.rng));
        }
    }
    ledger.times = times;
    ledger.values = values;
    Ok(ledger)
}
