//! Equidistant and adaptive coefficient-modified Euler–Maruyama schemes.
//!
//! Both schemes read the driving Brownian motion from a [`SiteLedger`], so a
//! coarse scheme, its adaptive refinement and a fine reference evaluated on
//! one ledger are pathwise coupled. The evaluation cost `ν` counts the
//! distinct Brownian sites in `(0, T]` a scheme uses.
//!
//! The adaptive scheme runs in two phases. Phase 1 is the equidistant scheme
//! with `k` steps and level-`k` coefficients. Phase 2 spends a budget of
//! `N·A^{2q/(q+2)}` extra sites, distributed over the coarse cells in
//! proportion to `|σ_k(t_ℓ, X̃_k(t_ℓ))|²_{∞,2}`, and steps through each cell
//! with the coefficients frozen at the cell's left coarse site.

use crate::brownian::{grid_time, SiteLedger};
use crate::error::{Result, SdeError};
use crate::model::infty2_norm_sq;
use crate::taming::CoefficientFamily;

/// Relative slack for the cost-envelope check; only absorbs the rounding
/// of `Σ_ℓ N·A^ρ·n_ℓ²/Σn²` against `N·A^ρ`.
const ENVELOPE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeTag {
    Equidistant { n: usize },
    Adaptive { n: usize, k: usize, q: f64 },
}

/// Piecewise-linear scheme output.
#[derive(Debug, Clone)]
pub struct Trajectory {
    sites: Vec<f64>,
    /// Row-major, `dim` entries per site; NaN after an explosion.
    values: Vec<f64>,
    dim: usize,
    eval_count: usize,
    scheme: SchemeTag,
    exploded_at: Option<usize>,
}

impl Trajectory {
    pub fn sites(&self) -> &[f64] {
        &self.sites
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of Brownian evaluations `ν`, excluding `t = 0`.
    pub fn eval_count(&self) -> usize {
        self.eval_count
    }

    pub fn scheme(&self) -> SchemeTag {
        self.scheme
    }

    /// Index of the first non-finite state, if the recursion blew up.
    pub fn exploded_at(&self) -> Option<usize> {
        self.exploded_at
    }

    pub fn is_exploded(&self) -> bool {
        self.exploded_at.is_some()
    }

    pub fn horizon(&self) -> f64 {
        *self.sites.last().expect("trajectory has sites")
    }

    /// Linear interpolation between the bracketing sites.
    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>> {
        let horizon = self.horizon();
        if !(0.0..=horizon).contains(&t) {
            return Err(SdeError::domain(format!("time {t} outside [0, {horizon}]")));
        }
        let j = self.sites.partition_point(|&s| s <= t) - 1;
        let mut out = vec![0.0; self.dim];
        self.interpolate_into(j, t, &mut out);
        Ok(out)
    }

    #[inline]
    fn interpolate_into(&self, j: usize, t: f64, out: &mut [f64]) {
        let d = self.dim;
        let left = &self.values[j * d..(j + 1) * d];
        if t == self.sites[j] || j + 1 == self.sites.len() {
            out.copy_from_slice(left);
            return;
        }
        let right = &self.values[(j + 1) * d..(j + 2) * d];
        let w = (t - self.sites[j]) / (self.sites[j + 1] - self.sites[j]);
        for i in 0..d {
            out[i] = left[i] + w * (right[i] - left[i]);
        }
    }

    /// `max_i max_c |reference_c(t_i) − self_c(t_i)|` over sorted `times`
    /// with row-major reference `values`.
    pub fn sup_distance(&self, times: &[f64], values: &[f64]) -> f64 {
        let d = self.dim;
        let mut j = 0usize;
        let mut buf = vec![0.0; d];
        let mut sup = 0.0f64;
        for (i, &t) in times.iter().enumerate() {
            while j + 1 < self.sites.len() && self.sites[j + 1] <= t {
                j += 1;
            }
            self.interpolate_into(j, t, &mut buf);
            for c in 0..d {
                let diff = (values[i * d + c] - buf[c]).abs();
                // NaN propagates as an infinite distance
                if !(diff <= sup) {
                    sup = if diff.is_nan() { f64::INFINITY } else { diff };
                }
            }
        }
        sup
    }
}

fn check_ledger(family: &CoefficientFamily, ledger: &SiteLedger) -> Result<()> {
    let model = family.model();
    if ledger.dim() != model.noise_dim() {
        return Err(SdeError::DimensionMismatch {
            expected: model.noise_dim(),
            actual: ledger.dim(),
        });
    }
    if ledger.horizon() != model.horizon() {
        return Err(SdeError::domain(format!(
            "ledger horizon {} differs from model horizon {}",
            ledger.horizon(),
            model.horizon()
        )));
    }
    Ok(())
}

/// Equidistant modified EM scheme with `n` steps and level-`n` coefficients.
pub fn equidistant_em(
    family: &CoefficientFamily,
    n: usize,
    ledger: &mut SiteLedger,
) -> Result<Trajectory> {
    if n == 0 {
        return Err(SdeError::domain("step count N must be at least 1"));
    }
    check_ledger(family, ledger)?;
    let model = family.model();
    let (d, m, horizon) = (model.state_dim(), model.noise_dim(), model.horizon());
    let sites: Vec<f64> = (0..=n).map(|l| grid_time(l, n, horizon)).collect();
    let w = ledger.observe(&sites)?;
    let h = horizon / n as f64;

    let mut values = Vec::with_capacity((n + 1) * d);
    values.extend(model.initial_value(ledger.stream()));
    let mut x = values.clone();
    let mut mu = vec![0.0; d];
    let mut sigma = vec![0.0; d * m];
    let mut exploded_at = None;

    for l in 0..n {
        family.evaluate_into(n, sites[l], &x, &mut mu, &mut sigma);
        let dw_start = l * m;
        let mut finite = true;
        for i in 0..d {
            let mut next = x[i] + mu[i] * h;
            for j in 0..m {
                next += sigma[i * m + j] * (w[dw_start + m + j] - w[dw_start + j]);
            }
            finite &= next.is_finite();
            x[i] = next;
        }
        if !finite {
            exploded_at = Some(l + 1);
            values.resize((n + 1) * d, f64::NAN);
            break;
        }
        values.extend_from_slice(&x);
    }

    Ok(Trajectory {
        sites,
        values,
        dim: d,
        eval_count: n,
        scheme: SchemeTag::Equidistant { n },
        exploded_at,
    })
}

/// `min(N, ⌈N·(log(N+1))^{-1/2}⌉)`, the default coarse step count.
pub fn default_kn(n: usize) -> Result<usize> {
    if n < 2 {
        return Err(SdeError::domain(format!("default k_N needs N >= 2, got {n}")));
    }
    let nf = n as f64;
    let k = (nf / (nf + 1.0).ln().sqrt()).ceil() as usize;
    Ok(k.clamp(1, n))
}

/// Allocation of extra Brownian sites over the coarse cells.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptivePlan {
    k: usize,
    n: usize,
    q: f64,
    horizon: f64,
    scale: f64,
    eta: Vec<usize>,
}

impl AdaptivePlan {
    /// Coarse step count `k`.
    pub fn coarse_steps(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `A = ((T/k)·Σ_ℓ |σ_k(t_ℓ, X̃_k(t_ℓ))|²_{∞,2})^{1/2}`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Interior sites `η_ℓ` added to each coarse cell.
    pub fn eta(&self) -> &[usize] {
        &self.eta
    }

    /// `N·A^{2q/(q+2)}`.
    pub fn budget(&self) -> f64 {
        self.n as f64 * self.scale.powf(2.0 * self.q / (self.q + 2.0))
    }

    /// `ν = k + Σ_ℓ η_ℓ`.
    pub fn eval_count(&self) -> usize {
        self.k + self.eta.iter().sum::<usize>()
    }

    /// `τ_{ℓ,0} < … < τ_{ℓ,η_ℓ+1}`, equidistant within cell `ℓ`.
    pub fn cell_sites(&self, l: usize) -> Vec<f64> {
        let start = grid_time(l, self.k, self.horizon);
        let end = grid_time(l + 1, self.k, self.horizon);
        let width = self.horizon / self.k as f64;
        let parts = (self.eta[l] + 1) as f64;
        let mut out = Vec::with_capacity(self.eta[l] + 2);
        out.push(start);
        out.extend((1..=self.eta[l]).map(|kappa| start + width * kappa as f64 / parts));
        out.push(end);
        out
    }

    /// All adaptive sites in `[0, T]`, starting with 0.
    pub fn sites(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.eval_count() + 1);
        out.push(0.0);
        for l in 0..self.k {
            out.extend_from_slice(&self.cell_sites(l)[1..]);
        }
        out
    }

    /// `[max{k, k + 1_{A>0}(N·A^ρ − k)}, k + N·A^ρ]`.
    pub fn cost_bounds(&self) -> (f64, f64) {
        let k = self.k as f64;
        let budget = self.budget();
        let lower = if self.scale > 0.0 { k.max(budget) } else { k };
        (lower, k + budget)
    }

    pub fn check_cost_bounds(&self) -> Result<()> {
        let nu = self.eval_count();
        let (lower, upper) = self.cost_bounds();
        let slack = ENVELOPE_SLACK * upper.max(1.0);
        let nu_f = nu as f64;
        if nu_f > upper + slack || nu_f < lower - slack {
            return Err(SdeError::CostEnvelope { nu, lower, upper });
        }
        Ok(())
    }
}

/// Site allocation from the coarse diffusion norms `|σ_k(t_ℓ, X̃_k(t_ℓ))|_{∞,2}`.
pub fn plan_adaptive(norms: &[f64], n: usize, q: f64, horizon: f64) -> Result<AdaptivePlan> {
    let squares: Vec<f64> = norms.iter().map(|v| v * v).collect();
    if norms.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(SdeError::domain("coarse norms must be finite and non-negative"));
    }
    plan_from_squares(&squares, n, q, horizon)
}

fn plan_from_squares(squares: &[f64], n: usize, q: f64, horizon: f64) -> Result<AdaptivePlan> {
    let k = squares.len();
    if k == 0 {
        return Err(SdeError::domain("adaptive plan needs at least one coarse cell"));
    }
    if !(q >= 1.0) {
        return Err(SdeError::domain(format!("error exponent q must be >= 1, got {q}")));
    }
    let total: f64 = squares.iter().sum();
    let scale = (horizon / k as f64 * total).sqrt();
    let mut plan = AdaptivePlan {
        k,
        n,
        q,
        horizon,
        scale,
        eta: vec![0; k],
    };
    if scale > 0.0 {
        let budget = plan.budget();
        for (eta, &s) in plan.eta.iter_mut().zip(squares) {
            *eta = (budget * s / total).floor() as usize;
        }
    }
    Ok(plan)
}

/// Adaptive modified EM scheme; the plan is `None` if the coarse phase
/// exploded.
///
/// The returned plan always satisfies the per-realization cost envelope;
/// a violation is reported as [`SdeError::CostEnvelope`].
pub fn adaptive_em(
    family: &CoefficientFamily,
    n: usize,
    q: f64,
    k: usize,
    ledger: &mut SiteLedger,
) -> Result<(Trajectory, Option<AdaptivePlan>)> {
    if n == 0 || k == 0 {
        return Err(SdeError::domain("adaptive scheme needs N >= 1 and k >= 1"));
    }
    if !(q >= 1.0) {
        return Err(SdeError::domain(format!("error exponent q must be >= 1, got {q}")));
    }
    let coarse = equidistant_em(family, k, ledger)?;
    let tag = SchemeTag::Adaptive { n, k, q };
    if coarse.is_exploded() {
        return Ok((
            Trajectory {
                scheme: tag,
                ..coarse
            },
            None,
        ));
    }

    let model = family.model();
    let (d, m) = (model.state_dim(), model.noise_dim());
    // Coefficients frozen at the left coarse site of each cell.
    let mut mu = vec![0.0; k * d];
    let mut sigma = vec![0.0; k * d * m];
    let mut squares = vec![0.0; k];
    for l in 0..k {
        family.evaluate_into(
            k,
            coarse.sites[l],
            coarse.value(l),
            &mut mu[l * d..(l + 1) * d],
            &mut sigma[l * d * m..(l + 1) * d * m],
        );
        squares[l] = infty2_norm_sq(&sigma[l * d * m..(l + 1) * d * m], m);
    }
    if squares.iter().any(|s| !s.is_finite()) {
        let mut traj = coarse;
        traj.scheme = tag;
        traj.exploded_at = Some(0);
        return Ok((traj, None));
    }
    let plan = plan_from_squares(&squares, n, q, model.horizon())?;
    plan.check_cost_bounds()?;

    let sites = plan.sites();
    let w = ledger.observe(&sites)?;
    let mut values = Vec::with_capacity(sites.len() * d);
    values.extend_from_slice(coarse.value(0));
    let mut x = coarse.value(0).to_vec();
    let mut exploded_at = None;
    let mut idx = 0usize;

    'cells: for l in 0..k {
        let mu_l = &mu[l * d..(l + 1) * d];
        let sig_l = &sigma[l * d * m..(l + 1) * d * m];
        for _ in 0..=plan.eta[l] {
            let dt = sites[idx + 1] - sites[idx];
            let mut finite = true;
            for i in 0..d {
                let mut next = x[i] + mu_l[i] * dt;
                for j in 0..m {
                    next += sig_l[i * m + j] * (w[(idx + 1) * m + j] - w[idx * m + j]);
                }
                finite &= next.is_finite();
                x[i] = next;
            }
            idx += 1;
            if !finite {
                exploded_at = Some(idx);
                values.resize(sites.len() * d, f64::NAN);
                break 'cells;
            }
            values.extend_from_slice(&x);
        }
    }

    let traj = Trajectory {
        eval_count: plan.eval_count(),
        sites,
        values,
        dim: d,
        scheme: tag,
        exploded_at,
    };
    Ok((traj, Some(plan)))
}
