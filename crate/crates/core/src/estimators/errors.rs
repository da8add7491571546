//! Sup-error and cost estimation on coupled Brownian paths.
//!
//! Each replication samples `W` on the fine grid with `N_ref` steps and
//! computes the reference there. Every scheme under study reads the same
//! ledger: equidistant grids nest into the fine grid, adaptive sites are
//! filled in by bridge sampling on a per-scheme copy of the ledger. The
//! error sample is `max` over fine sites of the component-max distance,
//! with scheme values interpolated piecewise linearly.

use super::constants::{constant_sample, ConstantSamples};
use super::{clt_ci, powered_mean, pow_exact, replicate, ConstantsEstimate, EstimateWithCi};
use crate::brownian::{sample_grid, RngStream, SiteLedger};
use crate::error::{Result, SdeError};
use crate::schemes::{adaptive_em, equidistant_em, Trajectory};
use crate::taming::CoefficientFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeSpec {
    Equidistant { n: usize },
    /// Adaptive scheme with target `N` and coarse step count `k`.
    Adaptive { n: usize, k: usize },
}

impl SchemeSpec {
    pub fn n(&self) -> usize {
        match *self {
            SchemeSpec::Equidistant { n } | SchemeSpec::Adaptive { n, .. } => n,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Reference {
    /// Equidistant scheme of the given family with `N_ref` steps.
    Family(CoefficientFamily),
    /// The model's closed-form solution at the fine sites.
    Exact,
}

#[derive(Debug, Clone)]
pub struct ErrorStudy {
    pub family: CoefficientFamily,
    pub reference: Reference,
    pub q: f64,
    pub replications: usize,
    pub reference_steps: usize,
    pub seed: u64,
}

impl ErrorStudy {
    /// Study whose reference is the family's own scheme on the fine grid.
    pub fn new(family: CoefficientFamily, q: f64, replications: usize, reference_steps: usize, seed: u64) -> Self {
        ErrorStudy {
            reference: Reference::Family(family.clone()),
            family,
            q,
            replications,
            reference_steps,
            seed,
        }
    }

    pub fn with_reference(mut self, reference: Reference) -> Self {
        self.reference = reference;
        self
    }

    fn validate(&self, specs: &[SchemeSpec]) -> Result<()> {
        if !(self.q >= 1.0) {
            return Err(SdeError::domain(format!("q must be >= 1, got {}", self.q)));
        }
        if self.replications < 2 {
            return Err(SdeError::domain("need at least 2 replications"));
        }
        if self.reference_steps == 0 {
            return Err(SdeError::domain("reference grid needs at least one step"));
        }
        if let Reference::Family(f) = &self.reference {
            let (a, b) = (f.model(), self.family.model());
            if a.state_dim() != b.state_dim() || a.noise_dim() != b.noise_dim() || a.horizon() != b.horizon() {
                return Err(SdeError::domain("reference family must share dimensions and horizon"));
            }
        }
        if matches!(self.reference, Reference::Exact) && self.family.model().exact_solution().is_none() {
            return Err(SdeError::NoExactSolution(self.family.model().name().to_string()));
        }
        for spec in specs {
            match *spec {
                SchemeSpec::Equidistant { n } => {
                    if n == 0 || self.reference_steps % n != 0 {
                        return Err(SdeError::domain(format!(
                            "N = {n} does not divide N_ref = {}",
                            self.reference_steps
                        )));
                    }
                }
                SchemeSpec::Adaptive { n, k } => {
                    if n == 0 || k == 0 || k > self.reference_steps {
                        return Err(SdeError::domain(format!("invalid adaptive scheme N = {n}, k = {k}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Reference values on the fine grid, or `None` if the reference blew up.
    fn reference_values(&self, ledger: &mut SiteLedger) -> Result<Option<Vec<f64>>> {
        let model = self.family.model();
        match &self.reference {
            Reference::Family(f) => {
                let tr = equidistant_em(f, self.reference_steps, ledger)?;
                Ok((!tr.is_exploded()).then(|| tr.values().to_vec()))
            }
            Reference::Exact => {
                let exact = model
                    .exact_solution()
                    .ok_or_else(|| SdeError::NoExactSolution(model.name().to_string()))?;
                let d = model.state_dim();
                let xi = model.initial_value(ledger.stream());
                let mut out = vec![0.0; ledger.len() * d];
                for i in 0..ledger.len() {
                    exact.evaluate(ledger.sites()[i], ledger.value(i), &xi, &mut out[i * d..(i + 1) * d]);
                }
                Ok(out.iter().all(|v| v.is_finite()).then_some(out))
            }
        }
    }
}

/// Per-replication cost envelope of an adaptive run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeRecord {
    pub nu: usize,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeEstimate {
    pub spec: SchemeSpec,
    pub error: EstimateWithCi,
    /// Mean number of Brownian evaluations over all replications.
    pub cost: EstimateWithCi,
    /// One entry per adaptive replication whose coarse phase stayed finite.
    pub envelopes: Vec<EnvelopeRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub schemes: Vec<SchemeEstimate>,
    /// Constants estimated along the reference trajectories.
    pub constants: ConstantsEstimate,
}

struct RepOutcome {
    constants: (f64, f64),
    errors: Vec<Option<f64>>,
    costs: Vec<f64>,
    envelopes: Vec<Option<EnvelopeRecord>>,
}

fn run_scheme(
    study: &ErrorStudy,
    spec: SchemeSpec,
    base: &mut SiteLedger,
) -> Result<(Trajectory, Option<EnvelopeRecord>)> {
    match spec {
        SchemeSpec::Equidistant { n } => Ok((equidistant_em(&study.family, n, base)?, None)),
        SchemeSpec::Adaptive { n, k } => {
            let mut ledger = base.clone();
            let (tr, plan) = adaptive_em(&study.family, n, study.q, k, &mut ledger)?;
            let env = plan.map(|p| {
                let (lower, upper) = p.cost_bounds();
                EnvelopeRecord {
                    nu: p.eval_count(),
                    lower,
                    upper,
                }
            });
            Ok((tr, env))
        }
    }
}

/// Estimates `e_q` and the mean cost of every scheme in `specs` on shared
/// coupled paths.
///
/// Exploded scheme replications are excluded from the error and counted;
/// an exploded reference fails the study.
pub fn estimate_errors(study: &ErrorStudy, specs: &[SchemeSpec]) -> Result<StudyResult> {
    study.validate(specs)?;
    let model = study.family.model();
    let (horizon, m_noise) = (model.horizon(), model.noise_dim());
    let q = study.q;

    let outcomes = replicate(study.replications, |i| -> Result<RepOutcome> {
        let mut ledger = sample_grid(RngStream::new(study.seed, i as u64), study.reference_steps, horizon, m_noise)?;
        let reference = study
            .reference_values(&mut ledger)?
            .ok_or(SdeError::ReferenceExploded { replication: i })?;
        let fine_sites = ledger.sites().to_vec();
        let constants = constant_sample(model, &fine_sites, &reference, q);
        let mut out = RepOutcome {
            constants,
            errors: Vec::with_capacity(specs.len()),
            costs: Vec::with_capacity(specs.len()),
            envelopes: Vec::with_capacity(specs.len()),
        };
        for &spec in specs {
            let (tr, env) = run_scheme(study, spec, &mut ledger)?;
            out.costs.push(tr.eval_count() as f64);
            out.envelopes.push(env);
            let err = if tr.is_exploded() {
                None
            } else {
                Some(pow_exact(tr.sup_distance(&fine_sites, &reference), q)).filter(|e| e.is_finite())
            };
            out.errors.push(err);
        }
        Ok(out)
    });

    let m = study.replications;
    let mut constants = ConstantSamples::new(q, horizon, m);
    let mut errors = vec![Vec::with_capacity(m); specs.len()];
    let mut costs = vec![Vec::with_capacity(m); specs.len()];
    let mut envelopes = vec![Vec::new(); specs.len()];
    for o in outcomes {
        let o = o?;
        let c = o.constants;
        constants.push((c.0.is_finite() && c.1.is_finite()).then_some(c));
        for j in 0..specs.len() {
            errors[j].push(o.errors[j]);
            costs[j].push(o.costs[j]);
            envelopes[j].extend(o.envelopes[j]);
        }
    }

    let (ad, eq) = constants.estimate(m)?;
    let mut schemes = Vec::with_capacity(specs.len());
    for (j, &spec) in specs.iter().enumerate() {
        let error = powered_mean(&errors[j], 1.0 / q, 1.0)?;
        let mut cost = clt_ci(&costs[j])?;
        cost.exploded = error.exploded;
        schemes.push(SchemeEstimate {
            spec,
            error,
            cost,
            envelopes: std::mem::take(&mut envelopes[j]),
        });
    }
    Ok(StudyResult {
        schemes,
        constants: ConstantsEstimate { ad, eq, samples: constants },
    })
}

pub fn estimate_error(study: &ErrorStudy, spec: SchemeSpec) -> Result<SchemeEstimate> {
    let mut r = estimate_errors(study, &[spec])?;
    Ok(r.schemes.remove(0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostEstimate {
    pub n: usize,
    pub k: usize,
    pub cost: EstimateWithCi,
    pub envelopes: Vec<EnvelopeRecord>,
}

/// Mean number of evaluations `ĉ` of the adaptive scheme for each `(N, k)`.
pub fn estimate_cost(
    family: &CoefficientFamily,
    q: f64,
    m: usize,
    sizes: &[(usize, usize)],
    seed: u64,
) -> Result<Vec<CostEstimate>> {
    if m < 2 {
        return Err(SdeError::domain("need at least 2 replications"));
    }
    let model = family.model();
    let outcomes = replicate(m, |i| -> Result<Vec<(f64, Option<EnvelopeRecord>)>> {
        let stream = RngStream::new(seed, i as u64);
        sizes
            .iter()
            .map(|&(n, k)| {
                let mut ledger = SiteLedger::new(stream, model.horizon(), model.noise_dim())?;
                let (tr, plan) = adaptive_em(family, n, q, k, &mut ledger)?;
                let env = plan.map(|p| {
                    let (lower, upper) = p.cost_bounds();
                    EnvelopeRecord {
                        nu: p.eval_count(),
                        lower,
                        upper,
                    }
                });
                Ok((tr.eval_count() as f64, env))
            })
            .collect()
    });
    let mut costs = vec![Vec::with_capacity(m); sizes.len()];
    let mut envelopes = vec![Vec::new(); sizes.len()];
    for o in outcomes {
        for (j, (c, env)) in o?.into_iter().enumerate() {
            costs[j].push(c);
            envelopes[j].extend(env);
        }
    }
    sizes
        .iter()
        .enumerate()
        .map(|(j, &(n, k))| {
            let mut cost = clt_ci(&costs[j])?;
            cost.exploded = m - envelopes[j].len();
            Ok(CostEstimate {
                n,
                k,
                cost,
                envelopes: std::mem::take(&mut envelopes[j]),
            })
        })
        .collect()
}
