use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::schemes::default_kn;

use super::CliError;

/// Largest accepted `ref_exp`; `2^28` fine sites already need ~4 GB.
const MAX_REF_EXP: u32 = 28;

/// Coarse step rule of the adaptive scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KnRule {
    /// Must be `"default"`: `k_N = min(N, ⌈N (log(N+1))^{-1/2}⌉)`.
    Named(String),
    /// One `k` per entry of the N list.
    Explicit(Vec<usize>),
}

impl Default for KnRule {
    fn default() -> Self {
        KnRule::Named("default".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssumptionConfig {
    /// Khasminskii exponent; falls back to the model's claimed value.
    pub p: Option<f64>,
    /// Monotonicity exponent; falls back to the model's claimed value.
    pub a: Option<f64>,
    pub constant: f64,
    pub bound: f64,
    pub samples: usize,
}

impl Default for AssumptionConfig {
    fn default() -> Self {
        AssumptionConfig {
            p: None,
            a: None,
            constant: 100.0,
            bound: 50.0,
            samples: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: String,
    /// Positional model parameters; empty selects the model defaults.
    pub model_params: Vec<f64>,
    /// `identity`, `sabanis` or `sabanis(r)`.
    pub family: String,
    /// Taming exponent used by a bare `sabanis`.
    pub family_r: f64,
    pub q: f64,
    /// `equidistant` or `adaptive`.
    pub scheme: String,
    pub n_list: Vec<usize>,
    pub replications: usize,
    /// Reference and constants grids have `2^ref_exp` steps.
    pub ref_exp: u32,
    pub kn_rule: KnRule,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// `family` (fine equidistant scheme) or `exact` (closed form).
    pub reference: String,
    /// Family of the fine reference scheme; defaults to `family`.
    pub reference_family: Option<String>,
    /// Intervals per simulated Brownian bridge.
    pub bridge_grid: usize,
    pub assumptions: AssumptionConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: "heston32".into(),
            model_params: Vec::new(),
            family: "sabanis".into(),
            family_r: 1.0,
            q: 2.0,
            scheme: "equidistant".into(),
            n_list: (6..=16).map(|e| 1usize << e).collect(),
            replications: 500,
            ref_exp: 20,
            kn_rule: KnRule::default(),
            seed: 0,
            out_dir: PathBuf::from("."),
            reference: "family".into(),
            reference_family: None,
            bridge_grid: 1 << 10,
            assumptions: AssumptionConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn reference_steps(&self) -> usize {
        1usize << self.ref_exp.min(MAX_REF_EXP)
    }

    /// Coarse step counts, one per N.
    pub fn coarse_steps(&self) -> Result<Vec<usize>, CliError> {
        match &self.kn_rule {
            KnRule::Named(_) => self
                .n_list
                .iter()
                .map(|&n| default_kn(n).map_err(|e| CliError::Config(format!("kn_rule: {e}"))))
                .collect(),
            KnRule::Explicit(ks) => Ok(ks.clone()),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n_list.is_empty() {
            return Err("N list empty".into());
        }
        if let Some(n) = self.n_list.iter().find(|&&n| n < 2) {
            return Err(format!("N list entries must be >= 2, got {n}"));
        }
        if self.replications < 2 {
            return Err(format!("M must be >= 2, got {}", self.replications));
        }
        if !(self.q >= 1.0 && self.q.is_finite()) {
            return Err(format!("q must be a finite number >= 1, got {}", self.q));
        }
        if self.ref_exp > MAX_REF_EXP {
            return Err(format!("ref_exp must be <= {MAX_REF_EXP}, got {}", self.ref_exp));
        }
        let max_n = *self.n_list.iter().max().expect("non-empty");
        if self.reference_steps() < max_n {
            return Err(format!(
                "N_ref = 2^{} is smaller than the largest N = {max_n}",
                self.ref_exp
            ));
        }
        if !matches!(self.scheme.as_str(), "equidistant" | "adaptive") {
            return Err(format!("scheme: unknown scheme `{}`", self.scheme));
        }
        if !matches!(self.reference.as_str(), "family" | "exact") {
            return Err(format!("reference: unknown reference `{}`", self.reference));
        }
        match &self.kn_rule {
            KnRule::Named(s) if s != "default" => return Err(format!("kn_rule: unknown rule `{s}`")),
            KnRule::Named(_) => {}
            KnRule::Explicit(ks) => {
                if ks.len() != self.n_list.len() {
                    return Err("kn_rule: list length differs from the N list".into());
                }
                if let Some((k, n)) = ks.iter().zip(&self.n_list).find(|(k, n)| **k == 0 || k > n) {
                    return Err(format!("kn_rule: k = {k} not in [1, N = {n}]"));
                }
            }
        }
        if self.bridge_grid == 0 {
            return Err("bridge_grid must be positive".into());
        }
        Ok(())
    }
}
