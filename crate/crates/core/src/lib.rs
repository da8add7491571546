//! Strongly asymptotically optimal Euler–Maruyama schemes for Itô SDEs under
//! the supremum error criterion.
//!
//! The crate is organised bottom-up:
//!
//! - [`brownian`]: seedable Brownian paths with exact bridge refinement, so
//!   coarse, adaptive and reference schemes observe one common path.
//! - [`model`]: SDE definitions, the row-max norm `|A|_{∞,2}`, built-in
//!   models and sampling-based assumption falsifiers.
//! - [`taming`]: the coefficient families `N ↦ (μ_N, σ_N)`.
//! - [`schemes`]: equidistant and adaptive coefficient-modified EM schemes.
//! - [`estimators`]: Monte Carlo estimators for asymptotic constants, errors,
//!   costs and Brownian-bridge extrema.
//! - [`cli`]: the config-driven experiment runner behind `sde-asympt`.

pub mod brownian;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod model;
pub mod schemes;
pub mod taming;

pub use brownian::{sample_grid, RngStream, SiteLedger};
pub use error::{Result, SdeError};
pub use model::{builtin, infty2_norm, AssumptionMeta, SdeModel};
pub use schemes::{adaptive_em, default_kn, equidistant_em, plan_adaptive, AdaptivePlan, Trajectory};
pub use taming::{CoefficientFamily, Taming};
