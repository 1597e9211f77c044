//! Staged bridging ("homotopy") estimators for unknown normalization constants.
//!
//! The core object is a pair of densities: a target `q` with unknown integral
//! `Z1` and a reference `p` with known integral `Z0`. A monotone path
//! `h : [0,1] -> [0,1]` defines the bridging family
//! `theta_s ∝ q^{h(s)} p^{1-h(s)}`, and a staged schedule accumulates the
//! per-stage expectation ratios `mu_m = Z_{h(s_{m+1})} / Z_{h(s_m)}` from
//! sample averages, yielding `log Z1 = log Z0 + Σ log mu_m`.
//!
//! Modules:
//!
//! - [`density`]: density pairs, bridging paths, and the built-in catalog.
//! - [`oracle`]: adaptive quadrature ground truth (tests and diagnostics only).
//! - [`samplers`]: per-stage samplers, the sequential importance-rejection
//!   sampler, and systematic resampling.
//! - [`schedule`]: the staged estimator, its error model, and replicate studies.
//! - [`bayes`]: evidence estimation via prior-, likelihood-, and
//!   auxiliary-anchored schedules.
//! - [`filter`]: bootstrap and bridging-based particle filters for 1-D
//!   state-space models.

pub mod bayes;
pub mod density;
pub mod error;
pub mod filter;
pub mod grid;
pub mod oracle;
pub mod samplers;
pub mod schedule;
pub mod stats;

pub use density::{builtin_densities, density_by_name, DensityPair, HomotopyFn, HomotopyPath, LogDensity};
pub use error::{Error, Result};
pub use oracle::{Domain, QuadratureSpec};
pub use samplers::{MetropolisTuning, RngStream, SampleOrigin, StageEnsemble};
pub use schedule::{ErrorModel, SamplerChoice, ScheduleConfig, ScheduleTrace};
