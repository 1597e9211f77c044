//! Error types shared across the crate.

use thiserror::Error;

use crate::samplers::StageEnsemble;
use crate::schedule::ScheduleTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown {kind} '{name}'")]
    UnknownName { kind: &'static str, name: String },

    #[error(
        "quadrature did not converge: estimate {estimate:e} with error bound \
         {error_bound:e} after {subdivisions} subdivisions"
    )]
    OracleFailure {
        estimate: f64,
        error_bound: f64,
        subdivisions: usize,
    },

    #[error("density pair does not provide an exact stage sampler")]
    NoExactSampler,

    #[error("density pair does not provide a reference sampler")]
    NoReferenceSampler,

    #[error("rejection bound k = {k} violated at x = {x:?}: q/p = {ratio:e}")]
    BoundViolation { k: f64, x: Vec<f64>, ratio: f64 },

    /// The sequential sampler lost every sample. Carries the ensembles
    /// produced before extinction.
    #[error("sequential sampler extinct at stage {stage} (s = {s})")]
    SamplerExtinct {
        stage: usize,
        s: f64,
        survivors: Vec<StageEnsemble>,
    },

    /// A schedule run failed mid-way; the partial trace is attached.
    #[error("schedule aborted at stage {stage}: {cause}")]
    ScheduleAborted {
        stage: usize,
        partial: Box<ScheduleTrace>,
        cause: Box<Error>,
    },

    #[error(
        "posterior grid at step {step} covers mass {grid_mass:e} < 0.999 of the \
         estimated normalization {z_bar:e}"
    )]
    GridCoverage {
        step: usize,
        grid_mass: f64,
        z_bar: f64,
    },
}
