//! Evidence estimation via anchored bridging schedules.
//!
//! The evidence `Z1 = ∫ likelihood(x) prior(x) dx` is the normalization of a
//! posterior. Three anchorings run the same staged estimator with different
//! reference densities:
//!
//! - prior-anchored: `p = prior` (proper), stage weight `dh log likelihood`;
//! - likelihood-anchored: `p = likelihood` viewed as a density in `x` with
//!   known normalization, stage weight `dh log prior`;
//! - auxiliary-anchored: `p = I` with known normalization and support
//!   dominating `prior * likelihood`.
//!
//! Stage sampling defaults to random-walk Metropolis on the unnormalized
//! stage density, since no exact sampler exists in general.

use std::sync::Arc;

use rand::RngCore;
use statrs::function::erf::erf;

use crate::density::{DensityPair, HomotopyPath, LogDensity};
use crate::error::{Error, Result};
use crate::oracle::{integrate, Domain, QuadratureSpec};
use crate::samplers::{MetropolisTuning, RngStream};
use crate::schedule::{run_schedule, SamplerChoice, ScheduleConfig, ScheduleTrace};

type DrawFn = Arc<dyn Fn(usize, &mut dyn RngCore) -> Vec<f64> + Send + Sync>;

/// Auxiliary reference density with known normalization.
#[derive(Clone)]
pub struct Auxiliary {
    pub log_density: LogDensity,
    pub log_norm: f64,
    sampler: Option<DrawFn>,
}

impl Auxiliary {
    pub fn new(log_density: LogDensity, log_norm: f64) -> Self {
        Self {
            log_density,
            log_norm,
            sampler: None,
        }
    }

    pub fn with_sampler(
        mut self,
        f: impl Fn(usize, &mut dyn RngCore) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.sampler = Some(Arc::new(f));
        self
    }
}

/// A Bayesian evidence problem: prior and likelihood as functions of the
/// parameter `x` (data fixed), plus whatever anchoring capabilities are known.
#[derive(Clone)]
pub struct BayesProblem {
    log_prior: LogDensity,
    log_likelihood: LogDensity,
    prior_log_norm: Option<f64>,
    likelihood_log_norm: Option<f64>,
    prior_sampler: Option<DrawFn>,
    likelihood_sampler: Option<DrawFn>,
    auxiliary: Option<Auxiliary>,
    support: Domain,
    init_hint: Option<Vec<f64>>,
}

impl BayesProblem {
    pub fn new(log_prior: LogDensity, log_likelihood: LogDensity) -> Result<Self> {
        if log_prior.dim() != log_likelihood.dim() {
            return Err(Error::DimensionMismatch {
                expected: log_prior.dim(),
                got: log_likelihood.dim(),
            });
        }
        Ok(Self {
            log_prior,
            log_likelihood,
            prior_log_norm: None,
            likelihood_log_norm: None,
            prior_sampler: None,
            likelihood_sampler: None,
            auxiliary: None,
            support: Domain::default(),
            init_hint: None,
        })
    }

    /// Declares the prior proper with the given log normalization (0 for a
    /// normalized prior).
    pub fn with_proper_prior(mut self, log_norm: f64) -> Self {
        self.prior_log_norm = Some(log_norm);
        self
    }

    /// Declares the likelihood integrable in `x` with known log normalization.
    pub fn with_proper_likelihood(mut self, log_norm: f64) -> Self {
        self.likelihood_log_norm = Some(log_norm);
        self
    }

    pub fn with_prior_sampler(
        mut self,
        f: impl Fn(usize, &mut dyn RngCore) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.prior_sampler = Some(Arc::new(f));
        self
    }

    pub fn with_likelihood_sampler(
        mut self,
        f: impl Fn(usize, &mut dyn RngCore) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.likelihood_sampler = Some(Arc::new(f));
        self
    }

    pub fn with_auxiliary(mut self, aux: Auxiliary) -> Self {
        self.auxiliary = Some(aux);
        self
    }

    pub fn with_support(mut self, support: Domain) -> Self {
        self.support = support;
        self
    }

    pub fn with_init_hint(mut self, x: Vec<f64>) -> Self {
        self.init_hint = Some(x);
        self
    }

    pub fn support(&self) -> Domain {
        self.support
    }

    /// At least one anchoring route must be available.
    pub fn validate(&self) -> Result<()> {
        if self.prior_log_norm.is_none()
            && self.likelihood_log_norm.is_none()
            && self.auxiliary.is_none()
        {
            return Err(Error::InvalidArgument(
                "no anchoring available: need a proper prior, a proper likelihood, \
                 or an auxiliary reference"
                    .into(),
            ));
        }
        Ok(())
    }

    fn log_posterior_unnorm(&self) -> LogDensity {
        let lp = self.log_prior.clone();
        let ll = self.log_likelihood.clone();
        LogDensity::new(lp.dim(), move |x| {
            let a = lp.eval(x);
            if a == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            let b = ll.eval(x);
            if b == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            a + b
        })
    }

    /// Target `q = prior * likelihood` against `p = prior`, so the stage
    /// weight exponent is exactly `log likelihood`.
    pub fn prior_anchored_pair(&self) -> Result<DensityPair> {
        let log_norm = self.prior_log_norm.ok_or_else(|| {
            Error::InvalidArgument("prior-anchored schedule needs a proper prior".into())
        })?;
        let (prior, lik) = (self.log_prior.clone(), self.log_likelihood.clone());
        let mut pair =
            DensityPair::new(self.log_posterior_unnorm(), self.log_prior.clone(), log_norm)?
                .with_support(self.support)
                .with_log_ratio(move |x| {
                    if prior.eval(x) == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        lik.eval(x)
                    }
                });
        if let Some(f) = &self.prior_sampler {
            let f = f.clone();
            pair = pair.with_reference_sampler(move |n, rng| f(n, rng));
        }
        if let Some(hint) = &self.init_hint {
            pair = pair.with_init_hint(hint.clone());
        }
        Ok(pair)
    }

    /// Target `q = prior * likelihood` against `p = likelihood`, so the stage
    /// weight exponent is exactly `log prior`.
    pub fn likelihood_anchored_pair(&self) -> Result<DensityPair> {
        let log_norm = self.likelihood_log_norm.ok_or_else(|| {
            Error::InvalidArgument(
                "likelihood-anchored schedule needs a likelihood with known normalization".into(),
            )
        })?;
        let (prior, lik) = (self.log_prior.clone(), self.log_likelihood.clone());
        let mut pair = DensityPair::new(
            self.log_posterior_unnorm(),
            self.log_likelihood.clone(),
            log_norm,
        )?
        .with_support(self.support)
        .with_log_ratio(move |x| {
            if lik.eval(x) == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                prior.eval(x)
            }
        });
        if let Some(f) = &self.likelihood_sampler {
            let f = f.clone();
            pair = pair.with_reference_sampler(move |n, rng| f(n, rng));
        }
        if let Some(hint) = &self.init_hint {
            pair = pair.with_init_hint(hint.clone());
        }
        Ok(pair)
    }

    /// Target `q = prior * likelihood` against the auxiliary reference.
    pub fn auxiliary_pair(&self) -> Result<DensityPair> {
        let aux = self.auxiliary.as_ref().ok_or_else(|| {
            Error::InvalidArgument("auxiliary-anchored schedule needs an auxiliary".into())
        })?;
        let (prior, lik, aux_d) = (
            self.log_prior.clone(),
            self.log_likelihood.clone(),
            aux.log_density.clone(),
        );
        let mut pair = DensityPair::new(
            self.log_posterior_unnorm(),
            aux.log_density.clone(),
            aux.log_norm,
        )?
        .with_support(self.support)
        .with_log_ratio(move |x| {
            let a = prior.eval(x);
            let b = lik.eval(x);
            if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            let i = aux_d.eval(x);
            if i == f64::NEG_INFINITY {
                return f64::INFINITY;
            }
            a + b - i
        });
        if let Some(f) = &aux.sampler {
            let f = f.clone();
            pair = pair.with_reference_sampler(move |n, rng| f(n, rng));
        }
        if let Some(hint) = &self.init_hint {
            pair = pair.with_init_hint(hint.clone());
        }
        Ok(pair)
    }
}

impl std::fmt::Debug for BayesProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BayesProblem")
            .field("dim", &self.log_prior.dim())
            .field("proper_prior", &self.prior_log_norm)
            .field("proper_likelihood", &self.likelihood_log_norm)
            .field("auxiliary", &self.auxiliary.is_some())
            .finish()
    }
}

fn run_anchored(
    pair: DensityPair,
    path: &HomotopyPath,
    n: usize,
    rng: RngStream,
    tuning: &MetropolisTuning,
) -> Result<ScheduleTrace> {
    let cfg = ScheduleConfig::new(
        pair,
        path.clone(),
        n,
        SamplerChoice::Metropolis(tuning.clone()),
        rng,
    )?;
    run_schedule(&cfg)
}

/// Prior-anchored evidence: `Z_s = ∫ likelihood^{h(s)} prior dx`, so the log
/// evidence is the trace's final `log Zbar_1`.
pub fn evidence_prior_anchored(
    problem: &BayesProblem,
    path: &HomotopyPath,
    n: usize,
    rng: RngStream,
    tuning: &MetropolisTuning,
) -> Result<ScheduleTrace> {
    run_anchored(problem.prior_anchored_pair()?, path, n, rng, tuning)
}

/// Likelihood-anchored evidence: `Z_s = ∫ prior^{h(s)} likelihood dx`.
pub fn evidence_likelihood_anchored(
    problem: &BayesProblem,
    path: &HomotopyPath,
    n: usize,
    rng: RngStream,
    tuning: &MetropolisTuning,
) -> Result<ScheduleTrace> {
    run_anchored(problem.likelihood_anchored_pair()?, path, n, rng, tuning)
}

/// Auxiliary-anchored evidence:
/// `Z_s = ∫ (prior likelihood / I)^{h(s)} I dx`.
pub fn evidence_auxiliary(
    problem: &BayesProblem,
    path: &HomotopyPath,
    n: usize,
    rng: RngStream,
    tuning: &MetropolisTuning,
) -> Result<ScheduleTrace> {
    run_anchored(problem.auxiliary_pair()?, path, n, rng, tuning)
}

/// The Rayleigh-prior / Gaussian-likelihood benchmark as a [`BayesProblem`]
/// (prior proper on the half-line, likelihood proper on the real line).
pub fn rayleigh_problem(y: f64, r: f64, q: f64) -> Result<BayesProblem> {
    if !(r > 0.0 && q > 0.0) {
        return Err(Error::InvalidArgument("need r > 0 and q > 0".into()));
    }
    let log_prior = LogDensity::from_fn1(move |x| crate::density::ln_rayleigh(x, r));
    let log_lik = LogDensity::from_fn1(move |x| -(x - y) * (x - y) / (2.0 * q * q));
    let lik_log_norm = (2.0 * std::f64::consts::PI).sqrt().ln() + q.ln();
    Ok(BayesProblem::new(log_prior, log_lik)?
        .with_proper_prior(0.0)
        .with_proper_likelihood(lik_log_norm)
        .with_prior_sampler(move |n, rng| {
            use rand::Rng;
            (0..n)
                .map(|_| {
                    let u: f64 = rng.gen();
                    r * (-2.0 * (1.0 - u).ln()).sqrt()
                })
                .collect()
        })
        .with_likelihood_sampler(move |n, rng| {
            use rand_distr::Distribution;
            (0..n)
                .map(|_| {
                    let z: f64 = rand_distr::StandardNormal.sample(rng);
                    y + q * z
                })
                .collect()
        })
        .with_support(Domain::HalfLine {
            start: 0.0,
            scale: r + y.abs(),
        })
        .with_init_hint(vec![y.abs().max(r)]))
}

/// Regularized lower incomplete gamma `P(-1/2, z)`, continued to the negative
/// parameter through the recurrence
/// `gamma(a, z) = (gamma(a+1, z) + z^a e^{-z}) / a` with
/// `gamma(1/2, z) = sqrt(pi) erf(sqrt(z))` and `Gamma(-1/2) = -2 sqrt(pi)`:
/// `P(-1/2, z) = erf(sqrt(z)) + e^{-z} / sqrt(pi z)`.
pub fn regularized_gamma_neg_half(z: f64) -> f64 {
    if z <= 0.0 {
        return f64::INFINITY;
    }
    erf(z.sqrt()) + (-z).exp() / (std::f64::consts::PI * z).sqrt()
}

/// Printed closed form vs quadrature for the Rayleigh benchmark `Z_s`.
#[derive(Clone, Copy, Debug)]
pub struct RayleighZs {
    /// The closed-form expression exactly as printed (known to disagree with
    /// the integral it claims to evaluate; reported, not asserted).
    pub printed: f64,
    /// Adaptive quadrature of `∫ prior(x) likelihood(x)^s dx` on `x >= 0`.
    pub quadrature: f64,
    /// `|printed - quadrature| / |quadrature|`.
    pub rel_discrepancy: f64,
}

/// Evaluates both routes to `Z_s` for the Rayleigh benchmark.
pub fn rayleigh_zs(s: f64, y: f64, r: f64, q: f64) -> Result<RayleighZs> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!("s must lie in [0,1], got {s}")));
    }
    if !(r > 0.0 && q > 0.0) {
        return Err(Error::InvalidArgument("need r > 0 and q > 0".into()));
    }
    let pi = std::f64::consts::PI;
    let printed = {
        let denom = (q * q + r * r * s).powf(1.5);
        let prefactor = (pi / 2.0) * q * r * y * s / denom;
        let exponential = (s * y * y / (2.0 * (q * q + r * r * s))).exp();
        let gamma_arg = (r * r * s * s * y * y) / (2.0 * (q.powi(4) + q * q * r * r * s));
        prefactor * exponential * (2.0 - regularized_gamma_neg_half(gamma_arg))
    };
    let spec = QuadratureSpec::new(Domain::HalfLine {
        start: 0.0,
        scale: r + y.abs(),
    });
    let quadrature = integrate(
        |x| {
            let lp = crate::density::ln_rayleigh(x, r);
            if lp == f64::NEG_INFINITY {
                return 0.0;
            }
            (lp - s * (x - y) * (x - y) / (2.0 * q * q)).exp()
        },
        &spec,
    )?;
    Ok(RayleighZs {
        printed,
        quadrature,
        rel_discrepancy: (printed - quadrature).abs() / quadrature.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::ln_gaussian;
    use crate::stats;

    fn gaussian_conjugate_problem(m0: f64, v0: f64, y: f64, vl: f64) -> BayesProblem {
        let log_prior = LogDensity::from_fn1(move |x| ln_gaussian(x, m0, v0));
        let log_lik = LogDensity::from_fn1(move |x| ln_gaussian(x, y, vl));
        BayesProblem::new(log_prior, log_lik)
            .unwrap()
            .with_proper_prior(0.0)
            .with_proper_likelihood(0.0)
            .with_prior_sampler(move |n, rng| {
                use rand_distr::Distribution;
                (0..n)
                    .map(|_| {
                        let z: f64 = rand_distr::StandardNormal.sample(rng);
                        m0 + v0 * z
                    })
                    .collect()
            })
            .with_likelihood_sampler(move |n, rng| {
                use rand_distr::Distribution;
                (0..n)
                    .map(|_| {
                        let z: f64 = rand_distr::StandardNormal.sample(rng);
                        y + vl * z
                    })
                    .collect()
            })
            .with_support(Domain::Real { scale: 2.0 })
            .with_init_hint(vec![0.5 * (m0 + y)])
    }

    fn conjugate_evidence(m0: f64, v0: f64, y: f64, vl: f64) -> f64 {
        ln_gaussian(y, m0, (v0 * v0 + vl * vl).sqrt()).exp()
    }

    #[test]
    fn constant_likelihood_is_exact() {
        let c: f64 = 0.37;
        let log_prior = LogDensity::from_fn1(|x| ln_gaussian(x, 0.0, 1.0));
        let log_lik = LogDensity::from_fn1(move |_| c.ln());
        let problem = BayesProblem::new(log_prior, log_lik)
            .unwrap()
            .with_proper_prior(0.0)
            .with_prior_sampler(|n, rng| {
                use rand_distr::Distribution;
                (0..n)
                    .map(|_| rand_distr::StandardNormal.sample(rng))
                    .collect()
            })
            .with_support(Domain::Real { scale: 1.0 });
        // Every stage weight is the same deterministic constant, so every
        // replicate returns the same value: zero variance, and the value is
        // c * Z0 up to the rounding of summing dh_m ln c across stages.
        let path = HomotopyPath::identity(7).unwrap();
        let mut values = Vec::new();
        for rep in 0..5 {
            let trace = evidence_prior_anchored(
                &problem,
                &path,
                100,
                RngStream::new(1, rep),
                &MetropolisTuning::default(),
            )
            .unwrap();
            values.push(trace.log_z1());
        }
        assert!(values.iter().all(|v| v.to_bits() == values[0].to_bits()));
        assert!((values[0] - c.ln()).abs() < 1e-14);

        // A single stage avoids the partition sum entirely: bitwise exact.
        let single = HomotopyPath::identity(1).unwrap();
        let trace = evidence_prior_anchored(
            &problem,
            &single,
            100,
            RngStream::new(1, 99),
            &MetropolisTuning::default(),
        )
        .unwrap();
        assert_eq!(trace.log_z1(), c.ln());
    }

    #[test]
    fn unit_likelihood_returns_prior_normalization() {
        let log_prior = LogDensity::from_fn1(|x| ln_gaussian(x, 0.0, 1.0));
        let log_lik = LogDensity::from_fn1(|_| 0.0);
        let problem = BayesProblem::new(log_prior, log_lik)
            .unwrap()
            .with_proper_prior(0.0)
            .with_prior_sampler(|n, rng| {
                use rand_distr::Distribution;
                (0..n)
                    .map(|_| rand_distr::StandardNormal.sample(rng))
                    .collect()
            });
        let path = HomotopyPath::identity(4).unwrap();
        let trace = evidence_prior_anchored(
            &problem,
            &path,
            50,
            RngStream::new(2, 0),
            &MetropolisTuning::default(),
        )
        .unwrap();
        assert_eq!(trace.log_z1(), 0.0);
    }

    #[test]
    fn conjugate_anchorings_agree_with_closed_form() {
        let (m0, v0, y, vl) = (0.3, 1.0, 1.2, 0.7);
        let problem = gaussian_conjugate_problem(m0, v0, y, vl).with_auxiliary(
            Auxiliary::new(LogDensity::from_fn1(|x| ln_gaussian(x, 0.0, 2.5)), 0.0).with_sampler(
                |n, rng| {
                    use rand_distr::Distribution;
                    (0..n)
                        .map(|_| {
                            let z: f64 = rand_distr::StandardNormal.sample(rng);
                            2.5 * z
                        })
                        .collect()
                },
            ),
        );
        let want = conjugate_evidence(m0, v0, y, vl);
        let path = HomotopyPath::identity(10).unwrap();
        let tuning = MetropolisTuning {
            burn_in: 300,
            thinning: 2,
            ..MetropolisTuning::default()
        };
        let reps = 24;
        let run_all = |which: usize| -> Vec<f64> {
            (0..reps)
                .map(|r| {
                    let rng = RngStream::new(100 + which as u64, r);
                    let t = match which {
                        0 => evidence_prior_anchored(&problem, &path, 2000, rng, &tuning),
                        1 => evidence_likelihood_anchored(&problem, &path, 2000, rng, &tuning),
                        _ => evidence_auxiliary(&problem, &path, 2000, rng, &tuning),
                    };
                    t.unwrap().z1()
                })
                .collect()
        };
        let mut means = Vec::new();
        for which in 0..3 {
            let zs = run_all(which);
            let mean = stats::mean(&zs);
            let se = stats::standard_error(&zs);
            assert!(
                (mean - want).abs() < 3.0 * se,
                "anchoring {which}: mean {mean} vs {want} (se {se})"
            );
            means.push((mean, se));
        }
        for i in 0..3 {
            for j in i + 1..3 {
                let se = (means[i].1 * means[i].1 + means[j].1 * means[j].1).sqrt();
                assert!(
                    (means[i].0 - means[j].0).abs() < 3.0 * se,
                    "routes {i} vs {j}"
                );
            }
        }
    }

    #[test]
    fn rayleigh_zs_endpoints_and_discrepancy() {
        let (y, r, q) = (0.65, 0.25, 0.2);
        // s = 0: the integral is the proper Rayleigh normalization.
        let z0 = rayleigh_zs(0.0, y, r, q).unwrap();
        assert!((z0.quadrature - 1.0).abs() < 1e-9, "Z0 = {}", z0.quadrature);
        // The printed closed form does not reproduce its own integral; the
        // discrepancy is the reported deliverable.
        for s in [0.25, 0.5, 1.0] {
            let z = rayleigh_zs(s, y, r, q).unwrap();
            assert!(z.quadrature.is_finite() && z.quadrature > 0.0);
            assert!(z.rel_discrepancy.is_finite());
        }
    }

    #[test]
    fn rayleigh_prior_anchored_matches_quadrature() {
        let (y, r, q) = (0.65, 0.25, 0.2);
        let problem = rayleigh_problem(y, r, q).unwrap();
        let want = rayleigh_zs(1.0, y, r, q).unwrap().quadrature;
        let path = HomotopyPath::identity(10).unwrap();
        let tuning = MetropolisTuning {
            burn_in: 300,
            thinning: 2,
            ..MetropolisTuning::default()
        };
        let zs: Vec<f64> = (0..24)
            .map(|rep| {
                evidence_prior_anchored(&problem, &path, 2000, RngStream::new(7, rep), &tuning)
                    .unwrap()
                    .z1()
            })
            .collect();
        let mean = stats::mean(&zs);
        let se = stats::standard_error(&zs);
        // Support robustness: the likelihood's support exceeds the prior's
        // half-line and the run must neither error nor drift.
        assert!((mean - want).abs() < 3.0 * se, "mean {mean} vs {want}");
    }

    #[test]
    fn auxiliary_equal_to_prior_reduces_to_prior_anchoring() {
        let (m0, v0, y, vl) = (0.0, 1.0, 0.8, 0.5);
        let base = gaussian_conjugate_problem(m0, v0, y, vl);
        let problem = base.clone().with_auxiliary(
            Auxiliary::new(LogDensity::from_fn1(move |x| ln_gaussian(x, m0, v0)), 0.0)
                .with_sampler(move |n, rng| {
                    use rand_distr::Distribution;
                    (0..n)
                        .map(|_| {
                            let z: f64 = rand_distr::StandardNormal.sample(rng);
                            m0 + v0 * z
                        })
                        .collect()
                }),
        );
        // Identical stage densities and identical streams give identical traces.
        let path = HomotopyPath::identity(6).unwrap();
        let tuning = MetropolisTuning {
            burn_in: 200,
            thinning: 1,
            ..MetropolisTuning::default()
        };
        let a =
            evidence_prior_anchored(&problem, &path, 500, RngStream::new(9, 0), &tuning).unwrap();
        let b = evidence_auxiliary(&problem, &path, 500, RngStream::new(9, 0), &tuning).unwrap();
        assert_eq!(a.log_z1(), b.log_z1());
    }

    #[test]
    fn validate_requires_an_anchor() {
        let log_prior = LogDensity::from_fn1(|x| ln_gaussian(x, 0.0, 1.0));
        let log_lik = LogDensity::from_fn1(|_| 0.0);
        let p = BayesProblem::new(log_prior, log_lik).unwrap();
        assert!(p.validate().is_err());
        assert!(p.clone().with_proper_prior(0.0).validate().is_ok());
        assert!(matches!(
            evidence_likelihood_anchored(
                &p,
                &HomotopyPath::identity(2).unwrap(),
                10,
                RngStream::new(0, 0),
                &MetropolisTuning::default()
            ),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn regularized_gamma_continuation_limits() {
        // P(-1/2, z) -> 1 as z -> inf (erf -> 1, tail term -> 0).
        assert!((regularized_gamma_neg_half(50.0) - 1.0).abs() < 1e-12);
        // Small z blows up like 1/sqrt(pi z).
        let z = 1e-6;
        let want = 1.0 / (std::f64::consts::PI * z).sqrt();
        let got = regularized_gamma_neg_half(z);
        assert!((got - want).abs() / want < 1e-2);
    }
}
