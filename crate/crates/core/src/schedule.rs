//! The staged bridging estimator.
//!
//! For a partition `0 = s_0 < ... < s_M = 1`, stage `m` draws an ensemble
//! from `theta_{h(s_m)}`, averages the stage weights
//! `w = exp(dh_m (log q - log p))`, and the log averages accumulate:
//! `log Zbar_1 = log Z0 + Σ_m log mubar_m`. Everything is computed in log
//! space with a centered log-sum-exp, so constant weights contribute exactly.

use rayon::prelude::*;

use crate::density::{DensityPair, HomotopyPath};
use crate::error::{Error, Result};
use crate::oracle::{z_of_exponent, QuadratureSpec};
use crate::samplers::{
    run_sequential_sampler, sample_exact, sample_metropolis, EnsembleWarning, MetropolisTuning,
    RngStream, StageEnsemble,
};
use crate::stats;

/// Which stage sampler the schedule uses.
#[derive(Clone, Debug)]
pub enum SamplerChoice {
    /// The pair's exact bridging sampler (errors if absent).
    Exact,
    /// Random-walk Metropolis on the unnormalized stage density.
    Metropolis(MetropolisTuning),
    /// The sequential importance-rejection sampler; `k` falls back to the
    /// pair's `ratio_sup_bound`. Stage populations then shrink as samples
    /// are rejected, and `mubar_m` uses the survivors at stage `m`.
    ImportanceRejection { k: Option<f64> },
}

/// Full configuration of one schedule run.
#[derive(Clone, Debug)]
pub struct ScheduleConfig {
    pub pair: DensityPair,
    pub path: HomotopyPath,
    pub n_per_stage: usize,
    pub sampler: SamplerChoice,
    pub rng: RngStream,
}

impl ScheduleConfig {
    pub fn new(
        pair: DensityPair,
        path: HomotopyPath,
        n_per_stage: usize,
        sampler: SamplerChoice,
        rng: RngStream,
    ) -> Result<Self> {
        if n_per_stage < 2 {
            return Err(Error::InvalidArgument(
                "variance estimates need n_per_stage >= 2".into(),
            ));
        }
        Ok(Self {
            pair,
            path,
            n_per_stage,
            sampler,
            rng,
        })
    }
}

/// Log sample average of one stage's weights plus their sample variance.
#[derive(Clone, Copy, Debug)]
pub struct StageMu {
    pub log_mu_bar: f64,
    pub weight_variance: f64,
}

/// `log[(1/N) Σ exp(dh (log q - log p))]` over the ensemble, stabilized so
/// that identical weights (q = p, or a flat `h` segment) give the exact log
/// weight with zero variance.
pub fn stage_mu_bar(
    pair: &DensityPair,
    path: &HomotopyPath,
    s: f64,
    s_next: f64,
    ensemble: &StageEnsemble,
) -> Result<StageMu> {
    if ensemble.is_empty() {
        return Err(Error::InvalidArgument(
            "stage ensemble must be nonempty".into(),
        ));
    }
    if ensemble.s() != s {
        return Err(Error::InvalidArgument(format!(
            "ensemble is at s = {}, stage starts at s = {s}",
            ensemble.s()
        )));
    }
    if s_next <= s {
        return Err(Error::InvalidArgument(format!(
            "need s_next > s, got s = {s}, s_next = {s_next}"
        )));
    }
    let dh = path.h(s_next) - path.h(s);
    let logs: Vec<f64> = ensemble
        .iter()
        .map(|x| {
            if dh == 0.0 {
                0.0
            } else {
                dh * pair.log_ratio(x)
            }
        })
        .collect();
    let log_mu_bar = stats::log_mean_exp(&logs);
    let weight_variance = log_weight_variance(&logs);
    Ok(StageMu {
        log_mu_bar,
        weight_variance,
    })
}

/// Sample variance of `exp(l_i)`, computed around the max to avoid overflow.
pub(crate) fn log_weight_variance(logs: &[f64]) -> f64 {
    if logs.len() < 2 {
        return 0.0;
    }
    let mx = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return 0.0;
    }
    let scaled: Vec<f64> = logs.iter().map(|l| (l - mx).exp()).collect();
    stats::sample_variance(&scaled) * (2.0 * mx).exp()
}

/// Per-stage record of one schedule run.
#[derive(Clone, Debug)]
pub struct StageRecord {
    pub m: usize,
    pub s: f64,
    pub h_s: f64,
    /// `log Zbar` accumulated up to `s_m` (before this stage's factor).
    pub log_z_bar: f64,
    pub log_mu_bar: f64,
    pub weight_variance: f64,
    pub population: usize,
    pub warning: Option<EnsembleWarning>,
}

/// The estimator's full audit trail.
#[derive(Clone, Debug)]
pub struct ScheduleTrace {
    pub log_z0: f64,
    pub stages: Vec<StageRecord>,
    /// Population of the terminal ensemble, when the sampler thins (the
    /// importance-rejection path).
    pub terminal_population: Option<usize>,
    log_z1: f64,
}

impl ScheduleTrace {
    /// Assembles a trace from stage records; `log Zbar_1` is the recursion's
    /// final value by definition.
    pub fn assemble(
        log_z0: f64,
        stages: Vec<StageRecord>,
        terminal_population: Option<usize>,
    ) -> Self {
        let log_z1 = stages.iter().fold(log_z0, |acc, r| acc + r.log_mu_bar);
        Self {
            log_z0,
            stages,
            terminal_population,
            log_z1,
        }
    }

    pub fn log_z1(&self) -> f64 {
        self.log_z1
    }

    pub fn z1(&self) -> f64 {
        self.log_z1.exp()
    }

    /// Delta-method standard error of `log Zbar_1` from the recorded stage
    /// weight variances (treats stages as independent).
    pub fn log_z1_standard_error(&self) -> f64 {
        self.stages
            .iter()
            .map(|r| {
                let mu = (r.log_mu_bar).exp();
                r.weight_variance / (r.population as f64 * mu * mu)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// CSV columns: `m,s_m,h_s_m,log_mu_bar,log_Z_bar,stage_weight_variance,population`.
    /// The final row carries the terminal state with empty per-stage fields.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("m,s_m,h_s_m,log_mu_bar,log_Z_bar,stage_weight_variance,population\n");
        for r in &self.stages {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.m, r.s, r.h_s, r.log_mu_bar, r.log_z_bar, r.weight_variance, r.population
            ));
        }
        let terminal = self
            .terminal_population
            .map_or(String::new(), |p| p.to_string());
        out.push_str(&format!(
            "{},1,1,,{},,{}\n",
            self.stages.len(),
            self.log_z1,
            terminal
        ));
        out
    }
}

/// Runs the full schedule and returns the trace with
/// `log Zbar_1 = log Z0 + Σ log mubar_m`.
pub fn run_schedule(cfg: &ScheduleConfig) -> Result<ScheduleTrace> {
    let mut rng = cfg.rng.rng();
    let path = &cfg.path;
    let pair = &cfg.pair;
    let stages = path.stages();
    let m_total = path.num_stages();

    let ensembles: Vec<StageEnsemble> = match &cfg.sampler {
        SamplerChoice::ImportanceRejection { k } => {
            match run_sequential_sampler(pair, path, cfg.n_per_stage, *k, &mut rng) {
                Ok(e) => e,
                Err(Error::SamplerExtinct { stage, s, survivors }) => {
                    // Build the partial trace from the surviving stages.
                    let partial = assemble_partial(pair, path, &survivors)?;
                    return Err(Error::ScheduleAborted {
                        stage,
                        partial: Box::new(partial),
                        cause: Box::new(Error::SamplerExtinct {
                            stage,
                            s,
                            survivors: Vec::new(),
                        }),
                    });
                }
                Err(e) => return Err(e),
            }
        }
        _ => {
            let mut out = Vec::with_capacity(m_total);
            for m in 0..m_total {
                let s = stages[m];
                let drawn = match &cfg.sampler {
                    SamplerChoice::Exact => sample_exact(pair, path, s, cfg.n_per_stage, &mut rng),
                    SamplerChoice::Metropolis(t) => {
                        sample_metropolis(pair, path, s, cfg.n_per_stage, &mut rng, t)
                    }
                    SamplerChoice::ImportanceRejection { .. } => unreachable!(),
                };
                match drawn {
                    Ok(e) => out.push(e),
                    Err(cause) => {
                        let partial = assemble_partial(pair, path, &out)?;
                        return Err(Error::ScheduleAborted {
                            stage: m,
                            partial: Box::new(partial),
                            cause: Box::new(cause),
                        });
                    }
                }
            }
            out
        }
    };

    let mut records = Vec::with_capacity(m_total);
    let mut log_z = pair.log_z0();
    for m in 0..m_total {
        let ens = &ensembles[m];
        let mu = stage_mu_bar(pair, path, stages[m], stages[m + 1], ens)?;
        records.push(StageRecord {
            m,
            s: stages[m],
            h_s: path.h_at_stage(m),
            log_z_bar: log_z,
            log_mu_bar: mu.log_mu_bar,
            weight_variance: mu.weight_variance,
            population: ens.len(),
            warning: ens.warning(),
        });
        log_z += mu.log_mu_bar;
    }
    let terminal = ensembles.get(m_total).map(StageEnsemble::len);
    Ok(ScheduleTrace::assemble(pair.log_z0(), records, terminal))
}

fn assemble_partial(
    pair: &DensityPair,
    path: &HomotopyPath,
    ensembles: &[StageEnsemble],
) -> Result<ScheduleTrace> {
    let stages = path.stages();
    let mut records = Vec::new();
    let mut log_z = pair.log_z0();
    for (m, ens) in ensembles.iter().enumerate() {
        if m + 1 >= stages.len() {
            break;
        }
        let mu = stage_mu_bar(pair, path, stages[m], stages[m + 1], ens)?;
        records.push(StageRecord {
            m,
            s: stages[m],
            h_s: path.h_at_stage(m),
            log_z_bar: log_z,
            log_mu_bar: mu.log_mu_bar,
            weight_variance: mu.weight_variance,
            population: ens.len(),
            warning: ens.warning(),
        });
        log_z += mu.log_mu_bar;
    }
    Ok(ScheduleTrace::assemble(pair.log_z0(), records, None))
}

/// Quadrature-based error model for `Var(log Zbar_1 / Z1)`.
#[derive(Clone, Debug)]
pub struct ErrorModel {
    /// Exact stage ratios `mu_m = Z(h(s_{m+1})) / Z(h(s_m))`.
    pub stage_mu: Vec<f64>,
    /// The literal printed prediction
    /// `(1/N) Σ_{m=1}^{M-1} mu_m / mu_{m-1} - M/N` (M - 1 ratio terms). Can
    /// go negative for near-flat paths; see `negative_prediction`.
    pub predicted_var_log_z1: f64,
    /// Set when the printed prediction is negative (e.g. q = p gives -1/N).
    pub negative_prediction: bool,
    /// Per-stage CLT variances `sigma_m^2 / N` of the stage averages, where
    /// `sigma_m^2 = mu_m (mu_{m+ } - mu_m)` with the final ratio extrapolated
    /// past the endpoint.
    pub stage_clt_var: Vec<f64>,
    /// Secondary predictor: the accumulated per-stage CLT sum
    /// `(1/N) Σ sigma_m^2 / mu_m^2`, non-negative by construction.
    pub clt_var_log_z1: f64,
}

/// Evaluates the error model at sample size `n` with quadrature stage ratios.
pub fn predicted_variance(
    pair: &DensityPair,
    path: &HomotopyPath,
    spec: &QuadratureSpec,
    n: usize,
) -> Result<ErrorModel> {
    if n == 0 {
        return Err(Error::InvalidArgument("need n >= 1".into()));
    }
    let m_total = path.num_stages();
    let z: Vec<f64> = (0..=m_total)
        .map(|m| z_of_exponent(pair, path.h_at_stage(m), spec))
        .collect::<Result<_>>()?;
    let stage_mu: Vec<f64> = z.windows(2).map(|w| w[1] / w[0]).collect();

    let ratio_sum: f64 = (1..m_total).map(|m| stage_mu[m] / stage_mu[m - 1]).sum();
    let predicted = (ratio_sum - m_total as f64) / n as f64;

    // Second moments of the stage weights need Z at h_m + 2 dh_m, which runs
    // past exponent 1 on the last stage.
    let mut stage_clt_var = Vec::with_capacity(m_total);
    let mut clt_sum = 0.0;
    for m in 0..m_total {
        let h_m = path.h_at_stage(m);
        let dh = path.delta_h(m);
        let z2 = z_of_exponent(pair, h_m + 2.0 * dh, spec)?;
        let second_moment = z2 / z[m];
        let sigma2 = (second_moment - stage_mu[m] * stage_mu[m]).max(0.0);
        stage_clt_var.push(sigma2 / n as f64);
        clt_sum += sigma2 / (stage_mu[m] * stage_mu[m]);
    }
    let clt_var_log_z1 = clt_sum / n as f64;

    Ok(ErrorModel {
        stage_mu,
        predicted_var_log_z1: predicted,
        negative_prediction: predicted < 0.0,
        stage_clt_var,
        clt_var_log_z1,
    })
}

/// Replicate study of one schedule configuration.
#[derive(Clone, Debug)]
pub struct EmpiricalStats {
    pub replicates_ok: usize,
    pub replicates_failed: usize,
    pub var_log_z1: f64,
    pub mean_log_z1: f64,
    /// Mean of `|Zbar_1 - Z1_oracle|` over replicates.
    pub mean_abs_err: f64,
    pub oracle_z1: f64,
    pub log_z1_values: Vec<f64>,
}

/// Runs the schedule `replicates` times on shifted rng streams (replicate `r`
/// uses `cfg.rng.offset(r)`), in parallel; the reduction is order-fixed so
/// results do not depend on scheduling.
pub fn empirical_variance(cfg: &ScheduleConfig, replicates: usize) -> Result<EmpiricalStats> {
    if replicates < 2 {
        return Err(Error::InvalidArgument("need at least 2 replicates".into()));
    }
    let spec = QuadratureSpec::for_pair(&cfg.pair);
    let oracle_z1 = z_of_exponent(&cfg.pair, 1.0, &spec)?;

    let results: Vec<Result<ScheduleTrace>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut local = cfg.clone();
            local.rng = cfg.rng.offset(r as u64);
            run_schedule(&local)
        })
        .collect();

    let mut log_z1_values = Vec::with_capacity(replicates);
    let mut failed = 0usize;
    let mut abs_err_sum = 0.0;
    for r in results {
        match r {
            Ok(trace) => {
                log_z1_values.push(trace.log_z1());
                abs_err_sum += (trace.z1() - oracle_z1).abs();
            }
            Err(_) => failed += 1,
        }
    }
    if log_z1_values.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "only {} replicates succeeded",
            log_z1_values.len()
        )));
    }
    Ok(EmpiricalStats {
        replicates_ok: log_z1_values.len(),
        replicates_failed: failed,
        var_log_z1: stats::sample_variance(&log_z1_values),
        mean_log_z1: stats::mean(&log_z1_values),
        mean_abs_err: abs_err_sum / log_z1_values.len() as f64,
        oracle_z1,
        log_z1_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{
        gaussian_pair, ln_gaussian, GaussianPairParams, HomotopyFn, LogDensity,
    };
    use crate::oracle;
    use crate::samplers::SampleOrigin;
    use rand_distr::Distribution;

    fn default_gaussian() -> DensityPair {
        gaussian_pair(GaussianPairParams::default()).unwrap()
    }

    fn identity_pair() -> DensityPair {
        let lp = LogDensity::from_fn1(|x| ln_gaussian(x, 0.0, 0.2));
        DensityPair::new(lp.clone(), lp, 0.0)
            .unwrap()
            .with_exact_theta_sampler(|_, n, rng| {
                (0..n)
                    .map(|_| {
                        let z: f64 = rand_distr::StandardNormal.sample(rng);
                        0.2 * z
                    })
                    .collect()
            })
    }

    #[test]
    fn mu_bar_is_exactly_zero_for_identical_densities() {
        let pair = identity_pair();
        let path = HomotopyPath::identity(5).unwrap();
        let mut rng = RngStream::new(1, 0).rng();
        let ens = sample_exact(&pair, &path, 0.2, 1000, &mut rng).unwrap();
        let mu = stage_mu_bar(&pair, &path, 0.2, 0.4, &ens).unwrap();
        assert_eq!(mu.log_mu_bar, 0.0);
        assert_eq!(mu.weight_variance, 0.0);
    }

    #[test]
    fn mu_bar_is_zero_on_flat_h_segment() {
        let h = HomotopyFn::tabulated(vec![(0.0, 0.0), (0.4, 0.7), (0.6, 0.7), (1.0, 1.0)]).unwrap();
        let path = HomotopyPath::new(h, vec![0.0, 0.4, 0.6, 1.0]).unwrap();
        let pair = default_gaussian();
        let mut rng = RngStream::new(2, 0).rng();
        let ens = sample_exact(&pair, &path, 0.4, 500, &mut rng).unwrap();
        let mu = stage_mu_bar(&pair, &path, 0.4, 0.6, &ens).unwrap();
        assert_eq!(mu.log_mu_bar, 0.0);
    }

    #[test]
    fn mu_bar_matches_oracle_ratio() {
        let pair = default_gaussian();
        let path = HomotopyPath::identity(10).unwrap();
        let spec = QuadratureSpec::for_pair(&pair);
        let want = oracle::z_of_s(&pair, &path, 0.1, &spec).unwrap()
            / oracle::z_of_s(&pair, &path, 0.0, &spec).unwrap();
        let n = 100_000;
        let mut rng = RngStream::new(3, 0).rng();
        let ens = sample_exact(&pair, &path, 0.0, n, &mut rng).unwrap();
        let mu = stage_mu_bar(&pair, &path, 0.0, 0.1, &ens).unwrap();
        let se = (mu.weight_variance / n as f64).sqrt() / want;
        let got = mu.log_mu_bar.exp();
        assert!((got - want).abs() / want < 3.0 * se, "{got} vs {want}");
    }

    #[test]
    fn mu_bar_rejects_empty_and_misaligned_ensembles() {
        let pair = default_gaussian();
        let path = HomotopyPath::identity(5).unwrap();
        let empty = StageEnsemble::from_parts(vec![], 1, 0.0, SampleOrigin::Exact, 0).unwrap();
        assert!(stage_mu_bar(&pair, &path, 0.0, 0.2, &empty).is_err());
        let mut rng = RngStream::new(4, 0).rng();
        let ens = sample_exact(&pair, &path, 0.2, 10, &mut rng).unwrap();
        assert!(stage_mu_bar(&pair, &path, 0.0, 0.2, &ens).is_err());
    }

    #[test]
    fn schedule_is_exact_when_q_equals_p() {
        let pair = identity_pair();
        for m in [1usize, 3, 17] {
            let cfg = ScheduleConfig::new(
                pair.clone(),
                HomotopyPath::identity(m).unwrap(),
                100,
                SamplerChoice::Exact,
                RngStream::new(5, m as u64),
            )
            .unwrap();
            let trace = run_schedule(&cfg).unwrap();
            assert_eq!(trace.log_z1(), 0.0);
        }
    }

    #[test]
    fn trace_recursion_and_product_consistency() {
        let pair = default_gaussian();
        let cfg = ScheduleConfig::new(
            pair,
            HomotopyPath::uniform(12, HomotopyFn::Power(2.0)).unwrap(),
            500,
            SamplerChoice::Exact,
            RngStream::new(6, 0),
        )
        .unwrap();
        let trace = run_schedule(&cfg).unwrap();
        // The recursion is the definition: each row's log_z_bar plus its
        // log_mu_bar is the next row's log_z_bar, exactly.
        for w in trace.stages.windows(2) {
            assert_eq!(w[0].log_z_bar + w[0].log_mu_bar, w[1].log_z_bar);
        }
        assert_eq!(trace.stages[0].log_z_bar, cfg.pair.log_z0());
        // exp of the accumulated log equals the product of the factors.
        let product: f64 = trace
            .stages
            .iter()
            .map(|r| r.log_mu_bar.exp())
            .product::<f64>()
            * trace.log_z0.exp();
        let rel = (trace.z1() - product).abs() / product.abs();
        assert!(rel < 1e-10, "rel = {rel}");
    }

    #[test]
    fn single_stage_schedule_is_unbiased_importance_sampling() {
        let pair = default_gaussian();
        let spec = QuadratureSpec::for_pair(&pair);
        let z1 = oracle::z_of_exponent(&pair, 1.0, &spec).unwrap();
        let cfg = ScheduleConfig::new(
            pair,
            HomotopyPath::identity(1).unwrap(),
            1000,
            SamplerChoice::Exact,
            RngStream::new(7, 0),
        )
        .unwrap();
        let reps = 1000;
        let values: Vec<f64> = (0..reps)
            .map(|r| {
                let mut c = cfg.clone();
                c.rng = cfg.rng.offset(r);
                run_schedule(&c).unwrap().z1()
            })
            .collect();
        let mean = stats::mean(&values);
        let se = stats::standard_error(&values);
        assert!((mean - z1).abs() < 3.0 * se, "mean {mean} vs {z1}, se {se}");
    }

    #[test]
    fn gaussian_benchmark_single_run_within_five_percent() {
        let pair = default_gaussian();
        let cfg = ScheduleConfig::new(
            pair,
            HomotopyPath::identity(50).unwrap(),
            10_000,
            SamplerChoice::Exact,
            RngStream::new(8, 0),
        )
        .unwrap();
        let trace = run_schedule(&cfg).unwrap();
        let want = 0.25066282746310002;
        assert!(
            (trace.z1() - want).abs() / want < 0.05,
            "Z1 = {}",
            trace.z1()
        );
    }

    #[test]
    fn importance_rejection_schedule_tracks_populations() {
        let pair = default_gaussian();
        let cfg = ScheduleConfig::new(
            pair,
            HomotopyPath::identity(8).unwrap(),
            4000,
            SamplerChoice::ImportanceRejection { k: None },
            RngStream::new(9, 0),
        )
        .unwrap();
        let trace = run_schedule(&cfg).unwrap();
        let pops: Vec<usize> = trace.stages.iter().map(|r| r.population).collect();
        for w in pops.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(trace.terminal_population.is_some());
        // Ballpark sanity: Z1 within 20% of the oracle for this large run.
        let spec = QuadratureSpec::for_pair(&cfg.pair);
        let z1 = oracle::z_of_exponent(&cfg.pair, 1.0, &spec).unwrap();
        assert!((trace.z1() - z1).abs() / z1 < 0.2, "Z1 = {}", trace.z1());
    }

    #[test]
    fn predicted_variance_flags_negative_for_identical_densities() {
        let pair = identity_pair().with_support(crate::oracle::Domain::Real { scale: 1.0 });
        let path = HomotopyPath::identity(10).unwrap();
        let spec = QuadratureSpec::for_pair(&pair);
        let em = predicted_variance(&pair, &path, &spec, 1000).unwrap();
        assert!(em.negative_prediction);
        assert!((em.predicted_var_log_z1 - (-1.0 / 1000.0)).abs() < 1e-9);
        assert!(em.clt_var_log_z1.abs() < 1e-9);
    }

    #[test]
    fn predicted_variance_is_exactly_linear_in_inverse_n() {
        let pair = default_gaussian();
        let path = HomotopyPath::identity(20).unwrap();
        let spec = QuadratureSpec::for_pair(&pair);
        let a = predicted_variance(&pair, &path, &spec, 1000).unwrap();
        let b = predicted_variance(&pair, &path, &spec, 500).unwrap();
        assert_eq!(b.predicted_var_log_z1, 2.0 * a.predicted_var_log_z1);
        assert_eq!(b.clt_var_log_z1, 2.0 * a.clt_var_log_z1);
        // The CLT-sum predictor is non-negative by construction.
        assert!(a.clt_var_log_z1 > 0.0);
    }

    #[test]
    fn empirical_variance_zero_for_identical_densities() {
        let cfg = ScheduleConfig::new(
            identity_pair().with_support(crate::oracle::Domain::Real { scale: 1.0 }),
            HomotopyPath::identity(5).unwrap(),
            50,
            SamplerChoice::Exact,
            RngStream::new(10, 0),
        )
        .unwrap();
        let st = empirical_variance(&cfg, 20).unwrap();
        assert_eq!(st.var_log_z1, 0.0);
        assert_eq!(st.replicates_failed, 0);
    }

    #[test]
    fn empirical_variance_scales_with_n() {
        let pair = default_gaussian();
        let mk = |n: usize| {
            ScheduleConfig::new(
                pair.clone(),
                HomotopyPath::identity(10).unwrap(),
                n,
                SamplerChoice::Exact,
                RngStream::new(11, 0),
            )
            .unwrap()
        };
        let small = empirical_variance(&mk(250), 200).unwrap();
        let big = empirical_variance(&mk(1000), 200).unwrap();
        let ratio = small.var_log_z1 / big.var_log_z1;
        assert!((2.5..6.0).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn oracle_mu_schedule_is_path_invariant() {
        let pair = default_gaussian();
        let spec = QuadratureSpec::for_pair(&pair);
        let a = oracle::oracle_schedule(&pair, &HomotopyPath::identity(11).unwrap(), &spec)
            .unwrap()
            .log_z1;
        let b = oracle::oracle_schedule(
            &pair,
            &HomotopyPath::uniform(7, HomotopyFn::Power(2.0)).unwrap(),
            &spec,
        )
        .unwrap()
        .log_z1;
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn trace_csv_shape() {
        let cfg = ScheduleConfig::new(
            default_gaussian(),
            HomotopyPath::identity(3).unwrap(),
            10,
            SamplerChoice::Exact,
            RngStream::new(12, 0),
        )
        .unwrap();
        let trace = run_schedule(&cfg).unwrap();
        let csv = trace.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 3 + 1);
        assert!(lines[0].starts_with("m,s_m,h_s_m"));
        assert!(lines[4].starts_with("3,1,1,,"));
    }
}
