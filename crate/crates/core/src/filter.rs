//! Sequential state estimation for 1-D nonlinear state-space models.
//!
//! Two filters share the model interface:
//!
//! - [`bootstrap_pf`]: sequential importance resampling — propagate, weight
//!   by the observation likelihood, systematic-resample every step.
//! - [`homotopy_pf`]: carries a closed-form equal-weight Gaussian mixture
//!   over the propagated particles as a proper prior, estimates the step
//!   normalization `Z = ∫ lik(y|x) mixture(x) dx` with the prior-anchored
//!   bridging schedule, and draws fresh particles from the explicit
//!   posterior `lik * mixture / Z` by grid inverse-CDF. No weights are
//!   carried between steps, which is what blunts weight collapse.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use crate::density::HomotopyFn;
use crate::error::{Error, Result};
use crate::grid::GridDist;
use crate::oracle::{integrate, Domain, QuadratureSpec};
use crate::samplers::{systematic_resample, MetropolisTuning, SampleOrigin};
use crate::schedule::{ScheduleTrace, StageRecord};
use crate::stats;

const LN_2PI: f64 = 1.8378770664093453;

/// Discrete-time scalar state-space model with Gaussian transition and
/// observation noise.
#[derive(Clone)]
pub struct StateSpaceModel {
    transition_mean: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    observation_fn: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub init_mean: f64,
    pub init_std: f64,
    /// Physical time per step, used only for emitted time columns.
    pub dt: f64,
}

impl StateSpaceModel {
    pub fn new(
        transition_mean: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        sigma_x: f64,
        observation_fn: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sigma_y: f64,
        init_mean: f64,
        init_std: f64,
        dt: f64,
    ) -> Result<Self> {
        if !(sigma_x >= 0.0 && sigma_y >= 0.0 && init_std >= 0.0 && dt > 0.0) {
            return Err(Error::InvalidArgument(
                "state-space model needs non-negative noise scales and dt > 0".into(),
            ));
        }
        Ok(Self {
            transition_mean: Arc::new(transition_mean),
            observation_fn: Arc::new(observation_fn),
            sigma_x,
            sigma_y,
            init_mean,
            init_std,
            dt,
        })
    }

    /// The standard nonlinear benchmark:
    /// `x_t = 0.5 x + 25 x / (1 + x^2) + 8 cos(1.2 t_prev) + w`,
    /// `y_t = x_t^2 / 20 + v`, with unit noise variances, standard normal
    /// initial state, and a 0.5 time step. `t_prev` is the 0-based index of
    /// the state being propagated.
    pub fn kitagawa() -> Self {
        Self::new(
            |x, t| 0.5 * x + 25.0 * x / (1.0 + x * x) + 8.0 * (1.2 * t).cos(),
            1.0,
            |x| x * x / 20.0,
            1.0,
            0.0,
            1.0,
            0.5,
        )
        .expect("constants are valid")
    }

    /// Mean of the transition from state `x` at step index `t`.
    pub fn transition(&self, x: f64, t: f64) -> f64 {
        (self.transition_mean)(x, t)
    }

    pub fn observe(&self, x: f64) -> f64 {
        (self.observation_fn)(x)
    }

    /// Log observation density `log N(y; H(x), sigma_y^2)`.
    pub fn log_likelihood(&self, y: f64, x: f64) -> f64 {
        let z = (y - self.observe(x)) / self.sigma_y;
        -0.5 * z * z - self.sigma_y.ln() - 0.5 * LN_2PI
    }
}

impl std::fmt::Debug for StateSpaceModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StateSpaceModel")
            .field("sigma_x", &self.sigma_x)
            .field("sigma_y", &self.sigma_y)
            .field("init", &(self.init_mean, self.init_std))
            .field("dt", &self.dt)
            .finish()
    }
}

/// Names of the built-in state-space models.
pub fn builtin_models() -> Vec<&'static str> {
    vec!["kitagawa"]
}

/// Default parameter map for a built-in model.
pub fn model_defaults(name: &str) -> Result<BTreeMap<String, f64>> {
    match name {
        "kitagawa" => {
            let mut m = BTreeMap::new();
            m.insert("sigma_x".into(), 1.0);
            m.insert("sigma_y".into(), 1.0);
            m.insert("init_mean".into(), 0.0);
            m.insert("init_std".into(), 1.0);
            m.insert("dt".into(), 0.5);
            Ok(m)
        }
        other => Err(Error::UnknownName {
            kind: "model",
            name: other.into(),
        }),
    }
}

/// Builds a built-in model by name with parameter overrides.
pub fn state_space_by_name(name: &str, overrides: &BTreeMap<String, f64>) -> Result<StateSpaceModel> {
    let mut params = model_defaults(name)?;
    for (k, v) in overrides {
        match params.get_mut(k) {
            Some(slot) => *slot = *v,
            None => {
                return Err(Error::UnknownName {
                    kind: "model parameter",
                    name: format!("{name}.{k}"),
                })
            }
        }
    }
    match name {
        "kitagawa" => StateSpaceModel::new(
            |x, t| 0.5 * x + 25.0 * x / (1.0 + x * x) + 8.0 * (1.2 * t).cos(),
            params["sigma_x"],
            |x| x * x / 20.0,
            params["sigma_y"],
            params["init_mean"],
            params["init_std"],
            params["dt"],
        ),
        _ => unreachable!("validated by model_defaults"),
    }
}

/// Simulates a truth trajectory and its observations: returns
/// `(x_0..x_T, y_1..y_T)` with an observation at every step after the start.
pub fn simulate_truth(
    model: &StateSpaceModel,
    t_steps: usize,
    rng: &mut dyn RngCore,
) -> (Vec<f64>, Vec<f64>) {
    let mut states = Vec::with_capacity(t_steps + 1);
    let mut obs = Vec::with_capacity(t_steps);
    let z0: f64 = StandardNormal.sample(rng);
    let mut x = model.init_mean + model.init_std * z0;
    states.push(x);
    for t in 0..t_steps {
        let w: f64 = StandardNormal.sample(rng);
        x = model.transition(x, t as f64) + model.sigma_x * w;
        states.push(x);
        let v: f64 = StandardNormal.sample(rng);
        obs.push(model.observe(x) + model.sigma_y * v);
    }
    (states, obs)
}

/// Equal-weight Gaussian mixture over propagated particle centers; the
/// closed-form proper prior of the bridging filter (integrates to 1).
#[derive(Clone, Debug)]
pub struct MixturePrior {
    centers: Vec<f64>,
    std: f64,
}

impl MixturePrior {
    pub fn new(centers: Vec<f64>, std: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidArgument("mixture needs >= 1 center".into()));
        }
        if !(std > 0.0 && std.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "mixture needs a positive finite spread, got {std}"
            )));
        }
        Ok(Self { centers, std })
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let inv = 1.0 / self.std;
        let mut mx = f64::NEG_INFINITY;
        for &c in &self.centers {
            let z = (x - c) * inv;
            let l = -0.5 * z * z;
            if l > mx {
                mx = l;
            }
        }
        let mut sum = 0.0;
        for &c in &self.centers {
            let z = (x - c) * inv;
            sum += (-0.5 * z * z - mx).exp();
        }
        mx + sum.ln() - (self.centers.len() as f64).ln() - self.std.ln() - 0.5 * LN_2PI
    }

    pub fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let i = rng.gen_range(0..self.centers.len());
                let z: f64 = StandardNormal.sample(rng);
                self.centers[i] + self.std * z
            })
            .collect()
    }

    /// `[min center - k std, max center + k std]`.
    pub fn envelope(&self, k: f64) -> (f64, f64) {
        let lo = self.centers.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.centers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo - k * self.std, hi + k * self.std)
    }
}

/// Stage sampler used inside each filter step's schedule.
#[derive(Clone, Debug)]
pub enum FilterStageSampler {
    /// Exact-to-grid inverse-CDF draws from the tabulated stage density.
    /// With `systematic` set, each stage uses one uniform offset and strided
    /// positions (low-variance); otherwise draws are iid.
    Grid { systematic: bool },
    /// Random-walk Metropolis on the true (not tabulated) stage density.
    Metropolis(MetropolisTuning),
}

/// Grid construction policy for the per-step posterior.
#[derive(Clone, Debug)]
pub struct GridPolicy {
    pub initial_points: usize,
    pub max_points: usize,
    /// Envelope half-width in mixture standard deviations.
    pub envelope_sigmas: f64,
    /// Envelope cap; coverage failure past this is fatal.
    pub max_envelope_sigmas: f64,
    /// Refinement stops when the relative mass change per doubling drops
    /// below this.
    pub mass_rel_tol: f64,
    /// Envelope is widened while doubling it grows the mass by more than
    /// this relative amount.
    pub coverage_growth_tol: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self {
            initial_points: 1025,
            max_points: 32_769,
            envelope_sigmas: 8.0,
            max_envelope_sigmas: 64.0,
            mass_rel_tol: 1e-6,
            coverage_growth_tol: 1e-3,
        }
    }
}

/// Per-step schedule configuration of the bridging filter.
#[derive(Clone, Debug)]
pub struct FilterScheduleConfig {
    pub num_stages: usize,
    pub h: HomotopyFn,
    pub n_per_stage: usize,
    pub sampler: FilterStageSampler,
    pub grid: GridPolicy,
}

impl Default for FilterScheduleConfig {
    fn default() -> Self {
        Self {
            num_stages: 10,
            h: HomotopyFn::Identity,
            n_per_stage: 4096,
            sampler: FilterStageSampler::Grid { systematic: true },
            grid: GridPolicy::default(),
        }
    }
}

/// Options of the bridging filter beyond the per-step schedule.
#[derive(Clone, Debug)]
pub struct HomotopyPfConfig {
    pub schedule: FilterScheduleConfig,
    /// Spread multiplier applied to the mixture when the observation
    /// likelihood peaks outside the mixture's 6-sigma envelope. 1.0 disables
    /// inflation.
    pub inflation_factor: f64,
    /// Record the independent quadrature value of the step normalization.
    pub record_oracle: bool,
    /// Keep a downsampled copy of each step's posterior density.
    pub record_density: bool,
}

impl Default for HomotopyPfConfig {
    fn default() -> Self {
        Self {
            schedule: FilterScheduleConfig::default(),
            inflation_factor: 1.0,
            record_oracle: true,
            record_density: false,
        }
    }
}

/// The explicit posterior of one bridging-filter step.
#[derive(Clone, Debug)]
pub struct PosteriorRecord {
    pub grid_x: Vec<f64>,
    /// `lik * mixture / Zbar` on the grid.
    pub grid_density: Vec<f64>,
    pub z_bar: f64,
    pub mean: f64,
    pub std: f64,
}

/// Output of one bridging-filter step.
#[derive(Clone, Debug)]
pub struct HomotopyStepResult {
    pub posterior: PosteriorRecord,
    pub z_bar: f64,
    /// Delta-method standard error of `log Zbar` from the schedule trace
    /// (an iid bound; conservative for systematic stage draws).
    pub log_z_bar_se: f64,
    pub samples: Vec<f64>,
    pub trace: ScheduleTrace,
    pub mixture: MixturePrior,
    pub inflated: bool,
}

struct StepGrid {
    x: Vec<f64>,
    log_mix: Vec<f64>,
    log_lik: Vec<f64>,
    /// Trapezoid mass of `exp(log_mix + log_lik)`.
    mass: f64,
}

fn posterior_values(x: &[f64], mixture: &MixturePrior, model: &StateSpaceModel, y: f64) -> (Vec<f64>, Vec<f64>) {
    let log_mix: Vec<f64> = x.iter().map(|&v| mixture.log_density(v)).collect();
    let log_lik: Vec<f64> = x.iter().map(|&v| model.log_likelihood(y, v)).collect();
    (log_mix, log_lik)
}

fn trapezoid_mass(x: &[f64], log_f: impl Fn(usize) -> f64) -> f64 {
    let mut mass = 0.0;
    let mut prev = log_f(0).exp();
    for i in 1..x.len() {
        let cur = log_f(i).exp();
        mass += 0.5 * (prev + cur) * (x[i] - x[i - 1]);
        prev = cur;
    }
    mass
}

/// Builds the step grid: uniform nodes over the mixture envelope, refined by
/// midpoint insertion until the posterior mass stabilizes, with the envelope
/// widened while mass keeps appearing outside it.
fn build_step_grid(
    mixture: &MixturePrior,
    model: &StateSpaceModel,
    y: f64,
    policy: &GridPolicy,
    step: usize,
) -> Result<StepGrid> {
    let mut k = policy.envelope_sigmas;
    loop {
        let (lo, hi) = mixture.envelope(k);
        // Refine by doubling: midpoints only are newly evaluated.
        let mut n = policy.initial_points.max(3);
        if n % 2 == 0 {
            n += 1;
        }
        let mut x: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let (mut log_mix, mut log_lik) = posterior_values(&x, mixture, model, y);
        let mut mass = trapezoid_mass(&x, |i| log_mix[i] + log_lik[i]);
        while x.len() < policy.max_points {
            let mut nx = Vec::with_capacity(x.len() * 2 - 1);
            let mut nmix = Vec::with_capacity(nx.capacity());
            let mut nlik = Vec::with_capacity(nx.capacity());
            for i in 0..x.len() - 1 {
                nx.push(x[i]);
                nmix.push(log_mix[i]);
                nlik.push(log_lik[i]);
                let mid = 0.5 * (x[i] + x[i + 1]);
                nx.push(mid);
                nmix.push(mixture.log_density(mid));
                nlik.push(model.log_likelihood(y, mid));
            }
            nx.push(*x.last().unwrap());
            nmix.push(*log_mix.last().unwrap());
            nlik.push(*log_lik.last().unwrap());
            let new_mass = trapezoid_mass(&nx, |i| nmix[i] + nlik[i]);
            let done = (new_mass - mass).abs() <= policy.mass_rel_tol * new_mass.abs();
            x = nx;
            log_mix = nmix;
            log_lik = nlik;
            mass = new_mass;
            if done {
                break;
            }
        }
        // Does a wider envelope reveal mass this one misses?
        if 2.0 * k <= policy.max_envelope_sigmas {
            let (wlo, whi) = mixture.envelope(2.0 * k);
            let probe = 513;
            let side = |a: f64, b: f64| -> f64 {
                let px: Vec<f64> = (0..probe)
                    .map(|i| a + (b - a) * i as f64 / (probe - 1) as f64)
                    .collect();
                let (pm, pl) = posterior_values(&px, mixture, model, y);
                trapezoid_mass(&px, |i| pm[i] + pl[i])
            };
            let outside = side(wlo, lo) + side(hi, whi);
            if outside > policy.coverage_growth_tol * (mass + outside) {
                k *= 2.0;
                continue;
            }
        } else {
            // At the cap: any remaining outside growth is a coverage failure.
            let (wlo, whi) = (lo - (hi - lo), hi + (hi - lo));
            let probe = 513;
            let side = |a: f64, b: f64| -> f64 {
                let px: Vec<f64> = (0..probe)
                    .map(|i| a + (b - a) * i as f64 / (probe - 1) as f64)
                    .collect();
                let (pm, pl) = posterior_values(&px, mixture, model, y);
                trapezoid_mass(&px, |i| pm[i] + pl[i])
            };
            let outside = side(wlo, lo) + side(hi, whi);
            if outside > policy.coverage_growth_tol * (mass + outside) {
                return Err(Error::GridCoverage {
                    step,
                    grid_mass: mass,
                    z_bar: mass + outside,
                });
            }
        }
        return Ok(StepGrid {
            x,
            log_mix,
            log_lik,
            mass,
        });
    }
}

/// One step of the bridging filter: builds the mixture prior from the
/// propagated particles, estimates `Zbar = ∫ lik mixture dx` with the
/// prior-anchored schedule, forms the explicit posterior
/// `lik * mixture / Zbar`, and draws fresh particles from it by grid
/// inverse-CDF. `t_index` is the 0-based index of the state being propagated
/// (the benchmark transition is time-inhomogeneous).
pub fn homotopy_pf_step(
    model: &StateSpaceModel,
    prior_samples: &[f64],
    t_index: usize,
    y_next: f64,
    cfg: &HomotopyPfConfig,
    rng: &mut dyn RngCore,
) -> Result<HomotopyStepResult> {
    if prior_samples.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one prior sample".into(),
        ));
    }
    let centers: Vec<f64> = prior_samples
        .iter()
        .map(|&x| model.transition(x, t_index as f64))
        .collect();

    let mut sigma = model.sigma_x;
    let mut inflated = false;
    if cfg.inflation_factor > 1.0 {
        let base = MixturePrior::new(centers.clone(), sigma)?;
        if likelihood_peaks_outside(&base, model, y_next) {
            sigma *= cfg.inflation_factor;
            inflated = true;
        }
    }
    let mixture = MixturePrior::new(centers, sigma)?;

    let grid = build_step_grid(&mixture, model, y_next, &cfg.schedule.grid, t_index)?;
    let trace = run_step_schedule(&mixture, model, y_next, &grid, &cfg.schedule, rng)?;
    let z_bar = trace.z1();
    let log_z_bar_se = trace.log_z1_standard_error();

    // Coverage gate: the grid must hold at least 99.9% of the estimated mass.
    if grid.mass < 0.999 * z_bar {
        return Err(Error::GridCoverage {
            step: t_index,
            grid_mass: grid.mass,
            z_bar,
        });
    }

    // Explicit posterior and fresh particles.
    let shift = grid
        .x
        .iter()
        .enumerate()
        .map(|(i, _)| grid.log_mix[i] + grid.log_lik[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = (0..grid.x.len())
        .map(|i| (grid.log_mix[i] + grid.log_lik[i] - shift).exp())
        .collect();
    let dist = GridDist::new(grid.x.clone(), unnorm.clone())?;
    let (mean, std) = dist.mean_std();
    let samples: Vec<f64> = (0..prior_samples.len())
        .map(|_| dist.sample(rng.gen()))
        .collect();
    let grid_density: Vec<f64> = unnorm.iter().map(|f| f * (shift.exp() / z_bar)).collect();

    Ok(HomotopyStepResult {
        posterior: PosteriorRecord {
            grid_x: grid.x,
            grid_density,
            z_bar,
            mean,
            std,
        },
        z_bar,
        log_z_bar_se,
        samples,
        trace,
        mixture,
        inflated,
    })
}

fn likelihood_peaks_outside(mixture: &MixturePrior, model: &StateSpaceModel, y: f64) -> bool {
    let (lo6, hi6) = mixture.envelope(6.0);
    let span = (hi6 - lo6).max(1.0);
    let (wlo, whi) = (lo6 - 3.0 * span, hi6 + 3.0 * span);
    let probe = 2048;
    let mut max_inside = f64::NEG_INFINITY;
    let mut max_anywhere = f64::NEG_INFINITY;
    for i in 0..probe {
        let x = wlo + (whi - wlo) * i as f64 / (probe - 1) as f64;
        let l = model.log_likelihood(y, x);
        if l > max_anywhere {
            max_anywhere = l;
        }
        if x >= lo6 && x <= hi6 && l > max_inside {
            max_inside = l;
        }
    }
    max_anywhere > max_inside + 3.0
}

fn run_step_schedule(
    mixture: &MixturePrior,
    model: &StateSpaceModel,
    y: f64,
    grid: &StepGrid,
    cfg: &FilterScheduleConfig,
    rng: &mut dyn RngCore,
) -> Result<ScheduleTrace> {
    let m_total = cfg.num_stages;
    if m_total == 0 {
        return Err(Error::InvalidArgument("need at least one stage".into()));
    }
    let stages: Vec<f64> = (0..=m_total).map(|i| i as f64 / m_total as f64).collect();
    let n = cfg.n_per_stage;
    let mut records = Vec::with_capacity(m_total);
    let mut log_z = 0.0; // the mixture is proper: log Z0 = 0

    for m in 0..m_total {
        let h_m = cfg.h.eval(stages[m]);
        let h_next = cfg.h.eval(stages[m + 1]);
        let dh = h_next - h_m;
        let xs: Vec<f64> = match &cfg.sampler {
            FilterStageSampler::Grid { systematic } => {
                // Stage density on the shared grid: mixture * lik^{h_m}.
                let shift = (0..grid.x.len())
                    .map(|i| grid.log_mix[i] + h_m * grid.log_lik[i])
                    .fold(f64::NEG_INFINITY, f64::max);
                let pdf: Vec<f64> = (0..grid.x.len())
                    .map(|i| (grid.log_mix[i] + h_m * grid.log_lik[i] - shift).exp())
                    .collect();
                let dist = GridDist::new(grid.x.clone(), pdf)?;
                if *systematic {
                    let u0: f64 = rng.gen::<f64>() / n as f64;
                    (0..n).map(|j| dist.sample(u0 + j as f64 / n as f64)).collect()
                } else {
                    (0..n).map(|_| dist.sample(rng.gen())).collect()
                }
            }
            FilterStageSampler::Metropolis(tuning) => {
                metropolis_on_stage(mixture, model, y, h_m, n, tuning, rng)?
            }
        };
        // Stage weights use the true likelihood at the sampled points.
        let logs: Vec<f64> = xs
            .iter()
            .map(|&x| {
                if dh == 0.0 {
                    0.0
                } else {
                    dh * model.log_likelihood(y, x)
                }
            })
            .collect();
        let log_mu_bar = stats::log_mean_exp(&logs);
        let weight_variance = crate::schedule::log_weight_variance(&logs);
        records.push(StageRecord {
            m,
            s: stages[m],
            h_s: h_m,
            log_z_bar: log_z,
            log_mu_bar,
            weight_variance,
            population: n,
            warning: None,
        });
        log_z += log_mu_bar;
    }
    Ok(ScheduleTrace::assemble(0.0, records, None))
}

fn metropolis_on_stage(
    mixture: &MixturePrior,
    model: &StateSpaceModel,
    y: f64,
    h: f64,
    n: usize,
    tuning: &MetropolisTuning,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    let target = |x: f64| {
        let lm = mixture.log_density(x);
        if h == 0.0 {
            lm
        } else {
            lm + h * model.log_likelihood(y, x)
        }
    };
    let mut x = mixture.sample(1, rng)[0];
    let mut lx = target(x);
    let step = tuning.step_scale.unwrap_or(2.4 * mixture.std());
    let mut out = Vec::with_capacity(n);
    let iters = tuning.burn_in + n * tuning.thinning;
    for it in 0..iters {
        let z: f64 = StandardNormal.sample(rng);
        let cand = x + step * z;
        let lc = target(cand);
        if rng.gen::<f64>().ln() < lc - lx {
            x = cand;
            lx = lc;
        }
        if it >= tuning.burn_in && (it - tuning.burn_in) % tuning.thinning == tuning.thinning - 1 {
            out.push(x);
        }
    }
    Ok(out)
}

/// One time step of a filter trace.
#[derive(Clone, Debug)]
pub struct FilterStep {
    /// 1-based step index.
    pub step: usize,
    /// Physical time `step * dt`.
    pub time: f64,
    pub observation: f64,
    pub post_mean: f64,
    pub post_std: f64,
    pub particles: Vec<f64>,
    /// Bridging filter only.
    pub z_bar: Option<f64>,
    pub z_oracle: Option<f64>,
    /// Bootstrap filter only.
    pub weights: Option<Vec<f64>>,
    pub n_eff: Option<f64>,
    pub collapsed: bool,
    pub inflated: bool,
    /// Downsampled posterior density, when recorded.
    pub density: Option<(Vec<f64>, Vec<f64>)>,
}

/// Full filter output.
#[derive(Clone, Debug)]
pub struct FilterTrace {
    pub steps: Vec<FilterStep>,
}

impl FilterTrace {
    /// Root-mean-square error of the posterior means against `truth`
    /// (`truth[t]` is the state at step `t`; index 0 is the initial state).
    pub fn rmse(&self, truth: &[f64]) -> f64 {
        let sum: f64 = self
            .steps
            .iter()
            .map(|s| {
                let d = s.post_mean - truth[s.step];
                d * d
            })
            .sum();
        (sum / self.steps.len() as f64).sqrt()
    }

    pub fn collapse_count(&self) -> usize {
        self.steps.iter().filter(|s| s.collapsed).count()
    }

    /// Ratios `Zbar / Z_oracle` for steps that carry both.
    pub fn z_ratios(&self) -> Vec<f64> {
        self.steps
            .iter()
            .filter_map(|s| match (s.z_bar, s.z_oracle) {
                (Some(zb), Some(zo)) => Some(zb / zo),
                _ => None,
            })
            .collect()
    }

    /// CSV columns:
    /// `t,truth,observation,post_mean,post_std,z_bar,z_oracle,n_eff,collapse_flag`.
    pub fn to_csv(&self, truth: Option<&[f64]>) -> String {
        let mut out =
            String::from("t,truth,observation,post_mean,post_std,z_bar,z_oracle,n_eff,collapse_flag\n");
        for s in &self.steps {
            let tr = truth.map_or(String::new(), |tr| tr[s.step].to_string());
            let zb = s.z_bar.map_or(String::new(), |v| v.to_string());
            let zo = s.z_oracle.map_or(String::new(), |v| v.to_string());
            let ne = s.n_eff.map_or(String::new(), |v| v.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                s.time,
                tr,
                s.observation,
                s.post_mean,
                s.post_std,
                zb,
                zo,
                ne,
                u8::from(s.collapsed)
            ));
        }
        out
    }
}

/// Standard sequential importance resampling with systematic resampling at
/// every step. A step whose weights all underflow to zero is recorded as a
/// collapse event and continues with uniform weights.
pub fn bootstrap_pf(
    model: &StateSpaceModel,
    observations: &[f64],
    n_particles: usize,
    rng: &mut dyn RngCore,
) -> Result<FilterTrace> {
    if n_particles == 0 {
        return Err(Error::InvalidArgument("need n_particles >= 1".into()));
    }
    let mut particles: Vec<f64> = (0..n_particles)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            model.init_mean + model.init_std * z
        })
        .collect();
    let mut steps = Vec::with_capacity(observations.len());
    for (idx, &y) in observations.iter().enumerate() {
        let t = idx; // index of the state being propagated
        for p in particles.iter_mut() {
            let w: f64 = StandardNormal.sample(rng);
            *p = model.transition(*p, t as f64) + model.sigma_x * w;
        }
        let log_w: Vec<f64> = particles.iter().map(|&x| model.log_likelihood(y, x)).collect();
        let mx = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut collapsed = false;
        let mut weights: Vec<f64>;
        if mx == f64::NEG_INFINITY {
            collapsed = true;
            weights = vec![1.0 / n_particles as f64; n_particles];
        } else {
            weights = log_w.iter().map(|l| (l - mx).exp()).collect();
            let sum: f64 = weights.iter().sum();
            for w in weights.iter_mut() {
                *w /= sum;
            }
        }
        let (mean, std) = stats::weighted_mean_std(&particles, &weights);
        let n_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let ancestors = systematic_resample(&weights, n_particles, rng)?;
        particles = ancestors.iter().map(|&i| particles[i]).collect();
        steps.push(FilterStep {
            step: idx + 1,
            time: (idx + 1) as f64 * model.dt,
            observation: y,
            post_mean: mean,
            post_std: std,
            particles: particles.clone(),
            z_bar: None,
            z_oracle: None,
            weights: Some(weights),
            n_eff: Some(n_eff),
            collapsed,
            inflated: false,
            density: None,
        });
    }
    Ok(FilterTrace { steps })
}

/// Quadrature of `∫ lik(y|x) mixture(x) dx`; the independent check on the
/// per-step `Zbar`. The integrand is bounded by a constant times the
/// mixture, so a wide finite envelope loses only Gaussian-tail mass.
pub fn step_normalization_oracle(
    mixture: &MixturePrior,
    model: &StateSpaceModel,
    y: f64,
) -> Result<f64> {
    let (lo, hi) = mixture.envelope(16.0);
    let spec = QuadratureSpec::new(Domain::Finite { lo, hi });
    integrate(
        |x| (mixture.log_density(x) + model.log_likelihood(y, x)).exp(),
        &spec,
    )
}

/// The bridging particle filter: iterates [`homotopy_pf_step`] over the
/// observations, drawing `n_particles` fresh posterior samples each step.
pub fn homotopy_pf(
    model: &StateSpaceModel,
    observations: &[f64],
    n_particles: usize,
    cfg: &HomotopyPfConfig,
    rng: &mut dyn RngCore,
) -> Result<FilterTrace> {
    if n_particles == 0 {
        return Err(Error::InvalidArgument("need n_particles >= 1".into()));
    }
    let mut particles: Vec<f64> = (0..n_particles)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            model.init_mean + model.init_std * z
        })
        .collect();
    let mut steps = Vec::with_capacity(observations.len());
    for (idx, &y) in observations.iter().enumerate() {
        let r = homotopy_pf_step(model, &particles, idx, y, cfg, rng)?;
        let z_oracle = if cfg.record_oracle {
            Some(step_normalization_oracle(&r.mixture, model, y)?)
        } else {
            None
        };
        let density = if cfg.record_density {
            Some(downsample_density(
                &r.posterior.grid_x,
                &r.posterior.grid_density,
                201,
            ))
        } else {
            None
        };
        particles = r.samples.clone();
        steps.push(FilterStep {
            step: idx + 1,
            time: (idx + 1) as f64 * model.dt,
            observation: y,
            post_mean: r.posterior.mean,
            post_std: r.posterior.std,
            particles: r.samples,
            z_bar: Some(r.z_bar),
            z_oracle,
            weights: None,
            n_eff: None,
            collapsed: false,
            inflated: r.inflated,
            density,
        });
    }
    Ok(FilterTrace { steps })
}

fn downsample_density(x: &[f64], f: &[f64], target: usize) -> (Vec<f64>, Vec<f64>) {
    if x.len() <= target {
        return (x.to_vec(), f.to_vec());
    }
    let stride = (x.len() - 1) as f64 / (target - 1) as f64;
    let idx: Vec<usize> = (0..target).map(|i| (i as f64 * stride).round() as usize).collect();
    (
        idx.iter().map(|&i| x[i]).collect(),
        idx.iter().map(|&i| f[i]).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::RngStream;
    use crate::stats::{mean, sample_variance, two_sample_ks};

    #[test]
    fn noise_free_recursion_is_deterministic() {
        let model = StateSpaceModel::new(
            |x, t| 0.5 * x + 25.0 * x / (1.0 + x * x) + 8.0 * (1.2 * t).cos(),
            0.0,
            |x| x * x / 20.0,
            0.0,
            0.0,
            0.0,
            0.5,
        )
        .unwrap();
        let mut rng = RngStream::new(1, 0).rng();
        let (xs, ys) = simulate_truth(&model, 2, &mut rng);
        assert_eq!(xs[0], 0.0);
        // From x0 = 0 the drift is the cosine term alone: x1 = 8 cos(0).
        assert_eq!(xs[1], 8.0);
        assert_eq!(ys[0], 8.0 * 8.0 / 20.0);
        let x2 = 0.5 * 8.0 + 25.0 * 8.0 / 65.0 + 8.0 * (1.2f64).cos();
        assert!((xs[2] - x2).abs() < 1e-15);
    }

    #[test]
    fn process_noise_variance_is_unit() {
        let model = StateSpaceModel::kitagawa();
        let mut rng = RngStream::new(2, 0).rng();
        let (xs, _) = simulate_truth(&model, 10_000, &mut rng);
        let residuals: Vec<f64> = (1..xs.len())
            .map(|t| xs[t] - model.transition(xs[t - 1], (t - 1) as f64))
            .collect();
        let v = sample_variance(&residuals);
        assert!((v - 1.0).abs() < 0.05, "residual variance = {v}");
    }

    #[test]
    fn model_catalog_and_overrides() {
        assert_eq!(builtin_models(), vec!["kitagawa"]);
        let mut over = BTreeMap::new();
        over.insert("sigma_y".to_string(), 2.0);
        let m = state_space_by_name("kitagawa", &over).unwrap();
        assert_eq!(m.sigma_y, 2.0);
        assert_eq!(m.dt, 0.5);
        let mut bad = BTreeMap::new();
        bad.insert("nope".to_string(), 1.0);
        assert!(matches!(
            state_space_by_name("kitagawa", &bad),
            Err(Error::UnknownName { .. })
        ));
    }

    #[test]
    fn single_particle_bootstrap_is_a_reweighted_simulation() {
        let model = StateSpaceModel::kitagawa();
        let mut rng = RngStream::new(3, 0).rng();
        let (_, ys) = simulate_truth(&model, 10, &mut rng);
        let trace = bootstrap_pf(&model, &ys, 1, &mut rng).unwrap();
        for s in &trace.steps {
            assert_eq!(s.weights.as_ref().unwrap(), &vec![1.0]);
            assert_eq!(s.post_mean, s.particles[0]);
            assert_eq!(s.post_std, 0.0);
            assert_eq!(s.n_eff, Some(1.0));
        }
    }

    #[test]
    fn bootstrap_tracks_kalman_oracle_on_linear_model() {
        // x' = 0.9 x + w, y = x + v: the Kalman filter is exact.
        let (a, sx, sy) = (0.9, 0.5, 0.4);
        let model = StateSpaceModel::new(move |x, _| a * x, sx, |x| x, sy, 0.0, 1.0, 1.0).unwrap();
        let mut rng = RngStream::new(4, 0).rng();
        let (_, ys) = simulate_truth(&model, 30, &mut rng);
        let n = 10_000;
        let trace = bootstrap_pf(&model, &ys, n, &mut rng).unwrap();

        // Kalman recursion (the oracle lives here in test code).
        let mut m = 0.0;
        let mut p = 1.0;
        let mut kalman_means = Vec::new();
        for &y in &ys {
            let mp = a * m;
            let pp = a * a * p + sx * sx;
            let k = pp / (pp + sy * sy);
            m = mp + k * (y - mp);
            p = (1.0 - k) * pp;
            kalman_means.push(m);
        }
        for (s, km) in trace.steps.iter().zip(&kalman_means) {
            let se = s.post_std / (s.n_eff.unwrap()).sqrt();
            assert!(
                (s.post_mean - km).abs() < 3.0 * se + 0.02,
                "step {}: {} vs {} (se {se})",
                s.step,
                s.post_mean,
                km
            );
        }
    }

    #[test]
    fn bootstrap_small_ensemble_shows_collapse_diagnostics() {
        // Swept seeds at n = 10: the effective sample size hits the floor on
        // some step for at least one seed (weight concentration).
        let model = StateSpaceModel::kitagawa();
        let mut any_low = false;
        for seed in 0..20u64 {
            let mut rng = RngStream::new(5, seed).rng();
            let (_, ys) = simulate_truth(&model, 50, &mut rng);
            let trace = bootstrap_pf(&model, &ys, 10, &mut rng).unwrap();
            let min_neff = trace
                .steps
                .iter()
                .filter_map(|s| s.n_eff)
                .fold(f64::INFINITY, f64::min);
            if min_neff < 1.5 || trace.collapse_count() > 0 {
                any_low = true;
            }
        }
        assert!(any_low, "no weight-collapse diagnostics across 20 seeds");
    }

    #[test]
    fn flat_likelihood_returns_the_mixture() {
        // sigma_y -> infinity limit realized as a constant observation map:
        // the likelihood does not depend on x, so Zbar = 1 exactly and the
        // posterior is the mixture itself.
        let model = StateSpaceModel::new(|x, _| x, 1.0, |_| 0.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let mut rng = RngStream::new(6, 0).rng();
        let prior: Vec<f64> = (0..50).map(|i| -2.0 + 4.0 * i as f64 / 49.0).collect();
        let cfg = HomotopyPfConfig::default();
        let r = homotopy_pf_step(&model, &prior, 0, 0.3, &cfg, &mut rng).unwrap();
        let lik = model.log_likelihood(0.3, 1.0);
        // Every stage weight equals the same constant... the likelihood is
        // x-independent, so Zbar = exp(sum dh * log lik) = lik exactly.
        assert!((r.z_bar.ln() - lik).abs() < 1e-12);
        // Fresh samples match direct mixture draws distributionally.
        let direct = r.mixture.sample(r.samples.len() * 40, &mut rng);
        let ks = two_sample_ks(&r.samples, &direct);
        assert!(ks.p_value > 0.01, "KS p = {}", ks.p_value);
    }

    #[test]
    fn single_prior_sample_matches_conjugate_gaussian() {
        // One particle, identity transition/observation: the step posterior
        // is the product of two Gaussians, available in closed form.
        let (sx, sy) = (1.0, 0.5);
        let model = StateSpaceModel::new(|x, _| x, sx, |x| x, sy, 0.0, 1.0, 1.0).unwrap();
        let y = 0.8;
        let prior = [0.2];
        let mut rng = RngStream::new(7, 0).rng();
        let r = homotopy_pf_step(&model, &prior, 0, y, &HomotopyPfConfig::default(), &mut rng)
            .unwrap();
        let c = prior[0]; // the transition is the identity
        let var = 1.0 / (1.0 / (sx * sx) + 1.0 / (sy * sy));
        let mean = var * (c / (sx * sx) + y / (sy * sy));
        // Z = N(y; c, sx^2 + sy^2).
        let z = {
            let v = sx * sx + sy * sy;
            (-0.5 * (y - c) * (y - c) / v).exp() / (v * 2.0 * std::f64::consts::PI).sqrt()
        };
        assert!((r.z_bar - z).abs() / z < 3.0 * r.log_z_bar_se.max(1e-4), "z");
        assert!((r.posterior.mean - mean).abs() < 1e-3);
        assert!((r.posterior.std - var.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn step_z_matches_quadrature_oracle() {
        let model = StateSpaceModel::kitagawa();
        let mut rng = RngStream::new(8, 0).rng();
        let (_, ys) = simulate_truth(&model, 8, &mut rng);
        let cfg = HomotopyPfConfig::default();
        let mut particles: Vec<f64> = (0..20).map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        }).collect();
        for (idx, &y) in ys.iter().enumerate() {
            let r = homotopy_pf_step(&model, &particles, idx, y, &cfg, &mut rng).unwrap();
            let oracle = step_normalization_oracle(&r.mixture, &model, y).unwrap();
            let rel = (r.z_bar - oracle).abs() / oracle;
            assert!(
                rel < 3.0 * r.log_z_bar_se + 1e-4,
                "step {idx}: rel {rel}, se {}",
                r.log_z_bar_se
            );
            // The constructed posterior integrates to Z_true / Zbar ~ 1.
            let integral = trapezoid(&r.posterior.grid_x, &r.posterior.grid_density);
            assert!((integral - 1.0).abs() < 1e-3, "integral = {integral}");
            particles = r.samples;
        }
    }

    fn trapezoid(x: &[f64], f: &[f64]) -> f64 {
        (1..x.len())
            .map(|i| 0.5 * (f[i] + f[i - 1]) * (x[i] - x[i - 1]))
            .sum()
    }

    #[test]
    fn homotopy_filter_is_reproducible() {
        let model = StateSpaceModel::kitagawa();
        let run = || {
            let mut rng = RngStream::new(9, 0).rng();
            let (_, ys) = simulate_truth(&model, 12, &mut rng);
            let trace = homotopy_pf(&model, &ys, 10, &HomotopyPfConfig::default(), &mut rng).unwrap();
            trace
        };
        let a = run();
        let b = run();
        for (sa, sb) in a.steps.iter().zip(&b.steps) {
            assert_eq!(sa.particles, sb.particles);
            assert_eq!(sa.z_bar, sb.z_bar);
        }
    }

    #[test]
    fn bootstrap_is_reproducible() {
        let model = StateSpaceModel::kitagawa();
        let run = || {
            let mut rng = RngStream::new(10, 0).rng();
            let (_, ys) = simulate_truth(&model, 12, &mut rng);
            bootstrap_pf(&model, &ys, 20, &mut rng).unwrap()
        };
        let a = run();
        let b = run();
        for (sa, sb) in a.steps.iter().zip(&b.steps) {
            assert_eq!(sa.particles, sb.particles);
        }
    }

    #[test]
    fn metropolis_stage_sampler_agrees_with_grid_sampler() {
        let model = StateSpaceModel::kitagawa();
        let mut rng = RngStream::new(11, 0).rng();
        let prior: Vec<f64> = (0..10).map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        }).collect();
        let y = 1.1;
        let grid_cfg = HomotopyPfConfig::default();
        let mh_cfg = HomotopyPfConfig {
            schedule: FilterScheduleConfig {
                n_per_stage: 4000,
                sampler: FilterStageSampler::Metropolis(MetropolisTuning {
                    burn_in: 500,
                    thinning: 2,
                    ..MetropolisTuning::default()
                }),
                ..FilterScheduleConfig::default()
            },
            ..HomotopyPfConfig::default()
        };
        let a = homotopy_pf_step(&model, &prior, 0, y, &grid_cfg, &mut rng).unwrap();
        let b = homotopy_pf_step(&model, &prior, 0, y, &mh_cfg, &mut rng).unwrap();
        let rel = (a.z_bar - b.z_bar).abs() / a.z_bar;
        assert!(rel < 3.0 * (b.log_z_bar_se + a.log_z_bar_se) + 0.02, "rel = {rel}");
    }

    #[test]
    fn mixture_prior_is_normalized_and_samplable() {
        let mix = MixturePrior::new(vec![-3.0, 0.5, 4.0], 0.8).unwrap();
        let spec = QuadratureSpec::new(Domain::Real { scale: 5.0 });
        let mass = integrate(|x| mix.log_density(x).exp(), &spec).unwrap();
        assert!((mass - 1.0).abs() < 1e-9, "mass = {mass}");
        let mut rng = RngStream::new(12, 0).rng();
        let xs = mix.sample(60_000, &mut rng);
        let want_mean = (-3.0 + 0.5 + 4.0) / 3.0;
        let m = mean(&xs);
        assert!((m - want_mean).abs() < 0.05, "mean = {m}");
    }

    #[test]
    fn inflation_triggers_only_when_enabled_and_needed() {
        let model = StateSpaceModel::kitagawa();
        // Particles clustered near zero while the observation sits far away:
        // likelihood peaks at +-sqrt(20 y), outside the 6-sigma envelope
        // for a tight cluster with small sigma_x.
        let tight = StateSpaceModel::new(
            |x, _| 0.01 * x,
            0.05,
            |x| x * x / 20.0,
            1.0,
            0.0,
            1.0,
            0.5,
        )
        .unwrap();
        let prior = vec![0.0, 0.01, -0.01];
        let y = 18.0; // peak near +-19
        let mut rng = RngStream::new(13, 0).rng();
        let off = HomotopyPfConfig::default();
        let r = homotopy_pf_step(&tight, &prior, 0, y, &off, &mut rng);
        // With inflation off the grid cannot cover the likelihood mass, but
        // the schedule is also envelope-restricted, so either outcome must
        // leave z far below the whole-line oracle or fail coverage.
        if let Ok(r) = r {
            assert!(!r.inflated);
        }
        let on = HomotopyPfConfig {
            inflation_factor: 40.0,
            ..HomotopyPfConfig::default()
        };
        let mut rng2 = RngStream::new(13, 0).rng();
        let r2 = homotopy_pf_step(&tight, &prior, 0, y, &on, &mut rng2).unwrap();
        assert!(r2.inflated);
        // Sanity on the benchmark model: no inflation trigger in ordinary steps.
        let mut rng3 = RngStream::new(13, 1).rng();
        let (_, ys) = simulate_truth(&model, 3, &mut rng3);
        let prior3: Vec<f64> = (0..10).map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng3);
            z
        }).collect();
        let r3 = homotopy_pf_step(
            &model,
            &prior3,
            0,
            ys[0],
            &HomotopyPfConfig {
                inflation_factor: 2.0,
                ..HomotopyPfConfig::default()
            },
            &mut rng3,
        )
        .unwrap();
        assert!(!r3.inflated);
    }

    #[test]
    fn trace_csv_has_documented_columns() {
        let model = StateSpaceModel::kitagawa();
        let mut rng = RngStream::new(14, 0).rng();
        let (xs, ys) = simulate_truth(&model, 3, &mut rng);
        let trace = bootstrap_pf(&model, &ys, 5, &mut rng).unwrap();
        let csv = trace.to_csv(Some(&xs));
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,truth,observation,post_mean,post_std,z_bar,z_oracle,n_eff,collapse_flag"
        );
        let first = lines.next().unwrap();
        assert!(first.starts_with("0.5,"), "time column uses dt: {first}");
        assert_eq!(csv.lines().count(), 4);
    }
}
