//! Density pairs, bridging paths, and the built-in catalog.
//!
//! A [`DensityPair`] holds the log densities of an (improper) target `q` and a
//! reference `p` with known normalization `Z0`, together with optional
//! capabilities: an exact sampler for the bridging family, a reference
//! sampler, and an upper bound on `sup q/p`. All arithmetic is carried out in
//! log space.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal, StudentT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::oracle::Domain;

type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type DrawFn = Arc<dyn Fn(usize, &mut dyn RngCore) -> Vec<f64> + Send + Sync>;
type ThetaDrawFn = Arc<dyn Fn(f64, usize, &mut dyn RngCore) -> Vec<f64> + Send + Sync>;

/// A deterministic log-density evaluator on `R^K`.
///
/// Evaluators return `-inf` (never NaN) where the density vanishes.
#[derive(Clone)]
pub struct LogDensity {
    dim: usize,
    eval: EvalFn,
}

impl LogDensity {
    pub fn new(dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        assert!(dim >= 1, "log density must have positive dimension");
        Self {
            dim,
            eval: Arc::new(f),
        }
    }

    /// One-dimensional convenience constructor.
    pub fn from_fn1(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(1, move |x| f(x[0]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        (self.eval)(x)
    }

    pub fn eval1(&self, x: f64) -> f64 {
        debug_assert_eq!(self.dim, 1);
        (self.eval)(std::slice::from_ref(&x))
    }
}

impl fmt::Debug for LogDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LogDensity(dim={})", self.dim)
    }
}

/// The bridging exponent map `h : [0,1] -> [0,1]`.
#[derive(Clone)]
pub enum HomotopyFn {
    /// `h(s) = s`.
    Identity,
    /// `h(s) = s^alpha` with `alpha > 0`.
    Power(f64),
    /// Tabulated monotone map with linear interpolation. Must pin the
    /// endpoints `(0,0)` and `(1,1)`; flat segments are allowed.
    Tabulated(Arc<Vec<(f64, f64)>>),
}

impl HomotopyFn {
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "power-law exponent must be finite and positive, got {alpha}"
            )));
        }
        Ok(HomotopyFn::Power(alpha))
    }

    pub fn tabulated(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidArgument(
                "tabulated map needs at least two knots".into(),
            ));
        }
        let first = knots[0];
        let last = knots[knots.len() - 1];
        if first != (0.0, 0.0) || last != (1.0, 1.0) {
            return Err(Error::InvalidArgument(
                "tabulated map must start at (0,0) and end at (1,1)".into(),
            ));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidArgument(
                    "tabulated map abscissae must be strictly increasing".into(),
                ));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::InvalidArgument(
                    "tabulated map must be non-decreasing".into(),
                ));
            }
        }
        Ok(HomotopyFn::Tabulated(Arc::new(knots)))
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            HomotopyFn::Identity => s,
            HomotopyFn::Power(alpha) => {
                if s == 0.0 {
                    0.0
                } else if s == 1.0 {
                    1.0
                } else {
                    s.powf(*alpha)
                }
            }
            HomotopyFn::Tabulated(knots) => {
                if s <= 0.0 {
                    return 0.0;
                }
                if s >= 1.0 {
                    return 1.0;
                }
                let i = knots.partition_point(|k| k.0 <= s).max(1) - 1;
                let (s0, h0) = knots[i];
                let (s1, h1) = knots[i + 1];
                h0 + (h1 - h0) * (s - s0) / (s1 - s0)
            }
        }
    }

    /// Short label used in CSV columns and plot legends.
    pub fn label(&self) -> String {
        match self {
            HomotopyFn::Identity => "s".into(),
            HomotopyFn::Power(a) => format!("s^{a}"),
            HomotopyFn::Tabulated(k) => format!("tab[{}]", k.len()),
        }
    }
}

impl fmt::Debug for HomotopyFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HomotopyFn({})", self.label())
    }
}

/// A bridging path: the exponent map `h` plus a stage partition of `[0,1]`.
#[derive(Clone, Debug)]
pub struct HomotopyPath {
    h: HomotopyFn,
    stages: Vec<f64>,
}

impl HomotopyPath {
    pub fn new(h: HomotopyFn, stages: Vec<f64>) -> Result<Self> {
        if stages.len() < 2 {
            return Err(Error::InvalidArgument(
                "stage partition needs at least the two endpoints".into(),
            ));
        }
        if stages[0] != 0.0 || *stages.last().unwrap() != 1.0 {
            return Err(Error::InvalidArgument(
                "stage partition must start at exactly 0 and end at exactly 1".into(),
            ));
        }
        for w in stages.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidArgument(format!(
                    "stage partition must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        for w in stages.windows(2) {
            if h.eval(w[1]) < h.eval(w[0]) {
                return Err(Error::InvalidArgument(
                    "h must be non-decreasing along the partition".into(),
                ));
            }
        }
        if h.eval(0.0) != 0.0 || h.eval(1.0) != 1.0 {
            return Err(Error::InvalidArgument(
                "h must satisfy h(0) = 0 and h(1) = 1".into(),
            ));
        }
        Ok(Self { h, stages })
    }

    /// Equal-spaced partition with `m` stages.
    pub fn uniform(m: usize, h: HomotopyFn) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("need at least one stage".into()));
        }
        let stages = (0..=m).map(|i| i as f64 / m as f64).collect();
        Self::new(h, stages)
    }

    pub fn identity(m: usize) -> Result<Self> {
        Self::uniform(m, HomotopyFn::Identity)
    }

    pub fn stages(&self) -> &[f64] {
        &self.stages
    }

    /// Number of stages `M` (the partition has `M + 1` points).
    pub fn num_stages(&self) -> usize {
        self.stages.len() - 1
    }

    pub fn h(&self, s: f64) -> f64 {
        self.h.eval(s)
    }

    pub fn h_fn(&self) -> &HomotopyFn {
        &self.h
    }

    pub fn h_at_stage(&self, m: usize) -> f64 {
        self.h.eval(self.stages[m])
    }

    pub fn delta_h(&self, m: usize) -> f64 {
        self.h_at_stage(m + 1) - self.h_at_stage(m)
    }
}

/// Target / reference pair: the endpoints of the bridging family.
#[derive(Clone)]
pub struct DensityPair {
    log_q: LogDensity,
    log_p: LogDensity,
    log_z0: f64,
    ratio_sup_bound: Option<f64>,
    support: Domain,
    exact_theta: Option<ThetaDrawFn>,
    reference: Option<DrawFn>,
    init_hint: Option<Vec<f64>>,
    log_ratio_override: Option<EvalFn>,
}

impl DensityPair {
    pub fn new(log_q: LogDensity, log_p: LogDensity, log_z0: f64) -> Result<Self> {
        if log_q.dim() != log_p.dim() {
            return Err(Error::DimensionMismatch {
                expected: log_p.dim(),
                got: log_q.dim(),
            });
        }
        if !log_z0.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "log Z0 must be finite, got {log_z0}"
            )));
        }
        Ok(Self {
            log_q,
            log_p,
            log_z0,
            ratio_sup_bound: None,
            support: Domain::default(),
            exact_theta: None,
            reference: None,
            init_hint: None,
            log_ratio_override: None,
        })
    }

    pub fn with_ratio_sup_bound(mut self, k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ratio sup bound must be finite and positive, got {k}"
            )));
        }
        self.ratio_sup_bound = Some(k);
        Ok(self)
    }

    pub fn with_support(mut self, support: Domain) -> Self {
        self.support = support;
        self
    }

    /// Registers an exact sampler for `theta_h ∝ q^h p^{1-h}`; the closure
    /// receives the exponent `h`, the number of draws, and an RNG, and returns
    /// the draws flattened in row-major order.
    pub fn with_exact_theta_sampler(
        mut self,
        f: impl Fn(f64, usize, &mut dyn RngCore) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.exact_theta = Some(Arc::new(f));
        self
    }

    /// Registers a sampler for the normalized reference `p / Z0`.
    pub fn with_reference_sampler(
        mut self,
        f: impl Fn(usize, &mut dyn RngCore) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.reference = Some(Arc::new(f));
        self
    }

    /// A point of positive density, used to start Markov chains.
    pub fn with_init_hint(mut self, x: Vec<f64>) -> Self {
        self.init_hint = Some(x);
        self
    }

    /// Analytic `log(q/p)`, for pairs where `q` is built as `p` times a
    /// known factor; avoids the cancellation of evaluating the difference.
    pub fn with_log_ratio(
        mut self,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.log_ratio_override = Some(Arc::new(f));
        self
    }

    pub fn dim(&self) -> usize {
        self.log_q.dim()
    }

    pub fn log_q(&self, x: &[f64]) -> f64 {
        self.log_q.eval(x)
    }

    pub fn log_p(&self, x: &[f64]) -> f64 {
        self.log_p.eval(x)
    }

    pub fn log_z0(&self) -> f64 {
        self.log_z0
    }

    pub fn ratio_sup_bound(&self) -> Option<f64> {
        self.ratio_sup_bound
    }

    pub fn support(&self) -> Domain {
        self.support
    }

    pub fn init_hint(&self) -> Option<&[f64]> {
        self.init_hint.as_deref()
    }

    pub fn has_exact_theta_sampler(&self) -> bool {
        self.exact_theta.is_some()
    }

    pub fn has_reference_sampler(&self) -> bool {
        self.reference.is_some() || self.exact_theta.is_some()
    }

    pub fn draw_exact_theta(&self, h: f64, n: usize, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        match &self.exact_theta {
            Some(f) => Ok(f(h, n, rng)),
            None => Err(Error::NoExactSampler),
        }
    }

    pub fn draw_reference(&self, n: usize, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        if let Some(f) = &self.reference {
            return Ok(f(n, rng));
        }
        if let Some(f) = &self.exact_theta {
            return Ok(f(0.0, n, rng));
        }
        Err(Error::NoReferenceSampler)
    }

    /// `log(q^h p^{1-h})` at exponent `h`, with exact endpoint behavior:
    /// `h = 0` returns `log p` bitwise and `h = 1` returns `log q` bitwise.
    pub fn log_theta_h(&self, h: f64, x: &[f64]) -> f64 {
        if h == 0.0 {
            return self.log_p.eval(x);
        }
        if h == 1.0 {
            return self.log_q.eval(x);
        }
        let lq = self.log_q.eval(x);
        let lp = self.log_p.eval(x);
        if lq == f64::NEG_INFINITY || lp == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        h * lq + (1.0 - h) * lp
    }

    /// `log(q/p)` with the convention that a vanishing target dominates:
    /// `q = 0` gives `-inf` even where `p = 0` as well, and `p = 0` with
    /// `q > 0` gives `+inf` (a support violation).
    pub fn log_ratio(&self, x: &[f64]) -> f64 {
        if let Some(f) = &self.log_ratio_override {
            return f(x);
        }
        let lq = self.log_q.eval(x);
        if lq == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let lp = self.log_p.eval(x);
        if lp == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        lq - lp
    }
}

impl fmt::Debug for DensityPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityPair")
            .field("dim", &self.dim())
            .field("log_z0", &self.log_z0)
            .field("ratio_sup_bound", &self.ratio_sup_bound)
            .field("support", &self.support)
            .field("exact_theta", &self.exact_theta.is_some())
            .field("reference", &self.reference.is_some())
            .finish()
    }
}

/// Log density of the bridging family member at parameter `s`, up to its
/// normalization: `h(s) log q(x) + (1 - h(s)) log p(x)`.
pub fn log_unnorm_theta(pair: &DensityPair, path: &HomotopyPath, s: f64, x: &[f64]) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!("s must lie in [0,1], got {s}")));
    }
    if x.len() != pair.dim() {
        return Err(Error::DimensionMismatch {
            expected: pair.dim(),
            got: x.len(),
        });
    }
    Ok(pair.log_theta_h(path.h(s), x))
}

/// Log stage weight `(h(s_next) - h(s)) (log q(x) - log p(x))`.
pub fn log_stage_weight(
    pair: &DensityPair,
    path: &HomotopyPath,
    s: f64,
    s_next: f64,
    x: &[f64],
) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&s_next) || s_next <= s {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= s < s_next <= 1, got s = {s}, s_next = {s_next}"
        )));
    }
    if x.len() != pair.dim() {
        return Err(Error::DimensionMismatch {
            expected: pair.dim(),
            got: x.len(),
        });
    }
    let dh = path.h(s_next) - path.h(s);
    if dh == 0.0 {
        return Ok(0.0);
    }
    Ok(dh * pair.log_ratio(x))
}

/// Grid-scan estimate of `sup q/p` over `[lo, hi]`, inflated by the given
/// relative safety margin. The scan is explicit: nothing is inferred from the
/// pair silently.
pub fn estimate_ratio_sup_bound(
    pair: &DensityPair,
    lo: f64,
    hi: f64,
    n_grid: usize,
    inflation: f64,
) -> Result<f64> {
    if pair.dim() != 1 {
        return Err(Error::InvalidArgument(
            "ratio bound scan is one-dimensional".into(),
        ));
    }
    if !(hi > lo) || n_grid < 2 {
        return Err(Error::InvalidArgument(
            "ratio bound scan needs hi > lo and at least two grid points".into(),
        ));
    }
    let mut max_log = f64::NEG_INFINITY;
    for i in 0..n_grid {
        let x = lo + (hi - lo) * i as f64 / (n_grid - 1) as f64;
        let r = pair.log_ratio(&[x]);
        if r == f64::INFINITY {
            return Err(Error::BoundViolation {
                k: f64::INFINITY,
                x: vec![x],
                ratio: f64::INFINITY,
            });
        }
        max_log = max_log.max(r);
    }
    if max_log == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument(
            "target vanishes on the whole scan interval".into(),
        ));
    }
    Ok(max_log.exp() * (1.0 + inflation))
}

const LN_2PI: f64 = 1.8378770664093453;

pub(crate) fn ln_gaussian(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * LN_2PI
}

/// Parameters of the nested-Gaussian pair: unnormalized Gaussian target,
/// normalized Gaussian reference.
#[derive(Clone, Copy, Debug)]
pub struct GaussianPairParams {
    pub mu_q: f64,
    pub sigma_q: f64,
    pub mu_p: f64,
    pub sigma_p: f64,
}

impl Default for GaussianPairParams {
    fn default() -> Self {
        Self {
            mu_q: 0.0,
            sigma_q: 0.1,
            mu_p: 0.0,
            sigma_p: 0.2,
        }
    }
}

/// `q(x) = exp(-(x-mu_q)^2 / (2 sigma_q^2))` (unnormalized, Z1 = sigma_q sqrt(2 pi)),
/// `p` a normalized Gaussian. Every bridging member is itself Gaussian with
/// precision `h/sigma_q^2 + (1-h)/sigma_p^2`, so the pair carries an exact
/// stage sampler.
pub fn gaussian_pair(params: GaussianPairParams) -> Result<DensityPair> {
    let GaussianPairParams {
        mu_q,
        sigma_q,
        mu_p,
        sigma_p,
    } = params;
    if !(sigma_q > 0.0 && sigma_p > 0.0) {
        return Err(Error::InvalidArgument(
            "gaussian-pair needs positive standard deviations".into(),
        ));
    }
    let log_q = LogDensity::from_fn1(move |x| {
        let z = (x - mu_q) / sigma_q;
        -0.5 * z * z
    });
    let log_p = LogDensity::from_fn1(move |x| ln_gaussian(x, mu_p, sigma_p));

    let theta_params = move |h: f64| -> (f64, f64) {
        let lambda = h / (sigma_q * sigma_q) + (1.0 - h) / (sigma_p * sigma_p);
        let mean = (h * mu_q / (sigma_q * sigma_q) + (1.0 - h) * mu_p / (sigma_p * sigma_p)) / lambda;
        (mean, lambda.recip().sqrt())
    };

    let scale = sigma_p.max(sigma_q) + mu_p.abs().max(mu_q.abs());
    let mut pair = DensityPair::new(log_q, log_p, 0.0)?
        .with_support(Domain::Real {
            scale: scale.max(0.1),
        })
        .with_exact_theta_sampler(move |h, n, rng| {
            let (mean, sd) = theta_params(h);
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    mean + sd * z
                })
                .collect()
        })
        .with_init_hint(vec![mu_q]);

    // sup q/p is finite when the target is strictly narrower, or when the
    // densities are proportional; the maximizing point is where the
    // log-ratio's quadratic derivative vanishes.
    let inv_q = 1.0 / (sigma_q * sigma_q);
    let inv_p = 1.0 / (sigma_p * sigma_p);
    if sigma_q < sigma_p {
        let x_star = (mu_q * inv_q - mu_p * inv_p) / (inv_q - inv_p);
        let lq = -0.5 * (x_star - mu_q) * (x_star - mu_q) * inv_q;
        let lp = ln_gaussian(x_star, mu_p, sigma_p);
        pair = pair.with_ratio_sup_bound((lq - lp).exp())?;
    } else if sigma_q == sigma_p && mu_q == mu_p {
        pair = pair.with_ratio_sup_bound(sigma_p * (2.0 * std::f64::consts::PI).sqrt())?;
    }
    Ok(pair)
}

/// Parameters of the bimodal target vs Student-t reference pair.
#[derive(Clone, Copy, Debug)]
pub struct BimodalStudentTParams {
    pub weight1: f64,
    pub weight2: f64,
    pub mean1: f64,
    pub mean2: f64,
    pub sd1: f64,
    pub sd2: f64,
    pub nu: f64,
    pub t_loc: f64,
    pub t_scale: f64,
}

impl Default for BimodalStudentTParams {
    fn default() -> Self {
        Self {
            weight1: 1.0,
            weight2: 0.6,
            mean1: -1.0,
            mean2: 2.0,
            sd1: 0.8,
            sd2: 0.05,
            nu: 3.0,
            t_loc: 0.0,
            t_scale: 2.0,
        }
    }
}

pub(crate) fn ln_student_t(x: f64, nu: f64, loc: f64, scale: f64) -> f64 {
    let u = (x - loc) / scale;
    ln_gamma((nu + 1.0) / 2.0)
        - ln_gamma(nu / 2.0)
        - 0.5 * (nu * std::f64::consts::PI).ln()
        - scale.ln()
        - 0.5 * (nu + 1.0) * (u * u / nu).ln_1p()
}

/// Two Gaussian bumps (one very narrow) against a heavy-tailed Student-t
/// reference. `sup q/p` is finite because the Gaussian tails decay faster;
/// estimate it explicitly with [`estimate_ratio_sup_bound`].
pub fn bimodal_vs_student_t(params: BimodalStudentTParams) -> Result<DensityPair> {
    let BimodalStudentTParams {
        weight1,
        weight2,
        mean1,
        mean2,
        sd1,
        sd2,
        nu,
        t_loc,
        t_scale,
    } = params;
    if !(weight1 > 0.0 && weight2 > 0.0 && sd1 > 0.0 && sd2 > 0.0) {
        return Err(Error::InvalidArgument(
            "bimodal target needs positive weights and spreads".into(),
        ));
    }
    if !(nu > 0.0 && t_scale > 0.0) {
        return Err(Error::InvalidArgument(
            "Student-t reference needs nu > 0 and scale > 0".into(),
        ));
    }
    let log_q = LogDensity::from_fn1(move |x| {
        let a = weight1.ln() - 0.5 * ((x - mean1) / sd1).powi(2);
        let b = weight2.ln() - 0.5 * ((x - mean2) / sd2).powi(2);
        let m = a.max(b);
        m + ((a - m).exp() + (b - m).exp()).ln()
    });
    let log_p = LogDensity::from_fn1(move |x| ln_student_t(x, nu, t_loc, t_scale));

    Ok(DensityPair::new(log_q, log_p, 0.0)?
        .with_support(Domain::Real {
            scale: t_scale.max(mean1.abs().max(mean2.abs())),
        })
        .with_reference_sampler(move |n, rng| {
            let t = StudentT::new(nu).expect("validated nu");
            (0..n).map(|_| t_loc + t_scale * t.sample(rng)).collect()
        })
        .with_init_hint(vec![mean1]))
}

/// Parameters of the Rayleigh-prior / Gaussian-likelihood posterior pair.
#[derive(Clone, Copy, Debug)]
pub struct RayleighPosteriorParams {
    pub y: f64,
    pub r: f64,
    pub q: f64,
}

impl Default for RayleighPosteriorParams {
    fn default() -> Self {
        Self {
            y: 0.65,
            r: 0.25,
            q: 0.2,
        }
    }
}

pub(crate) fn ln_rayleigh(x: f64, r: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    x.ln() - 2.0 * r.ln() - x * x / (2.0 * r * r)
}

/// Target `q = prior * likelihood` with Rayleigh prior on `x >= 0` and Gaussian
/// likelihood `exp(-(x-y)^2 / (2 q^2))`; reference `p = prior` (proper, Z0 = 1).
pub fn rayleigh_posterior(params: RayleighPosteriorParams) -> Result<DensityPair> {
    let RayleighPosteriorParams { y, r, q } = params;
    if !(r > 0.0 && q > 0.0) {
        return Err(Error::InvalidArgument(
            "rayleigh-posterior needs r > 0 and q > 0".into(),
        ));
    }
    let log_q = LogDensity::from_fn1(move |x| {
        let lp = ln_rayleigh(x, r);
        if lp == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        lp - (x - y) * (x - y) / (2.0 * q * q)
    });
    let log_p = LogDensity::from_fn1(move |x| ln_rayleigh(x, r));
    // The likelihood factor is bounded by 1 on the prior's support when the
    // observation is non-negative.
    let bound = if y >= 0.0 {
        1.0
    } else {
        (-y * y / (2.0 * q * q)).exp()
    };
    Ok(DensityPair::new(log_q, log_p, 0.0)?
        .with_support(Domain::HalfLine {
            start: 0.0,
            scale: r + y.abs(),
        })
        .with_ratio_sup_bound(bound)?
        .with_reference_sampler(move |n, rng| {
            (0..n)
                .map(|_| {
                    let u: f64 = rng.gen();
                    r * (-2.0 * (1.0 - u).ln()).sqrt()
                })
                .collect()
        })
        .with_init_hint(vec![y.abs().max(r)]))
}

/// Names of the built-in density pairs.
pub fn builtin_densities() -> Vec<&'static str> {
    vec!["gaussian-pair", "bimodal-vs-student-t", "rayleigh-posterior"]
}

/// Default parameter map for a built-in pair.
pub fn density_defaults(name: &str) -> Result<BTreeMap<String, f64>> {
    let mut m = BTreeMap::new();
    match name {
        "gaussian-pair" => {
            let d = GaussianPairParams::default();
            m.insert("mu_q".into(), d.mu_q);
            m.insert("sigma_q".into(), d.sigma_q);
            m.insert("mu_p".into(), d.mu_p);
            m.insert("sigma_p".into(), d.sigma_p);
        }
        "bimodal-vs-student-t" => {
            let d = BimodalStudentTParams::default();
            m.insert("weight1".into(), d.weight1);
            m.insert("weight2".into(), d.weight2);
            m.insert("mean1".into(), d.mean1);
            m.insert("mean2".into(), d.mean2);
            m.insert("sd1".into(), d.sd1);
            m.insert("sd2".into(), d.sd2);
            m.insert("nu".into(), d.nu);
            m.insert("t_loc".into(), d.t_loc);
            m.insert("t_scale".into(), d.t_scale);
        }
        "rayleigh-posterior" => {
            let d = RayleighPosteriorParams::default();
            m.insert("y".into(), d.y);
            m.insert("r".into(), d.r);
            m.insert("q".into(), d.q);
        }
        other => {
            return Err(Error::UnknownName {
                kind: "density",
                name: other.into(),
            })
        }
    }
    Ok(m)
}

/// Builds a built-in pair by name with parameter overrides. Unknown parameter
/// keys are rejected by name.
pub fn density_by_name(name: &str, overrides: &BTreeMap<String, f64>) -> Result<DensityPair> {
    let mut params = density_defaults(name)?;
    for (k, v) in overrides {
        match params.get_mut(k) {
            Some(slot) => *slot = *v,
            None => {
                return Err(Error::UnknownName {
                    kind: "density parameter",
                    name: format!("{name}.{k}"),
                })
            }
        }
    }
    let get = |k: &str| params[k];
    match name {
        "gaussian-pair" => gaussian_pair(GaussianPairParams {
            mu_q: get("mu_q"),
            sigma_q: get("sigma_q"),
            mu_p: get("mu_p"),
            sigma_p: get("sigma_p"),
        }),
        "bimodal-vs-student-t" => bimodal_vs_student_t(BimodalStudentTParams {
            weight1: get("weight1"),
            weight2: get("weight2"),
            mean1: get("mean1"),
            mean2: get("mean2"),
            sd1: get("sd1"),
            sd2: get("sd2"),
            nu: get("nu"),
            t_loc: get("t_loc"),
            t_scale: get("t_scale"),
        }),
        "rayleigh-posterior" => rayleigh_posterior(RayleighPosteriorParams {
            y: get("y"),
            r: get("r"),
            q: get("q"),
        }),
        _ => unreachable!("validated by density_defaults"),
    }
}
