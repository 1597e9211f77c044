//! Per-stage samplers for the bridging family and resampling utilities.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::density::{DensityPair, HomotopyPath};
use crate::error::{Error, Result};

/// A reproducible random stream: identical `(seed, stream)` pairs generate
/// identical draw sequences. Parallel work items take distinct stream ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Stream shifted by `offset`; callers allocate disjoint offset ranges.
    pub fn offset(&self, offset: u64) -> Self {
        Self {
            seed: self.seed,
            stream: self.stream.wrapping_add(offset),
        }
    }
}

/// How a stage ensemble was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleOrigin {
    Exact,
    Metropolis,
    ImportanceRejection,
    Grid,
}

impl SampleOrigin {
    pub fn label(&self) -> &'static str {
        match self {
            SampleOrigin::Exact => "exact",
            SampleOrigin::Metropolis => "metropolis",
            SampleOrigin::ImportanceRejection => "importance-rejection",
            SampleOrigin::Grid => "grid",
        }
    }
}

/// Non-fatal condition attached to an ensemble.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EnsembleWarning {
    DegenerateChain { accept_rate: f64 },
}

/// Samples attributed to the bridging density at stage coordinate `s`.
#[derive(Clone, Debug)]
pub struct StageEnsemble {
    samples: Vec<f64>,
    dim: usize,
    s: f64,
    origin: SampleOrigin,
    proposed: usize,
    warning: Option<EnsembleWarning>,
}

impl StageEnsemble {
    pub fn from_parts(
        samples: Vec<f64>,
        dim: usize,
        s: f64,
        origin: SampleOrigin,
        proposed: usize,
    ) -> Result<Self> {
        if dim == 0 || samples.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "ensemble storage of length {} is not a multiple of dim {}",
                samples.len(),
                dim
            )));
        }
        let n = samples.len() / dim;
        if n > proposed {
            return Err(Error::InvalidArgument(format!(
                "accepted count {n} exceeds proposed count {proposed}"
            )));
        }
        Ok(Self {
            samples,
            dim,
            s,
            origin,
            proposed,
            warning: None,
        })
    }

    pub fn with_warning(mut self, warning: EnsembleWarning) -> Self {
        self.warning = Some(warning);
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn origin(&self) -> SampleOrigin {
        self.origin
    }

    /// Number of retained samples (equals `len`).
    pub fn accepted(&self) -> usize {
        self.len()
    }

    pub fn proposed(&self) -> usize {
        self.proposed
    }

    pub fn warning(&self) -> Option<EnsembleWarning> {
        self.warning
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    /// Scalar view for one-dimensional ensembles.
    pub fn scalars(&self) -> &[f64] {
        debug_assert_eq!(self.dim, 1);
        &self.samples
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks(self.dim)
    }
}

/// CSV serialization of a stage-ensemble list: `stage,sample,coord...`.
pub fn ensembles_to_csv(ensembles: &[StageEnsemble]) -> String {
    let dim = ensembles.first().map_or(1, StageEnsemble::dim);
    let mut out = String::from("stage,s,sample");
    for k in 0..dim {
        out.push_str(&format!(",x{k}"));
    }
    out.push('\n');
    for (m, ens) in ensembles.iter().enumerate() {
        for (i, x) in ens.iter().enumerate() {
            out.push_str(&format!("{m},{},{i}", ens.s()));
            for v in x {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
    }
    out
}

/// Draws `n` independent samples from the bridging member at `s`, available
/// only for pairs that advertise an exact stage sampler.
pub fn sample_exact(
    pair: &DensityPair,
    path: &HomotopyPath,
    s: f64,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<StageEnsemble> {
    let h = path.h(s);
    let samples = pair.draw_exact_theta(h, n, rng)?;
    StageEnsemble::from_parts(samples, pair.dim(), s, SampleOrigin::Exact, n)
}

/// Random-walk Metropolis tuning knobs.
#[derive(Clone, Debug)]
pub struct MetropolisTuning {
    /// Proposal standard deviation; `None` means 2.4x a pilot-chain estimate
    /// of the stage standard deviation.
    pub step_scale: Option<f64>,
    pub burn_in: usize,
    pub thinning: usize,
    /// Chain start; defaults to a reference draw or the pair's init hint.
    pub init: Option<Vec<f64>>,
}

impl Default for MetropolisTuning {
    fn default() -> Self {
        Self {
            step_scale: None,
            burn_in: 1000,
            thinning: 5,
            init: None,
        }
    }
}

const PILOT_ITERS: usize = 500;

/// Random-walk Metropolis targeting the bridging member at `s` (known up to a
/// constant). Returns `n` post-burn-in, thinned draws; an acceptance rate
/// below 1% attaches a degenerate-chain warning.
pub fn sample_metropolis(
    pair: &DensityPair,
    path: &HomotopyPath,
    s: f64,
    n: usize,
    rng: &mut dyn RngCore,
    tuning: &MetropolisTuning,
) -> Result<StageEnsemble> {
    if n == 0 {
        return Err(Error::InvalidArgument("need n >= 1 samples".into()));
    }
    if tuning.thinning == 0 {
        return Err(Error::InvalidArgument("thinning must be >= 1".into()));
    }
    if let Some(step) = tuning.step_scale {
        if !(step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step scale must be positive, got {step}"
            )));
        }
    }
    let h = path.h(s);
    let dim = pair.dim();
    let target = |x: &[f64]| pair.log_theta_h(h, x);

    let mut x = match &tuning.init {
        Some(x0) => {
            if x0.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: x0.len(),
                });
            }
            x0.clone()
        }
        None => {
            if pair.has_exact_theta_sampler() {
                pair.draw_exact_theta(h, 1, rng)?
            } else if pair.has_reference_sampler() {
                pair.draw_reference(1, rng)?
            } else if let Some(hint) = pair.init_hint() {
                hint.to_vec()
            } else {
                return Err(Error::InvalidArgument(
                    "no chain start available: supply tuning.init".into(),
                ));
            }
        }
    };
    let mut lx = target(&x);
    if lx == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument(
            "chain start has zero target density".into(),
        ));
    }

    let propose = |x: &[f64], step: f64, rng: &mut dyn RngCore| -> Vec<f64> {
        x.iter()
            .map(|&xi| {
                let z: f64 = StandardNormal.sample(rng);
                xi + step * z
            })
            .collect()
    };

    let step = match tuning.step_scale {
        Some(s) => s,
        None => {
            // Pilot pass with unit steps to size the main proposal.
            let mut pilot = Vec::with_capacity(PILOT_ITERS * dim);
            let mut px = x.clone();
            let mut plx = lx;
            for _ in 0..PILOT_ITERS {
                let cand = propose(&px, 1.0, rng);
                let lc = target(&cand);
                if lc > f64::NEG_INFINITY && rng.gen::<f64>().ln() < lc - plx {
                    px = cand;
                    plx = lc;
                }
                pilot.extend_from_slice(&px);
            }
            let mut var_sum = 0.0;
            for k in 0..dim {
                let coord: Vec<f64> = pilot.iter().skip(k).step_by(dim).copied().collect();
                var_sum += crate::stats::sample_variance(&coord);
            }
            let sd = (var_sum / dim as f64).sqrt();
            x = px;
            lx = plx;
            if sd > 0.0 {
                2.4 * sd
            } else {
                1.0
            }
        }
    };

    let main_iters = tuning.burn_in + n * tuning.thinning;
    let mut accepted_moves = 0usize;
    let mut out = Vec::with_capacity(n * dim);
    for it in 0..main_iters {
        let cand = propose(&x, step, rng);
        let lc = target(&cand);
        if lc > f64::NEG_INFINITY && rng.gen::<f64>().ln() < lc - lx {
            x = cand;
            lx = lc;
            if it >= tuning.burn_in {
                accepted_moves += 1;
            }
        }
        if it >= tuning.burn_in && (it - tuning.burn_in) % tuning.thinning == tuning.thinning - 1 {
            out.extend_from_slice(&x);
        }
    }
    let accept_rate = accepted_moves as f64 / (n * tuning.thinning) as f64;
    let mut ens = StageEnsemble::from_parts(out, dim, s, SampleOrigin::Metropolis, main_iters)?;
    if accept_rate < 0.01 {
        ens = ens.with_warning(EnsembleWarning::DegenerateChain { accept_rate });
    }
    Ok(ens)
}

/// One thinning pass of the sequential importance-rejection sampler: keeps
/// each sample `x` of the stage-`s` ensemble with probability
/// `(q(x) / (k p(x)))^{h(s_next) - h(s)}`.
pub fn importance_rejection_step(
    pair: &DensityPair,
    path: &HomotopyPath,
    s: f64,
    s_next: f64,
    ensemble: &StageEnsemble,
    k: f64,
    rng: &mut dyn RngCore,
) -> Result<StageEnsemble> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rejection bound k must be finite and positive, got {k}"
        )));
    }
    if s_next <= s {
        return Err(Error::InvalidArgument(format!(
            "need s_next > s, got s = {s}, s_next = {s_next}"
        )));
    }
    if ensemble.s() != s {
        return Err(Error::InvalidArgument(format!(
            "ensemble is at s = {}, step starts at s = {s}",
            ensemble.s()
        )));
    }
    if ensemble.dim() != pair.dim() {
        return Err(Error::DimensionMismatch {
            expected: pair.dim(),
            got: ensemble.dim(),
        });
    }
    let dh = path.h(s_next) - path.h(s);
    let ln_k = k.ln();
    let mut kept = Vec::new();
    for x in ensemble.iter() {
        let diff = pair.log_ratio(x);
        if diff > ln_k {
            return Err(Error::BoundViolation {
                k,
                x: x.to_vec(),
                ratio: diff.exp(),
            });
        }
        let u: f64 = rng.gen();
        let threshold = if dh == 0.0 { 0.0 } else { dh * (diff - ln_k) };
        if u.ln() <= threshold {
            kept.extend_from_slice(x);
        }
    }
    StageEnsemble::from_parts(
        kept,
        pair.dim(),
        s_next,
        SampleOrigin::ImportanceRejection,
        ensemble.len(),
    )
}

/// Runs the sequential importance-rejection sampler over the whole partition:
/// `n0` reference draws at `s = 0`, thinned stage by stage. Returns all
/// `M + 1` ensembles; populations are non-increasing.
pub fn run_sequential_sampler(
    pair: &DensityPair,
    path: &HomotopyPath,
    n0: usize,
    k: Option<f64>,
    rng: &mut dyn RngCore,
) -> Result<Vec<StageEnsemble>> {
    if n0 == 0 {
        return Err(Error::InvalidArgument("need n0 >= 1".into()));
    }
    let k = k
        .or_else(|| pair.ratio_sup_bound())
        .ok_or_else(|| Error::InvalidArgument("k missing: supply one or set ratio_sup_bound".into()))?;
    let first = pair.draw_reference(n0, rng)?;
    let mut ensembles = vec![StageEnsemble::from_parts(
        first,
        pair.dim(),
        0.0,
        SampleOrigin::Exact,
        n0,
    )?];
    for m in 0..path.num_stages() {
        let s = path.stages()[m];
        let s_next = path.stages()[m + 1];
        let next = importance_rejection_step(pair, path, s, s_next, &ensembles[m], k, rng)?;
        if next.is_empty() {
            return Err(Error::SamplerExtinct {
                stage: m + 1,
                s: s_next,
                survivors: ensembles,
            });
        }
        ensembles.push(next);
    }
    Ok(ensembles)
}

/// Systematic resampling: one uniform offset, strided positions against the
/// cumulative weights. Expected count of index `i` is `n * w_i`.
pub fn systematic_resample(weights: &[f64], n: usize, rng: &mut dyn RngCore) -> Result<Vec<usize>> {
    if weights.is_empty() || n == 0 {
        return Err(Error::InvalidArgument(
            "need at least one weight and n >= 1".into(),
        ));
    }
    let mut total = 0.0;
    for &w in weights {
        if !(w >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weights must be non-negative, got {w}"
            )));
        }
        total += w;
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "weights must sum to 1 within 1e-12, got {total}"
        )));
    }
    let u0: f64 = rng.gen::<f64>() / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut i = 0usize;
    for j in 0..n {
        let target = u0 + j as f64 / n as f64;
        while target > cum && i + 1 < weights.len() {
            i += 1;
            cum += weights[i];
        }
        out.push(i);
    }
    Ok(out)
}
