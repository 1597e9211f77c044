//! Independent quadrature ground truth.
//!
//! Adaptive Gauss-Kronrod (G7, K15) integration over finite, half-infinite,
//! and whole-line domains, used by tests, acceptance runs, and diagnostic CSV
//! columns. The estimators never call into this module.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::density::{DensityPair, HomotopyPath};
use crate::error::{Error, Result};

/// Integration domain. Unbounded directions are mapped to a finite interval
/// with the substitution `x = L tan(pi u / 2)` before subdivision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    Finite { lo: f64, hi: f64 },
    HalfLine { start: f64, scale: f64 },
    Real { scale: f64 },
}

impl Default for Domain {
    fn default() -> Self {
        Domain::Real { scale: 1.0 }
    }
}

/// Tolerances and budget for the adaptive integrator.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureSpec {
    pub domain: Domain,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl QuadratureSpec {
    pub fn new(domain: Domain) -> Self {
        Self {
            domain,
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_subdivisions: 2000,
        }
    }

    /// Spec over the pair's declared support.
    pub fn for_pair(pair: &DensityPair) -> Self {
        Self::new(pair.support())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument(
                "quadrature tolerances must be positive".into(),
            ));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::InvalidArgument(
                "quadrature needs at least one subdivision".into(),
            ));
        }
        match self.domain {
            Domain::Finite { lo, hi } => {
                if !(hi > lo) {
                    return Err(Error::InvalidArgument(
                        "finite domain needs hi > lo".into(),
                    ));
                }
            }
            Domain::HalfLine { scale, .. } | Domain::Real { scale } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "tangent-map scale must be finite and positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self::new(Domain::default())
    }
}

// 7-point Gauss / 15-point Kronrod abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod pass over `[a, b]`: returns the K15 value and an error
/// estimate from the G7/K15 discrepancy.
fn qk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);

    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            // Odd Kronrod indices are the embedded Gauss nodes.
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    // The usual (200 |dk|)^{3/2} sharpening is skipped; the raw discrepancy is
    // a conservative bound and keeps the estimate monotone under refinement.
    (value, err)
}

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err && self.lo == other.lo
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        // Largest error first; ties broken by position for determinism.
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

const INITIAL_SEGMENTS: usize = 16;

fn adaptive(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<f64> {
    // Start from a uniform split so concentrated integrands are not missed
    // by a single panel whose nodes all land in flat regions.
    let init = INITIAL_SEGMENTS.min(spec.max_subdivisions).max(1);
    let mut heap = BinaryHeap::new();
    let mut total_v = 0.0;
    let mut total_e = 0.0;
    for i in 0..init {
        let a = lo + (hi - lo) * i as f64 / init as f64;
        let b = lo + (hi - lo) * (i + 1) as f64 / init as f64;
        let (v, e) = qk15(f, a, b);
        total_v += v;
        total_e += e;
        heap.push(Segment {
            lo: a,
            hi: b,
            value: v,
            err: e,
        });
    }
    for _ in 0..spec.max_subdivisions {
        if total_e <= spec.abs_tol.max(spec.rel_tol * total_v.abs()) {
            break;
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(worst.lo < mid && mid < worst.hi) {
            // Interval exhausted at floating-point resolution.
            heap.push(worst);
            break;
        }
        let (v1, e1) = qk15(f, worst.lo, mid);
        let (v2, e2) = qk15(f, mid, worst.hi);
        total_v += v1 + v2 - worst.value;
        total_e += e1 + e2 - worst.err;
        heap.push(Segment {
            lo: worst.lo,
            hi: mid,
            value: v1,
            err: e1,
        });
        heap.push(Segment {
            lo: mid,
            hi: worst.hi,
            value: v2,
            err: e2,
        });
    }
    // Recompute the totals from the final segment set; the incremental sums
    // accumulate cancellation error over many subdivisions.
    let segments = heap.into_vec();
    let total_v: f64 = segments.iter().map(|s| s.value).sum();
    let total_e: f64 = segments.iter().map(|s| s.err).sum();
    if total_e <= spec.abs_tol.max(spec.rel_tol * total_v.abs()) {
        Ok(total_v)
    } else {
        Err(Error::OracleFailure {
            estimate: total_v,
            error_bound: total_e,
            subdivisions: segments.len(),
        })
    }
}

/// Integrates `f` over the spec's domain.
pub fn integrate(f: impl Fn(f64) -> f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    let half_pi = std::f64::consts::FRAC_PI_2;
    match spec.domain {
        Domain::Finite { lo, hi } => adaptive(&f, lo, hi, spec),
        Domain::HalfLine { start, scale } => {
            let g = move |u: f64| {
                let t = (half_pi * u).tan();
                let x = start + scale * t;
                if !x.is_finite() {
                    return 0.0;
                }
                let fx = f(x);
                if fx == 0.0 {
                    return 0.0;
                }
                fx * scale * half_pi * (1.0 + t * t)
            };
            adaptive(&g, 0.0, 1.0, spec)
        }
        Domain::Real { scale } => {
            let g = move |u: f64| {
                let t = (half_pi * u).tan();
                let x = scale * t;
                if !x.is_finite() {
                    return 0.0;
                }
                let fx = f(x);
                if fx == 0.0 {
                    return 0.0;
                }
                fx * scale * half_pi * (1.0 + t * t)
            };
            adaptive(&g, -1.0, 1.0, spec)
        }
    }
}

/// The bridging integrand `q^t p^{1-t}` at exponent `t`, guarded so that
/// vanishing densities never produce NaN.
pub(crate) fn bridge_integrand(pair: &DensityPair, t: f64, x: f64) -> f64 {
    let xs = [x];
    let lq = pair.log_q(&xs);
    if t > 0.0 && lq == f64::NEG_INFINITY {
        return 0.0;
    }
    let lp = pair.log_p(&xs);
    if lp == f64::NEG_INFINITY {
        return if t >= 1.0 && lq > f64::NEG_INFINITY {
            if t == 1.0 {
                lq.exp()
            } else {
                f64::INFINITY
            }
        } else {
            0.0
        };
    }
    (t * lq + (1.0 - t) * lp).exp()
}

/// `Z(t) = ∫ q^t p^{1-t} dx` at a raw exponent `t` (may slightly exceed 1 for
/// error-model extrapolation).
pub fn z_of_exponent(pair: &DensityPair, t: f64, spec: &QuadratureSpec) -> Result<f64> {
    if pair.dim() != 1 {
        return Err(Error::InvalidArgument(
            "the quadrature oracle is one-dimensional".into(),
        ));
    }
    integrate(|x| bridge_integrand(pair, t, x), spec)
}

/// `Z_s = ∫ q^{h(s)} p^{1-h(s)} dx`.
pub fn z_of_s(pair: &DensityPair, path: &HomotopyPath, s: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!("s must lie in [0,1], got {s}")));
    }
    z_of_exponent(pair, path.h(s), spec)
}

/// Expectation `<g>_s` under the normalized bridging member at `s`.
pub fn moment_of_theta(
    pair: &DensityPair,
    path: &HomotopyPath,
    s: f64,
    g: impl Fn(f64) -> f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let t = path.h(s);
    let num = integrate(|x| g(x) * bridge_integrand(pair, t, x), spec)?;
    let den = z_of_exponent(pair, t, spec)?;
    Ok(num / den)
}

/// Checks `dZ_s/ds = ∫ log(q/p) q^s p^{1-s} dx` (the identity-map continuous
/// limit) with central finite differences of `Z` on the given grid; returns
/// the maximum relative defect over interior grid points.
pub fn ode_path_check(pair: &DensityPair, grid: &[f64], spec: &QuadratureSpec) -> Result<f64> {
    if grid.len() < 3 {
        return Err(Error::InvalidArgument(
            "ODE check needs at least three grid points".into(),
        ));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidArgument("grid must be increasing".into()));
        }
    }
    if grid[0] < 0.0 || *grid.last().unwrap() > 1.0 {
        return Err(Error::InvalidArgument("grid must lie in [0,1]".into()));
    }
    let z: Vec<f64> = grid
        .iter()
        .map(|&s| z_of_exponent(pair, s, spec))
        .collect::<Result<_>>()?;
    let mut max_defect: f64 = 0.0;
    for m in 1..grid.len() - 1 {
        let rhs = integrate(
            |x| {
                let f = bridge_integrand(pair, grid[m], x);
                if f == 0.0 {
                    return 0.0;
                }
                f * pair.log_ratio(&[x])
            },
            spec,
        )?;
        // Three-point first derivative, exact for the uniform-grid case.
        let h0 = grid[m] - grid[m - 1];
        let h1 = grid[m + 1] - grid[m];
        let lhs = (h0 * h0 * z[m + 1] - h1 * h1 * z[m - 1] + (h1 * h1 - h0 * h0) * z[m])
            / (h0 * h1 * (h0 + h1));
        let num = (lhs - rhs).abs();
        if num == 0.0 {
            continue;
        }
        // Scale: the derivative magnitude, floored at the solution scale so a
        // flat path (q = p) reads as zero defect rather than amplified noise.
        let den = rhs.abs().max(lhs.abs()).max(z[m].abs()).max(f64::MIN_POSITIVE);
        max_defect = max_defect.max(num / den);
    }
    Ok(max_defect)
}

/// Exact-expectation schedule: the per-stage ratios `mu_m` computed by
/// quadrature and the telescoped `log Z1`.
#[derive(Clone, Debug)]
pub struct OracleSchedule {
    pub stage_mu: Vec<f64>,
    pub log_z1: f64,
}

/// Replaces every sample average in the schedule by its quadrature value;
/// the product then telescopes to `Z1` for any partition and any `h`.
pub fn oracle_schedule(
    pair: &DensityPair,
    path: &HomotopyPath,
    spec: &QuadratureSpec,
) -> Result<OracleSchedule> {
    let z: Vec<f64> = (0..=path.num_stages())
        .map(|m| z_of_exponent(pair, path.h_at_stage(m), spec))
        .collect::<Result<_>>()?;
    let stage_mu: Vec<f64> = z.windows(2).map(|w| w[1] / w[0]).collect();
    let log_z1 = pair.log_z0() + stage_mu.iter().map(|m| m.ln()).sum::<f64>();
    Ok(OracleSchedule { stage_mu, log_z1 })
}
