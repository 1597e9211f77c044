//! Small numerical statistics helpers used by the estimators and their tests.

/// Arithmetic mean. Returns NaN for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (denominator n - 1). Returns 0 for n < 2.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the mean.
pub fn standard_error(xs: &[f64]) -> f64 {
    (sample_variance(xs) / xs.len() as f64).sqrt()
}

/// `ln((1/n) Σ exp(x_i))`, stabilized so that identical inputs return the
/// input exactly and all-(-inf) inputs return -inf rather than NaN.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if mx == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.iter().map(|x| (x - mx).exp()).sum();
    mx + (sum / xs.len() as f64).ln()
}

/// Mean and standard deviation under normalized weights.
pub fn weighted_mean_std(xs: &[f64], ws: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ws.len());
    let m: f64 = xs.iter().zip(ws).map(|(x, w)| x * w).sum();
    let v: f64 = xs.iter().zip(ws).map(|(x, w)| w * (x - m) * (x - m)).sum();
    (m, v.max(0.0).sqrt())
}

/// Result of a two-sample Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> KsResult {
    assert!(!a.is_empty() && !b.is_empty());
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        let diff = (i as f64 / na as f64 - j as f64 / nb as f64).abs();
        d = d.max(diff);
    }
    let ne = (na as f64 * nb as f64) / (na + nb) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_tail(lambda),
    }
}

/// Tail probability Q(lambda) of the Kolmogorov distribution.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman_rho(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ra = ranks(a);
    let rb = ranks(b);
    let ma = mean(&ra);
    let mb = mean(&rb);
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        num += (x - ma) * (y - mb);
        da += (x - ma) * (x - ma);
        db += (y - mb) * (y - mb);
    }
    num / (da * db).sqrt()
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_mean_exp_identical_inputs_is_exact() {
        let a = -3.7251;
        assert_eq!(log_mean_exp(&[a; 17]), a);
        assert_eq!(log_mean_exp(&[0.0; 5]), 0.0);
    }

    #[test]
    fn log_mean_exp_handles_neg_infinity() {
        assert_eq!(log_mean_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        let v = log_mean_exp(&[0.0, f64::NEG_INFINITY]);
        assert!((v - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn ks_same_distribution_has_large_p() {
        // Deterministic interleaved samples from the same grid.
        let a: Vec<f64> = (0..500).map(|i| (i as f64 * 0.618).sin()).collect();
        let b: Vec<f64> = (500..1000).map(|i| (i as f64 * 0.618).sin()).collect();
        let r = two_sample_ks(&a, &b);
        assert!(r.p_value > 0.05, "p = {}", r.p_value);
    }

    #[test]
    fn ks_shifted_distribution_has_small_p() {
        let a: Vec<f64> = (0..500).map(|i| (i as f64 * 0.618).sin()).collect();
        let b: Vec<f64> = (0..500).map(|i| (i as f64 * 0.618).sin() + 0.5).collect();
        let r = two_sample_ks(&a, &b);
        assert!(r.p_value < 1e-6, "p = {}", r.p_value);
    }

    #[test]
    fn spearman_monotone_is_one() {
        let a: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| x.exp()).collect();
        assert!((spearman_rho(&a, &b) - 1.0).abs() < 1e-12);
        let c: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!((spearman_rho(&a, &c) + 1.0).abs() < 1e-12);
    }
}
