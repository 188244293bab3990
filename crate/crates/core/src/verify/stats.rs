//! Small statistics helpers: weighted empirical distributions and the
//! two-sample Kolmogorov–Smirnov comparison used by the law checks.

/// Two-sample KS statistic between a weighted sample `(value, weight)` and an
/// unweighted sample: sup over the pooled values of the ECDF gap, with the
/// first sample's ECDF weighted.
pub fn weighted_two_sample_ks(weighted: &[(f64, f64)], plain: &[f64]) -> f64 {
    assert!(!weighted.is_empty() && !plain.is_empty());
    let mut a: Vec<(f64, f64)> = weighted.to_vec();
    a.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut b: Vec<f64> = plain.to_vec();
    b.sort_by(f64::total_cmp);
    let total_w: f64 = a.iter().map(|p| p.1).sum();
    let nb = b.len() as f64;

    let mut stat = 0.0f64;
    let mut ia = 0;
    let mut ib = 0;
    let mut fa = 0.0; // weighted ECDF of a
    let mut acc_w = 0.0;
    let mut fb = 0.0;
    while ia < a.len() || ib < b.len() {
        let next_a = a.get(ia).map(|p| p.0).unwrap_or(f64::INFINITY);
        let next_b = b.get(ib).copied().unwrap_or(f64::INFINITY);
        let cur = next_a.min(next_b);
        while ia < a.len() && a[ia].0 <= cur {
            acc_w += a[ia].1;
            ia += 1;
        }
        fa = acc_w / total_w;
        while ib < b.len() && b[ib] <= cur {
            ib += 1;
        }
        fb = ib as f64 / nb;
        stat = stat.max((fa - fb).abs());
    }
    let _ = (fa, fb);
    stat
}

/// Asymptotic two-sample KS critical value at level `alpha` with effective
/// sample sizes `n_eff` and `m`.
pub fn ks_critical_value(alpha: f64, n_eff: f64, m: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n_eff + m) / (n_eff * m)).sqrt()
}

/// Effective sample size `(Σw)² / Σw²` of a weight vector.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}
