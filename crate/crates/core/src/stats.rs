//! Device-agreement and group-comparison statistics: Pearson correlation,
//! Bland-Altman limits of agreement, repeated-measures correlation, Wilcoxon
//! signed-rank and rank-sum tests, Kruskal-Wallis and Shapiro-Wilk.
//!
//! All p-values are two-sided. Exact small-sample paths are switched at a
//! configurable threshold (default 25 pairs for the signed-rank test).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special;

/// Default sample-size threshold below which the signed-rank test enumerates
/// the exact null distribution.
pub const DEFAULT_EXACT_THRESHOLD: usize = 25;

/// Outcome of a hypothesis test.
#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub test: &'static str,
    pub statistic: f64,
    pub p_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci95: Option<(f64, f64)>,
    /// Sample size(s): one entry per group.
    pub n: Vec<usize>,
}

/// Bland-Altman agreement summary for paired measurements.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BlandAltman {
    /// Mean difference x − y.
    pub bias: f64,
    /// Lower 95% limit of agreement (bias − 1.96 sd).
    pub loa_lo: f64,
    /// Upper 95% limit of agreement (bias + 1.96 sd).
    pub loa_hi: f64,
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the n−1 denominator.
pub(crate) fn sample_var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Mid-ranks of `xs` (1-based) plus the tie term Σ(t³−t) over tie groups.
pub(crate) fn mid_ranks(xs: &[f64]) -> (Vec<f64>, f64) {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        tie_term += t * t * t - t;
        i = j + 1;
    }
    (ranks, tie_term)
}

/// Pearson product-moment correlation with a t-based two-sided p-value.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "pearson: length mismatch {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "pearson requires n >= 3, got {n}"
        )));
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantSeries("pearson on constant input".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        special::t_sf_two_sided(t, df)
    };
    Ok(TestResult {
        test: "pearson",
        statistic: r,
        p_value: p,
        df: Some(df),
        ci95: None,
        n: vec![n],
    })
}

/// Bland-Altman bias and 95% limits of agreement for paired data.
pub fn bland_altman(x: &[f64], y: &[f64]) -> Result<BlandAltman> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "bland_altman: length mismatch {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(
            "bland_altman requires n >= 2".into(),
        ));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let bias = mean(&diffs);
    let sd = sample_var(&diffs).sqrt();
    Ok(BlandAltman {
        bias,
        loa_lo: bias - 1.96 * sd,
        loa_hi: bias + 1.96 * sd,
    })
}

/// Repeated-measures correlation: the common within-subject association of
/// x and y across subjects, removing between-subject offsets.
///
/// Each subject's pairs are centered on the subject means; the pooled
/// residuals are correlated. Degrees of freedom are
/// `n_pairs − n_subjects − 1`, counting only subjects whose centered x
/// varies. The CI comes from the Fisher z-transform.
pub fn rm_corr(data: &[(usize, f64, f64)]) -> Result<TestResult> {
    use std::collections::BTreeMap;
    let mut by_subject: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for &(id, x, y) in data {
        by_subject.entry(id).or_default().push((x, y));
    }
    if by_subject.len() < 2 {
        return Err(Error::InsufficientData(
            "rm_corr requires at least 2 subjects".into(),
        ));
    }
    let mut xr: Vec<f64> = Vec::new();
    let mut yr: Vec<f64> = Vec::new();
    let mut n_subjects = 0usize;
    for pairs in by_subject.values() {
        if pairs.len() < 2 {
            return Err(Error::InsufficientData(
                "rm_corr requires >= 2 pairs per subject".into(),
            ));
        }
        let mx = mean(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
        let my = mean(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
        // A subject with constant x contributes no within-subject information.
        if pairs.iter().all(|p| (p.0 - mx).abs() < 1e-12) {
            continue;
        }
        n_subjects += 1;
        for &(x, y) in pairs {
            xr.push(x - mx);
            yr.push(y - my);
        }
    }
    if n_subjects < 2 {
        return Err(Error::Degenerate(
            "rm_corr: fewer than 2 subjects with varying x".into(),
        ));
    }
    let sxx: f64 = xr.iter().map(|v| v * v).sum();
    let syy: f64 = yr.iter().map(|v| v * v).sum();
    let sxy: f64 = xr.iter().zip(&yr).map(|(a, b)| a * b).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(
            "rm_corr: zero variance after centering".into(),
        ));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (xr.len() - n_subjects - 1) as f64;
    if df < 1.0 {
        return Err(Error::InsufficientData("rm_corr: df < 1".into()));
    }
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        special::t_sf_two_sided(t, df)
    };
    let ci = if df > 1.0 && r.abs() < 1.0 {
        let z = r.atanh();
        let se = 1.0 / (df - 1.0).sqrt();
        Some(((z - 1.96 * se).tanh(), (z + 1.96 * se).tanh()))
    } else {
        Some((r, r))
    };
    Ok(TestResult {
        test: "rm_corr",
        statistic: r,
        p_value: p,
        df: Some(df),
        ci95: ci,
        n: vec![xr.len(), n_subjects],
    })
}

/// Wilcoxon signed-rank test for paired samples, with the default
/// exact/approximate switchover at 25 non-zero differences.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<TestResult> {
    wilcoxon_signed_rank_with(x, y, DEFAULT_EXACT_THRESHOLD)
}

/// Signed-rank test with an explicit exact-enumeration threshold.
///
/// Zero differences are dropped; tied absolute differences receive
/// mid-ranks. The statistic is W+, the rank sum of positive differences.
/// For n <= `exact_threshold` the two-sided p-value is
/// `min(1, 2*min(P(W <= w), P(W >= w)))` under the exact null distribution;
/// above it, a normal approximation with tie-corrected variance and
/// continuity correction is used.
pub fn wilcoxon_signed_rank_with(
    x: &[f64],
    y: &[f64],
    exact_threshold: usize,
) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "wilcoxon_signed_rank: length mismatch {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(Error::Degenerate(
            "wilcoxon_signed_rank: all differences are zero".into(),
        ));
    }
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, tie_term) = mid_ranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();

    let p = if n <= exact_threshold {
        exact_signed_rank_p(&ranks, w_plus)
    } else {
        let nf = n as f64;
        let mu = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let z = ((w_plus - mu).abs() - 0.5).max(0.0) / var.sqrt();
        (2.0 * special::norm_sf(z)).min(1.0)
    };
    Ok(TestResult {
        test: "wilcoxon_signed_rank",
        statistic: w_plus,
        p_value: p,
        df: None,
        ci95: None,
        n: vec![n],
    })
}

/// Exact two-sided signed-rank p-value by dynamic programming over the
/// distribution of W+ for the given (possibly tied) rank vector.
fn exact_signed_rank_p(ranks: &[f64], w_plus: f64) -> f64 {
    // Mid-ranks are multiples of 1/2; double them to stay on integers.
    let scaled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = scaled.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in &scaled {
        reach += r;
        for s in (r..=reach).rev() {
            counts[s] += counts[s - r];
        }
    }
    let total_assignments: f64 = counts.iter().sum();
    let w2 = (2.0 * w_plus).round() as usize;
    let le: f64 = counts[..=w2].iter().sum();
    let ge: f64 = counts[w2..].iter().sum();
    (2.0 * le.min(ge) / total_assignments).min(1.0)
}

/// Wilcoxon rank-sum (Mann-Whitney) test for two independent samples.
///
/// The statistic is the tie-corrected z value (without continuity
/// correction, so that it squares to the 2-group Kruskal-Wallis H on
/// tie-free data); the two-sided p-value applies a continuity correction.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData(
            "wilcoxon_rank_sum: empty group".into(),
        ));
    }
    let n1 = a.len() as f64;
    let n2 = b.len() as f64;
    let nt = n1 + n2;
    let mut all: Vec<f64> = Vec::with_capacity(a.len() + b.len());
    all.extend_from_slice(a);
    all.extend_from_slice(b);
    let (ranks, tie_term) = mid_ranks(&all);
    let r1: f64 = ranks[..a.len()].iter().sum();
    let u = r1 - n1 * (n1 + 1.0) / 2.0;
    let mu = n1 * n2 / 2.0;
    let var = n1 * n2 / 12.0 * ((nt + 1.0) - tie_term / (nt * (nt - 1.0)));
    if var <= 0.0 {
        return Err(Error::Degenerate(
            "wilcoxon_rank_sum: zero rank variance (all values tied)".into(),
        ));
    }
    let sd = var.sqrt();
    let z = (u - mu) / sd;
    let z_cc = ((u - mu).abs() - 0.5).max(0.0) / sd;
    let p = (2.0 * special::norm_sf(z_cc)).min(1.0);
    Ok(TestResult {
        test: "wilcoxon_rank_sum",
        statistic: z,
        p_value: p,
        df: None,
        ci95: None,
        n: vec![a.len(), b.len()],
    })
}

/// Kruskal-Wallis H test across two or more groups, with tie correction and
/// a chi-square p-value on `groups.len() − 1` degrees of freedom.
pub fn kruskal_wallis(groups: &[&[f64]]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::InsufficientData(
            "kruskal_wallis requires >= 2 groups".into(),
        ));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::InsufficientData(
            "kruskal_wallis: empty group".into(),
        ));
    }
    let total: usize = groups.iter().map(|g| g.len()).sum();
    if total < 5 {
        return Err(Error::InsufficientData(
            "kruskal_wallis requires total n >= 5".into(),
        ));
    }
    let mut all: Vec<f64> = Vec::with_capacity(total);
    for g in groups {
        all.extend_from_slice(g);
    }
    let (ranks, tie_term) = mid_ranks(&all);
    let nt = total as f64;
    let correction = 1.0 - tie_term / (nt * nt * nt - nt);
    if correction <= 0.0 {
        return Err(Error::Degenerate(
            "kruskal_wallis: zero variance in ranks (all values identical)".into(),
        ));
    }
    let mut offset = 0usize;
    let mut h = 0.0;
    for g in groups {
        let ni = g.len() as f64;
        let ri: f64 = ranks[offset..offset + g.len()].iter().sum();
        h += ri * ri / ni;
        offset += g.len();
    }
    h = (12.0 / (nt * (nt + 1.0)) * h - 3.0 * (nt + 1.0)) / correction;
    let df = (groups.len() - 1) as f64;
    let p = special::chi2_sf(h, df);
    Ok(TestResult {
        test: "kruskal_wallis",
        statistic: h,
        p_value: p,
        df: Some(df),
        ci95: None,
        n: groups.iter().map(|g| g.len()).collect(),
    })
}

/// Shapiro-Wilk normality test (Royston's AS R94 approximation, 3 <= n <= 5000).
pub fn shapiro_wilk(x: &[f64]) -> Result<TestResult> {
    let n = x.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "shapiro_wilk requires 3 <= n <= 5000, got {n}"
        )));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let range = sorted[n - 1] - sorted[0];
    if range == 0.0 {
        return Err(Error::ConstantSeries(
            "shapiro_wilk on constant input".into(),
        ));
    }

    // Expected normal order statistics (Blom scores) and their norm.
    let nf = n as f64;
    let m: Vec<f64> = (1..=n)
        .map(|i| special::norm_ppf((i as f64 - 0.375) / (nf + 0.25)))
        .collect();
    let m_ss: f64 = m.iter().map(|v| v * v).sum();

    // Weights: polynomial-corrected tails, rescaled interior.
    let u = 1.0 / nf.sqrt();
    let mut a = vec![0.0; n];
    if n == 3 {
        a[0] = -std::f64::consts::FRAC_1_SQRT_2;
        a[2] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let rsqrt_mss = 1.0 / m_ss.sqrt();
        let an = -2.706056 * u.powi(5) + 4.434685 * u.powi(4) - 2.071190 * u.powi(3)
            - 0.147981 * u * u
            + 0.221157 * u
            + m[n - 1] * rsqrt_mss;
        if n <= 5 {
            let phi = (m_ss - 2.0 * m[n - 1] * m[n - 1]) / (1.0 - 2.0 * an * an);
            for (i, w) in a.iter_mut().enumerate().take(n - 1).skip(1) {
                *w = m[i] / phi.sqrt();
            }
            a[n - 1] = an;
            a[0] = -an;
        } else {
            let an1 = -3.582633 * u.powi(5) + 5.682633 * u.powi(4) - 1.752461 * u.powi(3)
                - 0.293762 * u * u
                + 0.042981 * u
                + m[n - 2] * rsqrt_mss;
            let phi = (m_ss - 2.0 * m[n - 1] * m[n - 1] - 2.0 * m[n - 2] * m[n - 2])
                / (1.0 - 2.0 * an * an - 2.0 * an1 * an1);
            for (i, w) in a.iter_mut().enumerate().take(n - 2).skip(2) {
                *w = m[i] / phi.sqrt();
            }
            a[n - 1] = an;
            a[n - 2] = an1;
            a[0] = -an;
            a[1] = -an1;
        }
    }

    let xb = mean(&sorted);
    let num: f64 = a.iter().zip(&sorted).map(|(ai, xi)| ai * xi).sum();
    let den: f64 = sorted.iter().map(|xi| (xi - xb) * (xi - xb)).sum();
    let w = (num * num / den).min(1.0);

    let p = if n == 3 {
        let pi6 = 6.0 / std::f64::consts::PI;
        let stqr = (0.75f64).sqrt().asin();
        (pi6 * (w.sqrt().asin() - stqr)).clamp(0.0, 1.0)
    } else if n <= 11 {
        let g = -2.273 + 0.459 * nf;
        let mu = 0.5440 - 0.39978 * nf + 0.025054 * nf * nf - 0.0006714 * nf * nf * nf;
        let sigma = (1.3822 - 0.77857 * nf + 0.062767 * nf * nf - 0.0020322 * nf * nf * nf).exp();
        if g - (1.0 - w).ln() <= 0.0 {
            // W beyond the support of the transformed statistic.
            1.0
        } else {
            let z = (-((g - (1.0 - w).ln()).ln()) - mu) / sigma;
            special::norm_sf(z)
        }
    } else {
        let ln_n = nf.ln();
        let mu = -1.5861 - 0.31082 * ln_n - 0.083751 * ln_n * ln_n + 0.0038915 * ln_n.powi(3);
        let sigma = (-0.4803 - 0.082676 * ln_n + 0.0030302 * ln_n * ln_n).exp();
        let z = ((1.0 - w).ln() - mu) / sigma;
        special::norm_sf(z)
    };

    Ok(TestResult {
        test: "shapiro_wilk",
        statistic: w,
        p_value: p,
        df: None,
        ci95: None,
        n: vec![n],
    })
}

/// D'Agostino-Pearson K² omnibus normality test (skewness + kurtosis).
pub fn dagostino_k2(x: &[f64]) -> Result<TestResult> {
    let n = x.len();
    if n < 8 {
        return Err(Error::InsufficientData(format!(
            "dagostino_k2 requires n >= 8, got {n}"
        )));
    }
    let nf = n as f64;
    let m = mean(x);
    let m2: f64 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / nf;
    if m2 == 0.0 {
        return Err(Error::ConstantSeries(
            "dagostino_k2 on constant input".into(),
        ));
    }
    let m3: f64 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / nf;
    let m4: f64 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / nf;

    // Skewness z (D'Agostino 1970).
    let g1 = m3 / m2.powf(1.5);
    let y = g1 * ((nf + 1.0) * (nf + 3.0) / (6.0 * (nf - 2.0))).sqrt();
    let beta2 = 3.0 * (nf * nf + 27.0 * nf - 70.0) * (nf + 1.0) * (nf + 3.0)
        / ((nf - 2.0) * (nf + 5.0) * (nf + 7.0) * (nf + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    let y_a = y / alpha;
    let z1 = delta * (y_a + (y_a * y_a + 1.0).sqrt()).ln();

    // Kurtosis z (Anscombe & Glynn 1983).
    let b2 = m4 / (m2 * m2);
    let e = 3.0 * (nf - 1.0) / (nf + 1.0);
    let var = 24.0 * nf * (nf - 2.0) * (nf - 3.0) / ((nf + 1.0).powi(2) * (nf + 3.0) * (nf + 5.0));
    let xk = (b2 - e) / var.sqrt();
    let beta1 = 6.0 * (nf * nf - 5.0 * nf + 2.0) / ((nf + 7.0) * (nf + 9.0))
        * (6.0 * (nf + 3.0) * (nf + 5.0) / (nf * (nf - 2.0) * (nf - 3.0))).sqrt();
    let a = 6.0 + 8.0 / beta1 * (2.0 / beta1 + (1.0 + 4.0 / (beta1 * beta1)).sqrt());
    let t = (1.0 - 2.0 / a) / (1.0 + xk * (2.0 / (a - 4.0)).sqrt());
    let z2 = ((1.0 - 2.0 / (9.0 * a)) - t.cbrt()) * (9.0 * a / 2.0).sqrt();

    let k2 = z1 * z1 + z2 * z2;
    Ok(TestResult {
        test: "dagostino_k2",
        statistic: k2,
        p_value: special::chi2_sf(k2, 2.0),
        df: Some(2.0),
        ci95: None,
        n: vec![n],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_perfect_and_affine() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = pearson(&x, &x).unwrap();
        assert!((r.statistic - 1.0).abs() < 1e-12);
        assert!(r.p_value < 1e-10);

        let y2: Vec<f64> = x.iter().map(|v| -2.0 * v + 7.0).collect();
        let r2 = pearson(&x, &y2).unwrap();
        assert!((r2.statistic + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_hand_fixture_and_permutation_oracle() {
        // Hand computation: Sxy = 10, Sxx = 10, Syy = 14.8.
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 1.0, 4.0, 3.0, 6.0];
        let got = pearson(&x, &y).unwrap();
        let want = 10.0 / (10.0f64 * 14.8).sqrt();
        assert!((got.statistic - want).abs() < 1e-12);
        assert!((want - 0.8220).abs() < 1e-4);

        // Exact permutation p over all 5! orderings of y.
        let mut perm = [0usize, 1, 2, 3, 4];
        let mut count = 0usize;
        let mut total = 0usize;
        let obs = got.statistic.abs();
        permute(&mut perm, 0, &mut |p| {
            let yp: Vec<f64> = p.iter().map(|&i| y[i]).collect();
            let r = pearson(&x, &yp).unwrap().statistic;
            if r.abs() >= obs - 1e-12 {
                count += 1;
            }
            total += 1;
        });
        assert_eq!(total, 120);
        let p_perm = count as f64 / total as f64;
        assert!(
            (got.p_value - p_perm).abs() < 0.02,
            "t-based p {} vs permutation p {}",
            got.p_value,
            p_perm
        );
    }

    fn permute(items: &mut [usize], k: usize, f: &mut impl FnMut(&[usize])) {
        if k == items.len() {
            f(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, f);
            items.swap(k, i);
        }
    }

    #[test]
    fn pearson_rejects_constant() {
        let x = [1.0, 1.0, 1.0, 1.0];
        let y = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(pearson(&x, &y), Err(Error::ConstantSeries(_))));
    }

    #[test]
    fn bland_altman_fixtures() {
        let x = [1.0, 2.0, 3.0];
        let ba = bland_altman(&x, &x).unwrap();
        assert_eq!((ba.bias, ba.loa_lo, ba.loa_hi), (0.0, 0.0, 0.0));

        // Constant offset mirrors the reported activity-count mean bias.
        let y: Vec<f64> = x.iter().map(|v| v - 94.43).collect();
        let ba = bland_altman(&x, &y).unwrap();
        assert!((ba.bias - 94.43).abs() < 1e-12);
        assert!((ba.loa_hi - ba.loa_lo).abs() < 1e-12);

        // x − y = [−1, 0, 1]: sd = 1 exactly.
        let x2 = [0.0, 1.0, 2.0];
        let y2 = [1.0, 1.0, 1.0];
        let ba = bland_altman(&x2, &y2).unwrap();
        assert!((ba.bias).abs() < 1e-12);
        assert!((ba.loa_lo + 1.96).abs() < 1e-12);
        assert!((ba.loa_hi - 1.96).abs() < 1e-12);
    }

    #[test]
    fn rm_corr_perfect_within_subject() {
        let mut data = Vec::new();
        for s in 0..3usize {
            let offset = 10.0 * s as f64;
            for i in 0..4 {
                let x = i as f64;
                data.push((s, x, x + offset));
            }
        }
        let r = rm_corr(&data).unwrap();
        assert!((r.statistic - 1.0).abs() < 1e-12);
        assert_eq!(r.df, Some(8.0));

        let neg: Vec<(usize, f64, f64)> = data
            .iter()
            .map(|&(s, x, _)| (s, x, -x + 5.0 * s as f64))
            .collect();
        let r = rm_corr(&neg).unwrap();
        assert!((r.statistic + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rm_corr_offset_invariance() {
        let base: Vec<(usize, f64, f64)> = vec![
            (0, 1.0, 2.1),
            (0, 2.0, 2.9),
            (0, 3.0, 4.2),
            (1, 1.5, 7.0),
            (1, 2.5, 8.2),
            (1, 3.5, 8.9),
        ];
        let shifted: Vec<(usize, f64, f64)> = base
            .iter()
            .map(|&(s, x, y)| (s, x + 100.0 * s as f64, y - 55.0 * s as f64))
            .collect();
        let r0 = rm_corr(&base).unwrap();
        let r1 = rm_corr(&shifted).unwrap();
        assert!((r0.statistic - r1.statistic).abs() < 1e-12);
        assert!((r0.p_value - r1.p_value).abs() < 1e-12);
    }

    #[test]
    fn rm_corr_drops_constant_x_subjects() {
        let data = vec![
            (0, 1.0, 2.0),
            (0, 1.0, 3.0), // constant x: no information
            (1, 1.0, 2.0),
            (1, 2.0, 3.0),
            (1, 3.0, 4.5),
            (2, 0.0, 1.0),
            (2, 1.0, 2.2),
        ];
        let r = rm_corr(&data).unwrap();
        // 5 informative pairs, 2 informative subjects.
        assert_eq!(r.df, Some(2.0));
        let degenerate = vec![(0, 1.0, 2.0), (0, 1.0, 3.0), (1, 5.0, 2.0), (1, 5.0, 9.0)];
        assert!(rm_corr(&degenerate).is_err());
    }

    #[test]
    fn signed_rank_degenerate_and_symmetric() {
        // Single nonzero difference: exact p = 1.0.
        let x = [1.0, 2.0, 3.0];
        let y = [1.0, 2.0, 4.0];
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert_eq!(r.n, vec![1]);
        assert!((r.p_value - 1.0).abs() < 1e-12);

        // Perfectly symmetric differences [−3, −1, 1, 3]: p = 1.0 exact.
        let x = [0.0, 0.0, 0.0, 0.0];
        let y = [3.0, 1.0, -1.0, -3.0];
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert!((r.p_value - 1.0).abs() < 1e-12);

        let same = [5.0, 5.0];
        assert!(wilcoxon_signed_rank(&same, &same).is_err());
    }

    #[test]
    fn signed_rank_exact_matches_brute_force_enumeration() {
        // n = 10 fixture with a tie in |d|.
        let x = [1.2, 0.4, -0.8, 2.0, 1.5, -0.3, 0.9, 1.1, -1.6, 0.8];
        let zeros = [0.0; 10];
        let r = wilcoxon_signed_rank(&x, &zeros).unwrap();

        // Independent oracle: literal enumeration of all 2^10 sign vectors.
        let abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        let (ranks, _) = mid_ranks(&abs);
        let w_obs: f64 = x
            .iter()
            .zip(&ranks)
            .filter(|(d, _)| **d > 0.0)
            .map(|(_, r)| *r)
            .sum();
        let n = x.len();
        let mut le = 0usize;
        let mut ge = 0usize;
        for mask in 0u32..(1 << n) {
            let w: f64 = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| ranks[i])
                .sum();
            if w <= w_obs + 1e-9 {
                le += 1;
            }
            if w >= w_obs - 1e-9 {
                ge += 1;
            }
        }
        let p_oracle = (2.0 * (le.min(ge) as f64) / (1u64 << n) as f64).min(1.0);
        assert!(
            (r.p_value - p_oracle).abs() < 1e-12,
            "exact p {} vs enumeration {}",
            r.p_value,
            p_oracle
        );
    }

    #[test]
    fn signed_rank_antisymmetry() {
        let x = [1.0, 4.0, 2.5, 7.0, 3.0, 8.0];
        let y = [2.0, 3.5, 2.0, 9.0, 1.0, 8.5];
        let fwd = wilcoxon_signed_rank(&x, &y).unwrap();
        let rev = wilcoxon_signed_rank(&y, &x).unwrap();
        assert!((fwd.p_value - rev.p_value).abs() < 1e-12);
        let n = fwd.n[0] as f64;
        assert!((fwd.statistic + rev.statistic - n * (n + 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn rank_sum_identical_and_separated() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = wilcoxon_rank_sum(&a, &a).unwrap();
        assert!(r.statistic.abs() <= 0.05);
        assert!((r.p_value - 1.0).abs() < 1e-9);

        let lo: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let hi: Vec<f64> = (0..10).map(|i| 100.0 + i as f64).collect();
        let r = wilcoxon_rank_sum(&lo, &hi).unwrap();
        assert!(r.p_value < 0.001);
    }

    #[test]
    fn rank_sum_approx_close_to_exact_enumeration() {
        let a = [1.2, 2.3, 3.1, 4.0, 5.2, 6.1];
        let b = [2.0, 3.5, 4.4, 5.0, 6.6, 7.2];
        let r = wilcoxon_rank_sum(&a, &b).unwrap();

        // Exact oracle: enumerate all C(12,6) = 924 group assignments.
        let mut all = Vec::new();
        all.extend_from_slice(&a);
        all.extend_from_slice(&b);
        let (ranks, _) = mid_ranks(&all);
        let obs: f64 = ranks[..6].iter().sum();
        let idx: Vec<usize> = (0..12).collect();
        let mut le = 0usize;
        let mut ge = 0usize;
        let mut total = 0usize;
        combinations(&idx, 6, &mut |sel| {
            let s: f64 = sel.iter().map(|&i| ranks[i]).sum();
            if s <= obs + 1e-9 {
                le += 1;
            }
            if s >= obs - 1e-9 {
                ge += 1;
            }
            total += 1;
        });
        assert_eq!(total, 924);
        let p_exact = (2.0 * le.min(ge) as f64 / total as f64).min(1.0);
        assert!(
            (r.p_value - p_exact).abs() < 0.02,
            "approx p {} vs exact {}",
            r.p_value,
            p_exact
        );
    }

    fn combinations(items: &[usize], k: usize, f: &mut impl FnMut(&[usize])) {
        fn rec(
            items: &[usize],
            k: usize,
            start: usize,
            cur: &mut Vec<usize>,
            f: &mut impl FnMut(&[usize]),
        ) {
            if cur.len() == k {
                f(cur);
                return;
            }
            for i in start..items.len() {
                cur.push(items[i]);
                rec(items, k, i + 1, cur, f);
                cur.pop();
            }
        }
        rec(items, k, 0, &mut Vec::new(), f);
    }

    #[test]
    fn kruskal_wallis_hand_ranked_fixture() {
        // 3 groups, n = 5 each, no ties: ranks assigned by hand.
        let g1 = [1.0, 4.0, 7.0, 10.0, 13.0]; // ranks 1,4,7,10,13 -> R=35
        let g2 = [2.0, 5.0, 8.0, 11.0, 14.0]; // ranks 2,5,8,11,14 -> R=40
        let g3 = [3.0, 6.0, 9.0, 12.0, 15.0]; // ranks 3,6,9,12,15 -> R=45
        let r = kruskal_wallis(&[&g1, &g2, &g3]).unwrap();
        let n = 15.0;
        let h_hand = 12.0 / (n * (n + 1.0))
            * (35.0f64.powi(2) / 5.0 + 40.0f64.powi(2) / 5.0 + 45.0f64.powi(2) / 5.0)
            - 3.0 * (n + 1.0);
        assert!((r.statistic - h_hand).abs() < 1e-9);
        assert_eq!(r.df, Some(2.0));
    }

    #[test]
    fn kruskal_wallis_identical_and_disjoint_groups() {
        let g = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let r = kruskal_wallis(&[&g, &g, &g]).unwrap();
        assert!(r.statistic.abs() < 1e-9);
        assert!(r.p_value > 0.99);

        let a: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..6).map(|i| 10.0 + i as f64).collect();
        let c: Vec<f64> = (0..6).map(|i| 20.0 + i as f64).collect();
        let r = kruskal_wallis(&[&a, &b, &c]).unwrap();
        assert!(r.p_value < 0.01);

        let same = [3.0; 6];
        assert!(kruskal_wallis(&[&same, &same]).is_err());
    }

    #[test]
    fn kw_equals_z_squared_on_tie_free_two_groups() {
        let a = [1.0, 5.0, 2.5, 9.0, 4.0, 7.5, 11.0];
        let b = [3.0, 6.0, 8.0, 10.0, 12.0, 0.5];
        let kw = kruskal_wallis(&[&a, &b]).unwrap();
        let rs = wilcoxon_rank_sum(&a, &b).unwrap();
        assert!(
            (kw.statistic - rs.statistic * rs.statistic).abs() < 1e-6,
            "H {} vs z^2 {}",
            kw.statistic,
            rs.statistic * rs.statistic
        );
    }

    #[test]
    fn shapiro_wilk_reference_values() {
        // Reference W and p from an established implementation of AS R94.
        let x1 = [
            148.0, 154.0, 158.0, 160.0, 161.0, 162.0, 166.0, 170.0, 182.0, 195.0, 236.0,
        ];
        let r = shapiro_wilk(&x1).unwrap();
        assert!((r.statistic - 0.7888146948631716).abs() < 1e-6);
        assert!((r.p_value - 0.006703814061898823).abs() < 1e-4);

        let x2: Vec<f64> = (1..=20).map(|i| (i as f64) * (i as f64)).collect();
        let r = shapiro_wilk(&x2).unwrap();
        assert!((r.statistic - 0.9061306286053874).abs() < 1e-6);
        assert!((r.p_value - 0.053809589128654696).abs() < 1e-3);

        let x3 = [
            2.1, 3.4, 1.9, 5.6, 3.3, 4.0, 2.8, 3.1, 3.9, 2.2, 4.4, 3.6, 2.9, 3.3,
        ];
        let r = shapiro_wilk(&x3).unwrap();
        assert!((r.statistic - 0.9548712740792153).abs() < 1e-6);
        assert!((r.p_value - 0.6385398815564348).abs() < 1e-3);
    }

    #[test]
    fn shapiro_wilk_three_equally_spaced_points() {
        let r = shapiro_wilk(&[1.0, 2.0, 3.0]).unwrap();
        assert!((r.statistic - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dagostino_k2_reference_values() {
        let mut y1: Vec<f64> = (1..=36).map(|i| i as f64).collect();
        y1[35] = 80.0;
        let r = dagostino_k2(&y1).unwrap();
        assert!((r.statistic - 30.74347373507468).abs() < 1e-8);
        assert!((r.p_value - 2.1093055781142763e-7).abs() < 1e-12);

        let y2 = [
            4.5, 3.2, 5.6, 6.1, 2.8, 3.9, 4.4, 5.0, 4.1, 3.7, 5.2, 4.8, 3.3, 4.0, 4.9, 5.5, 2.9,
            4.2, 4.6, 3.8, 5.1, 4.3, 3.5, 4.7, 5.3, 3.6, 4.35, 4.05, 4.55, 3.95, 5.05, 4.15, 3.45,
            4.65, 5.15, 3.75,
        ];
        let r = dagostino_k2(&y2).unwrap();
        assert!((r.statistic - 0.2225215003451036).abs() < 1e-8);
        assert!((r.p_value - 0.894705423916915).abs() < 1e-8);
    }
}
