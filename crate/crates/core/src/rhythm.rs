//! Circadian rhythm metrics: least-squares cosinor parameters (mesor,
//! amplitude, acrophase) and the non-parametric actigraphy measures
//! (interdaily stability, intradaily variability, M10, L5, relative
//! amplitude).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ingest::{self, Agg};
use crate::series::EpochSeries;

pub const DEFAULT_PERIOD_HOURS: f64 = 24.0;
pub const SECONDS_PER_DAY: f64 = 86400.0;

/// Cosine fit y(t) = M + A·cos(ωt + φ) with fixed period.
///
/// `acrophase_hours` is the local clock time of the fitted peak in [0, 24)
/// and satisfies `acrophase_hours = mod(−φ·24/2π, 24)` because the fit runs
/// on participant-local clock hours. Both phase fields are absent for a
/// degenerate (constant) signal.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CosinorFit {
    pub mesor: f64,
    pub amplitude: f64,
    pub acrophase_hours: Option<f64>,
    pub phi_radians: Option<f64>,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Non-parametric rhythm measures. Each is absent when its defining ratio
/// is degenerate (zero variance, or an empty average-day profile).
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct NonparamMetrics {
    pub is_: Option<f64>,
    pub iv: Option<f64>,
    pub m10: Option<f64>,
    pub l5: Option<f64>,
    pub ra: Option<f64>,
}

/// Resolution of the M10/L5 window-start search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileResolution {
    /// 144 candidate starts on the 10-minute mean profile.
    TenMinute,
    /// 24 candidate starts on the hourly mean profile.
    Hourly,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct NonparamConfig {
    /// Bin length for the IS/IV series, seconds.
    pub stability_bin_s: f64,
    pub profile_resolution: ProfileResolution,
}

impl Default for NonparamConfig {
    fn default() -> Self {
        NonparamConfig {
            stability_bin_s: 3600.0,
            profile_resolution: ProfileResolution::TenMinute,
        }
    }
}

/// Fits the fixed-period cosinor model by ordinary least squares on
/// y = M + β₁cos(ωt) + β₂sin(ωt), with t in participant-local clock hours.
///
/// Requires at least 3 valid epochs spanning a full period. Invalid epochs
/// are excluded. A constant signal yields amplitude 0, r² = 0 and an
/// undefined acrophase.
pub fn fit_cosinor(s: &EpochSeries, period_hours: f64, utc_offset_s: f64) -> Result<CosinorFit> {
    if period_hours <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "period must be positive, got {period_hours}"
        )));
    }
    let pts: Vec<(f64, f64)> = s
        .valid_values()
        .map(|(i, v)| ((s.epoch_mid(i) + utc_offset_s) / 3600.0, v))
        .collect();
    let n = pts.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "cosinor requires >= 3 valid epochs, got {n}"
        )));
    }
    let span_h = pts[n - 1].0 - pts[0].0;
    if span_h + s.epoch_len / 3600.0 < period_hours {
        return Err(Error::InsufficientData(format!(
            "cosinor requires >= {period_hours} h of data, got {span_h:.2} h"
        )));
    }

    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (y_min, y_max) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.1), hi.max(p.1))
        });
    if y_max - y_min == 0.0 {
        return Ok(CosinorFit {
            mesor: y_min,
            amplitude: 0.0,
            acrophase_hours: None,
            phi_radians: None,
            r_squared: 0.0,
            n_points: n,
        });
    }
    let sst: f64 = pts.iter().map(|p| (p.1 - ybar).powi(2)).sum();

    let omega = 2.0 * std::f64::consts::PI / period_hours;
    let design = DMatrix::from_fn(n, 3, |r, c| match c {
        0 => 1.0,
        1 => (omega * pts[r].0).cos(),
        _ => (omega * pts[r].0).sin(),
    });
    let y = DVector::from_iterator(n, pts.iter().map(|p| p.1));
    let xtx = design.transpose() * &design;
    let xty = design.transpose() * &y;
    // Degenerate phase coverage (all points at one phase mod τ) makes the
    // normal matrix singular.
    let eigs = nalgebra::SymmetricEigen::new(xtx.clone()).eigenvalues;
    let (e_min, e_max) = eigs
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), e| (lo.min(*e), hi.max(*e)));
    if e_min <= 1e-10 * e_max {
        return Err(Error::RankDeficient {
            columns: vec!["cos".into(), "sin".into()],
        });
    }
    let beta = xtx
        .cholesky()
        .map(|ch| ch.solve(&xty))
        .ok_or_else(|| Error::RankDeficient {
            columns: vec!["cos".into(), "sin".into()],
        })?;
    let (mesor, b1, b2) = (beta[0], beta[1], beta[2]);
    let amplitude = (b1 * b1 + b2 * b2).sqrt();
    let phi = (-b2).atan2(b1);
    let residuals = &y - design * beta;
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let r_squared = (1.0 - sse / sst).clamp(0.0, 1.0);
    // Peak where ωt + φ ≡ 0 (mod 2π), expressed on the 24 h clock.
    let acro = (-phi / omega).rem_euclid(24.0);
    Ok(CosinorFit {
        mesor,
        amplitude,
        acrophase_hours: Some(acro),
        phi_radians: Some(phi),
        r_squared,
        n_points: n,
    })
}

/// Computes IS, IV, M10, L5 and RA for a (normalized) epoch series covering
/// at least two full days.
///
/// IS and IV run on hourly means re-binned from the input:
/// IS = (N·Σₕ(x̄ₕ−x̄)²)/(p·Σᵢ(xᵢ−x̄)²) over the p hour-of-day bins with data
/// (p = 24 when coverage is complete); IV = (N·ΣᵢΔᵢ²)/(P·Σᵢ(xᵢ−x̄)²) over
/// the P grid-adjacent valid pairs (P = N−1 when complete). M10/L5 scan
/// contiguous 10 h/5 h windows (wrap-around) of the average-day profile.
pub fn nonparametric_metrics(s: &EpochSeries, utc_offset_s: f64) -> Result<NonparamMetrics> {
    nonparametric_metrics_with(s, utc_offset_s, &NonparamConfig::default())
}

pub fn nonparametric_metrics_with(
    s: &EpochSeries,
    utc_offset_s: f64,
    cfg: &NonparamConfig,
) -> Result<NonparamMetrics> {
    // Two full days of coverage, with one stability bin of slack so masked
    // edges do not disqualify an otherwise complete recording.
    let span = s.end() - s.start;
    if span + cfg.stability_bin_s < 2.0 * SECONDS_PER_DAY {
        return Err(Error::InsufficientData(format!(
            "non-parametric metrics require >= 2 full days, got {:.2} days",
            span / SECONDS_PER_DAY
        )));
    }
    if s.n_valid() < 2 {
        return Err(Error::InsufficientData(
            "non-parametric metrics require >= 2 valid epochs".into(),
        ));
    }

    let hourly = ingest::rebin_epochs(s, cfg.stability_bin_s, Agg::Mean)?;
    let (is_, iv) = stability_indices(&hourly, utc_offset_s, cfg.stability_bin_s);

    let profile_bin_s = match cfg.profile_resolution {
        ProfileResolution::TenMinute => 600.0,
        ProfileResolution::Hourly => 3600.0,
    };
    let profile = average_day_profile(s, utc_offset_s, profile_bin_s);
    let bins_per_day = (SECONDS_PER_DAY / profile_bin_s) as usize;
    let m10 = best_window(&profile, (36000.0 / profile_bin_s) as usize, bins_per_day, true);
    let l5 = best_window(&profile, (18000.0 / profile_bin_s) as usize, bins_per_day, false);
    let ra = match (m10, l5) {
        (Some(m), Some(l)) if m + l > 0.0 => Some((m - l) / (m + l)),
        _ => None,
    };
    Ok(NonparamMetrics {
        is_,
        iv,
        m10,
        l5,
        ra,
    })
}

fn stability_indices(
    hourly: &EpochSeries,
    utc_offset_s: f64,
    bin_s: f64,
) -> (Option<f64>, Option<f64>) {
    let values: Vec<(usize, f64)> = hourly.valid_values().collect();
    let n = values.len();
    if n < 2 {
        return (None, None);
    }
    let nf = n as f64;
    let mean = values.iter().map(|(_, v)| v).sum::<f64>() / nf;
    let total_ss: f64 = values.iter().map(|(_, v)| (v - mean).powi(2)).sum();
    if total_ss == 0.0 {
        return (None, None);
    }

    let bins_per_day = (SECONDS_PER_DAY / bin_s).round() as usize;
    let mut bin_sum = vec![0.0; bins_per_day];
    let mut bin_n = vec![0usize; bins_per_day];
    for (i, v) in &values {
        let local = hourly.epoch_start(*i) + utc_offset_s;
        let bin = ((local.rem_euclid(SECONDS_PER_DAY)) / bin_s).floor() as usize % bins_per_day;
        bin_sum[bin] += v;
        bin_n[bin] += 1;
    }
    let mut hourly_ss = 0.0;
    let mut p = 0usize;
    for b in 0..bins_per_day {
        if bin_n[b] > 0 {
            p += 1;
            let bm = bin_sum[b] / bin_n[b] as f64;
            hourly_ss += (bm - mean).powi(2);
        }
    }
    let is_ = Some(nf * hourly_ss / (p as f64 * total_ss));

    let mut diff_ss = 0.0;
    let mut pairs = 0usize;
    for i in 1..hourly.len() {
        if let (Some(prev), Some(cur)) = (hourly.value(i - 1), hourly.value(i)) {
            diff_ss += (cur - prev).powi(2);
            pairs += 1;
        }
    }
    let iv = if pairs > 0 {
        Some(nf * diff_ss / (pairs as f64 * total_ss))
    } else {
        None
    };
    (is_, iv)
}

/// Mean value per bin-of-day across all days; NaN for bins with no data.
fn average_day_profile(s: &EpochSeries, utc_offset_s: f64, bin_s: f64) -> Vec<f64> {
    let bins = (SECONDS_PER_DAY / bin_s).round() as usize;
    let mut sum = vec![0.0; bins];
    let mut n = vec![0usize; bins];
    for (i, v) in s.valid_values() {
        let local = s.epoch_start(i) + utc_offset_s;
        let bin = ((local.rem_euclid(SECONDS_PER_DAY)) / bin_s).floor() as usize % bins;
        sum[bin] += v;
        n[bin] += 1;
    }
    (0..bins)
        .map(|b| {
            if n[b] > 0 {
                sum[b] / n[b] as f64
            } else {
                f64::NAN
            }
        })
        .collect()
}

/// Extreme mean over contiguous wrap-around windows of `width` bins,
/// skipping empty bins; `None` when no window holds any data.
fn best_window(profile: &[f64], width: usize, bins: usize, maximize: bool) -> Option<f64> {
    let mut best: Option<f64> = None;
    for start in 0..bins {
        let mut sum = 0.0;
        let mut cnt = 0usize;
        for k in 0..width {
            let v = profile[(start + k) % bins];
            if v.is_finite() {
                sum += v;
                cnt += 1;
            }
        }
        if cnt == 0 {
            continue;
        }
        let mean = sum / cnt as f64;
        best = Some(match best {
            None => mean,
            Some(b) if maximize => b.max(mean),
            Some(b) => b.min(mean),
        });
    }
    best
}

/// The eight-metric bundle for one signal of one participant.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct RhythmMetrics {
    pub mesor: f64,
    pub amplitude: f64,
    pub acrophase_hours: Option<f64>,
    pub is_: Option<f64>,
    pub iv: Option<f64>,
    pub m10: Option<f64>,
    pub l5: Option<f64>,
    pub ra: Option<f64>,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Convenience bundle of [`fit_cosinor`] and [`nonparametric_metrics`] on
/// the same normalized series.
pub fn rhythm_metrics(
    s: &EpochSeries,
    period_hours: f64,
    utc_offset_s: f64,
    cfg: &NonparamConfig,
) -> Result<RhythmMetrics> {
    let fit = fit_cosinor(s, period_hours, utc_offset_s)?;
    let np = nonparametric_metrics_with(s, utc_offset_s, cfg)?;
    Ok(RhythmMetrics {
        mesor: fit.mesor,
        amplitude: fit.amplitude,
        acrophase_hours: fit.acrophase_hours,
        is_: np.is_,
        iv: np.iv,
        m10: np.m10,
        l5: np.l5,
        ra: np.ra,
        r_squared: fit.r_squared,
        n_points: fit.n_points,
    })
}
