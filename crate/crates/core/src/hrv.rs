//! Time-domain heart-rate-variability metrics over fixed windows of R-R
//! interval events.

use crate::error::{Error, Result};
use crate::series::{EpochSeries, SampleSeries, SignalKind};

/// Default minimum beat count for a 10-minute window to yield metrics.
pub const DEFAULT_MIN_BEATS: usize = 30;

/// The four time-domain metrics of one window.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct HrvMetrics {
    /// Mean R-R interval, ms.
    pub mean_rr: f64,
    /// Sample standard deviation of the intervals (n−1 denominator), ms.
    pub sdnn: f64,
    /// Root mean square of successive differences, ms.
    pub rmssd: f64,
    /// Fraction of successive differences exceeding 50 ms, in [0, 1].
    pub pnn50: f64,
}

/// One analysis window. `metrics` is present iff the window contained at
/// least the configured minimum number of intervals.
#[derive(Debug, Clone)]
pub struct HrvWindow {
    pub start: f64,
    pub duration: f64,
    pub n_intervals: usize,
    pub metrics: Option<HrvMetrics>,
}

/// Segments RRI events into fixed windows (anchored at multiples of
/// `window_s` on the Unix time axis) and computes Mean RR, SDNN, RMSSD and
/// pNN50 per window. Successive-difference statistics use only pairs of
/// intervals adjacent within the same window; windows with fewer than
/// `min_beats` intervals carry no metrics.
pub fn compute_hrv_windows(
    rri: &SampleSeries,
    window_s: f64,
    min_beats: usize,
) -> Result<Vec<HrvWindow>> {
    if rri.kind != SignalKind::Rri {
        return Err(Error::InvalidArgument(format!(
            "compute_hrv_windows expects RRI events, got {}",
            rri.kind.name()
        )));
    }
    if window_s <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "window must be positive, got {window_s}"
        )));
    }
    if rri.is_empty() {
        return Ok(Vec::new());
    }
    let (t0, t_last) = rri.span();
    let first = (t0 / window_s).floor() as i64;
    let last = (t_last / window_s).floor() as i64;
    let n_windows = (last - first + 1) as usize;

    let mut windows = Vec::with_capacity(n_windows);
    let mut lo = 0usize;
    for w in 0..n_windows {
        let w_start = (first + w as i64) as f64 * window_s;
        let w_end = w_start + window_s;
        while lo < rri.len() && rri.timestamps[lo] < w_start {
            lo += 1;
        }
        let mut hi = lo;
        while hi < rri.len() && rri.timestamps[hi] < w_end {
            hi += 1;
        }
        let slice = &rri.values[lo..hi];
        let n = slice.len();
        let metrics = if n >= min_beats.max(1) && n >= 1 {
            Some(window_metrics(slice))
        } else {
            None
        };
        windows.push(HrvWindow {
            start: w_start,
            duration: window_s,
            n_intervals: n,
            metrics,
        });
        lo = hi;
    }
    Ok(windows)
}

fn window_metrics(rr: &[f64]) -> HrvMetrics {
    let n = rr.len() as f64;
    let mean_rr = rr.iter().sum::<f64>() / n;
    let sdnn = if rr.len() > 1 {
        (rr.iter().map(|v| (v - mean_rr).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let (rmssd, pnn50) = if rr.len() > 1 {
        let mut sq_sum = 0.0;
        let mut over50 = 0usize;
        for pair in rr.windows(2) {
            let d = pair[1] - pair[0];
            sq_sum += d * d;
            if d.abs() > 50.0 {
                over50 += 1;
            }
        }
        let pairs = n - 1.0;
        ((sq_sum / pairs).sqrt(), over50 as f64 / pairs)
    } else {
        (0.0, 0.0)
    };
    HrvMetrics {
        mean_rr,
        sdnn,
        rmssd,
        pnn50,
    }
}

/// Extracts one metric across windows as an epoch series on the window grid,
/// with windows lacking metrics marked invalid.
pub fn metric_series(windows: &[HrvWindow], metric: HrvMetricKind) -> Result<EpochSeries> {
    if windows.is_empty() {
        return Err(Error::InsufficientData("no HRV windows".into()));
    }
    let start = windows[0].start;
    let len = windows[0].duration;
    let mut values = Vec::with_capacity(windows.len());
    let mut valid = Vec::with_capacity(windows.len());
    for w in windows {
        match &w.metrics {
            Some(m) => {
                values.push(metric.pick(m));
                valid.push(true);
            }
            None => {
                values.push(f64::NAN);
                valid.push(false);
            }
        }
    }
    EpochSeries::new(start, len, values, valid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrvMetricKind {
    MeanRr,
    Sdnn,
    Rmssd,
    Pnn50,
}

impl HrvMetricKind {
    fn pick(self, m: &HrvMetrics) -> f64 {
        match self {
            HrvMetricKind::MeanRr => m.mean_rr,
            HrvMetricKind::Sdnn => m.sdnn,
            HrvMetricKind::Rmssd => m.rmssd,
            HrvMetricKind::Pnn50 => m.pnn50,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rri_series(values: &[f64]) -> SampleSeries {
        // Event times accumulate from the interval stream itself.
        let mut t = 0.0;
        let mut ts = Vec::with_capacity(values.len());
        for v in values {
            ts.push(t);
            t += v / 1000.0;
        }
        SampleSeries::new(SignalKind::Rri, ts, values.to_vec(), None, None).unwrap()
    }

    #[test]
    fn constant_rri_yields_zero_variability() {
        let s = rri_series(&[800.0; 100]);
        let w = compute_hrv_windows(&s, 600.0, 30).unwrap();
        assert_eq!(w.len(), 1);
        let m = w[0].metrics.unwrap();
        assert_eq!(w[0].n_intervals, 100);
        assert!((m.mean_rr - 800.0).abs() < 1e-12);
        assert_eq!(m.sdnn, 0.0);
        assert_eq!(m.rmssd, 0.0);
        assert_eq!(m.pnn50, 0.0);
    }

    #[test]
    fn alternating_rri_hand_computation() {
        // 800/900 alternating, 10 intervals: every |Δ| = 100 > 50.
        let vals: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 800.0 } else { 900.0 }).collect();
        let s = rri_series(&vals);
        let w = compute_hrv_windows(&s, 600.0, 5).unwrap();
        let m = w[0].metrics.unwrap();
        assert!((m.rmssd - 100.0).abs() < 1e-9);
        assert!((m.pnn50 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_interval_hand_computation() {
        // Oracle recomputation: mean = 2485/3; sdnn = sqrt(1216.666./2);
        // rmssd = sqrt((40^2 + 5^2)/2); no |Δ| exceeds 50 ms, so pnn50 = 0.
        let s = rri_series(&[800.0, 840.0, 845.0]);
        let w = compute_hrv_windows(&s, 600.0, 1).unwrap();
        let m = w[0].metrics.unwrap();
        assert!((m.mean_rr - 2485.0 / 3.0).abs() < 1e-9);
        assert!((m.mean_rr - 828.3333333333334).abs() < 1e-9);
        assert!((m.sdnn - (1216.6666666666667f64 / 2.0).sqrt()).abs() < 1e-9);
        assert!((m.sdnn - 24.664414311581236).abs() < 1e-9);
        assert!((m.rmssd - 812.5f64.sqrt()).abs() < 1e-9);
        assert!((m.rmssd - 28.50438562747845).abs() < 1e-9);
        assert_eq!(m.pnn50, 0.0);
    }

    #[test]
    fn sparse_window_marked_invalid() {
        let s = rri_series(&[800.0; 10]);
        let w = compute_hrv_windows(&s, 600.0, 30).unwrap();
        assert_eq!(w.len(), 1);
        assert!(w[0].metrics.is_none());
        assert_eq!(w[0].n_intervals, 10);
        assert!(compute_hrv_windows(&s, 0.0, 30).is_err());
    }

    #[test]
    fn two_interval_window_rmssd_is_abs_difference() {
        let s = rri_series(&[800.0, 837.0]);
        let w = compute_hrv_windows(&s, 600.0, 1).unwrap();
        let m = w[0].metrics.unwrap();
        assert!((m.rmssd - 37.0).abs() < 1e-12);
    }

    #[test]
    fn no_successive_pairs_across_window_boundaries() {
        // Two windows; a huge jump exactly at the boundary must not leak
        // into either window's RMSSD.
        let mut ts = Vec::new();
        let mut vals = Vec::new();
        for i in 0..40 {
            ts.push(i as f64 * 16.0); // 16 s apart: 38 fall in window 0
            vals.push(if i < 20 { 800.0 } else { 1600.0 });
        }
        let s = SampleSeries::new(SignalKind::Rri, ts, vals, None, None).unwrap();
        let w = compute_hrv_windows(&s, 320.0, 2).unwrap();
        assert_eq!(w.len(), 2);
        let m0 = w[0].metrics.unwrap();
        let m1 = w[1].metrics.unwrap();
        assert_eq!(w[0].n_intervals, 20);
        // Window 0 holds only the 800s: constant.
        assert_eq!(m0.rmssd, 0.0);
        assert_eq!(m1.rmssd, 0.0);
    }

    #[test]
    fn translation_and_scaling_invariants() {
        let base: Vec<f64> = (0..60)
            .map(|i| 800.0 + 40.0 * ((i as f64) * 0.7).sin() + 15.0 * ((i as f64) * 2.3).cos())
            .collect();
        let m0 = window_metrics(&base);

        // Translation: mean shifts by c, dispersion metrics unchanged.
        let c = 123.0;
        let shifted: Vec<f64> = base.iter().map(|v| v + c).collect();
        let m1 = window_metrics(&shifted);
        assert!((m1.mean_rr - (m0.mean_rr + c)).abs() < 1e-9);
        assert!((m1.sdnn - m0.sdnn).abs() / m0.sdnn < 1e-9);
        assert!((m1.rmssd - m0.rmssd).abs() / m0.rmssd < 1e-9);
        assert_eq!(m1.pnn50, m0.pnn50);

        // Scaling: mean/sdnn/rmssd scale by k.
        let k = 1.75;
        let scaled: Vec<f64> = base.iter().map(|v| v * k).collect();
        let m2 = window_metrics(&scaled);
        assert!((m2.mean_rr - k * m0.mean_rr).abs() < 1e-9);
        assert!((m2.sdnn - k * m0.sdnn).abs() / m0.sdnn < 1e-9);
        assert!((m2.rmssd - k * m0.rmssd).abs() / m0.rmssd < 1e-9);
    }

    #[test]
    fn metric_series_masks_sparse_windows() {
        let mut ts = Vec::new();
        let mut vals = Vec::new();
        // Window 0: 50 beats. Window 1: 3 beats. Window 2: 40 beats.
        for i in 0..50 {
            ts.push(i as f64);
            vals.push(800.0);
        }
        for i in 0..3 {
            ts.push(600.0 + i as f64);
            vals.push(820.0);
        }
        for i in 0..40 {
            ts.push(1200.0 + i as f64);
            vals.push(840.0);
        }
        let s = SampleSeries::new(SignalKind::Rri, ts, vals, None, None).unwrap();
        let w = compute_hrv_windows(&s, 600.0, 30).unwrap();
        let series = metric_series(&w, HrvMetricKind::MeanRr).unwrap();
        assert_eq!(series.len(), 3);
        assert_eq!(series.value(0), Some(800.0));
        assert_eq!(series.value(1), None);
        assert_eq!(series.value(2), Some(840.0));
    }
}
