//! Activity-count derivation from raw acceleration, so watch counts and
//! reference-device counts come from the same algorithm.
//!
//! Pipeline per axis: resample to 30 Hz, band-pass 0.29-1.63 Hz (order-4
//! Butterworth cascade, causal), rectify, clip at 2.13 g, dead-band below
//! 0.068 g, quantize at 1/128 g per count unit, decimate to 10 Hz by
//! averaging, sum per one-minute epoch. Filter state resets at every
//! gap-induced segment boundary.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::series::{EpochSeries, SampleSeries, SignalKind};

/// Count-generation constants. Defaults follow the published description of
/// the reference device's algorithm; bit-exact vendor parity is not a goal.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct CountsConfig {
    /// Working sample rate of the pipeline, Hz.
    pub pipeline_hz: f64,
    /// Band-pass passband, Hz.
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    /// Clip rectified acceleration at this many g.
    pub clip_g: f64,
    /// Rectified values below this threshold are zeroed, g.
    pub dead_band_g: f64,
    /// Quantization step: one count unit per this many g.
    pub count_unit_g: f64,
    /// Rate after decimation-by-averaging, Hz.
    pub decimated_hz: f64,
    /// Epoch length of the output counts, seconds.
    pub epoch_s: f64,
    /// Largest timestamp gap bridged by interpolation, seconds.
    pub max_interp_gap_s: f64,
}

impl Default for CountsConfig {
    fn default() -> Self {
        CountsConfig {
            pipeline_hz: 30.0,
            band_lo_hz: 0.29,
            band_hi_hz: 1.63,
            clip_g: 2.13,
            dead_band_g: 0.068,
            count_unit_g: 1.0 / 128.0,
            decimated_hz: 10.0,
            epoch_s: 60.0,
            max_interp_gap_s: 1.0,
        }
    }
}

/// Which acceleration channel a counts series came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountAxis {
    X,
    Y,
    Z,
    VectorMagnitude,
}

/// Per-minute integer activity counts for one axis.
#[derive(Debug, Clone)]
pub struct CountsSeries {
    pub series: EpochSeries,
    pub axis: CountAxis,
}

/// One second-order IIR section in transposed direct form II.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// Internal state equal to the steady-state response to a constant
    /// input, so a constant stream produces no start-up transient.
    fn steady_state(&self, input_level: f64) -> (f64, f64) {
        let y = input_level * self.dc_gain();
        let s2 = self.b2 * input_level - self.a2 * y;
        let s1 = self.b1 * input_level - self.a1 * y + s2;
        (s1, s2)
    }

    fn gain_at(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        (self.b0 + self.b1 * z1 + self.b2 * z2) / (Complex64::new(1.0, 0.0) + self.a1 * z1 + self.a2 * z2)
    }
}

/// Order-4 Butterworth band-pass as a cascade of two biquads.
#[derive(Debug, Clone)]
pub(crate) struct BandPass {
    sections: Vec<Biquad>,
}

impl BandPass {
    /// Designs the filter by the bilinear transform of an order-2 analog
    /// Butterworth low-pass mapped to a band-pass, with edge prewarping.
    pub(crate) fn design(lo_hz: f64, hi_hz: f64, fs: f64) -> Result<BandPass> {
        if !(0.0 < lo_hz && lo_hz < hi_hz && hi_hz < fs / 2.0) {
            return Err(Error::InvalidArgument(format!(
                "band-pass edges ({lo_hz}, {hi_hz}) invalid for fs {fs}"
            )));
        }
        let fs2 = 2.0 * fs;
        let w1 = fs2 * (std::f64::consts::PI * lo_hz / fs).tan();
        let w2 = fs2 * (std::f64::consts::PI * hi_hz / fs).tan();
        let w0sq = w1 * w2;
        let bw = w2 - w1;

        // Upper-half-plane prototype pole of the order-2 Butterworth LP.
        let proto = Complex64::from_polar(1.0, 3.0 * std::f64::consts::PI / 4.0);
        // Low-pass -> band-pass: s^2 - p*bw*s + w0^2 = 0.
        let pb = proto * bw;
        let disc = (pb * pb - 4.0 * w0sq).sqrt();
        let poles_analog = [(pb + disc) / 2.0, (pb - disc) / 2.0];

        let mut sections = Vec::with_capacity(2);
        for s in poles_analog {
            let z = (fs2 + s) / (fs2 - s);
            sections.push(Biquad {
                b0: 1.0,
                b1: 0.0,
                b2: -1.0,
                a1: -2.0 * z.re,
                a2: z.norm_sqr(),
            });
        }

        // Unity gain at the (prewarped) center frequency.
        let omega0 = 2.0 * (w0sq.sqrt() / fs2).atan();
        let mut filt = BandPass { sections };
        let g = filt.gain_at(omega0).norm();
        filt.sections[0].b0 /= g;
        filt.sections[0].b2 /= g;
        Ok(filt)
    }

    pub(crate) fn gain_at(&self, omega: f64) -> Complex64 {
        self.sections
            .iter()
            .map(|s| s.gain_at(omega))
            .product()
    }

    /// Filters a contiguous segment in place, initializing each section to
    /// its constant-input steady state for the segment's first sample.
    pub(crate) fn apply(&self, samples: &mut [f64]) {
        if samples.is_empty() {
            return;
        }
        let mut level = samples[0];
        for sec in &self.sections {
            let (mut s1, mut s2) = sec.steady_state(level);
            for x in samples.iter_mut() {
                let input = *x;
                let y = sec.b0 * input + s1;
                s1 = sec.b1 * input - sec.a1 * y + s2;
                s2 = sec.b2 * input - sec.a2 * y;
                *x = y;
            }
            level *= sec.dc_gain();
        }
    }
}

/// Linearly resamples acceleration onto a uniform grid at `target_hz`.
///
/// Grid points that fall strictly inside a timestamp gap wider than the
/// configured interpolation limit are omitted, so gaps propagate instead of
/// being invented; downstream minutes covering those holes become invalid.
pub fn resample_accel(s: &SampleSeries, target_hz: f64) -> Result<SampleSeries> {
    resample_accel_with(s, target_hz, CountsConfig::default().max_interp_gap_s)
}

pub fn resample_accel_with(s: &SampleSeries, target_hz: f64, max_gap_s: f64) -> Result<SampleSeries> {
    if target_hz <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "target rate must be positive, got {target_hz}"
        )));
    }
    if s.len() < 2 {
        return Err(Error::InsufficientData(
            "resample_accel requires >= 2 samples".into(),
        ));
    }
    let (t0, t_last) = s.span();
    let dt = 1.0 / target_hz;
    let n_out = ((t_last - t0) / dt).floor() as usize + 1;
    let mut timestamps = Vec::with_capacity(n_out);
    let mut values = Vec::with_capacity(n_out);
    let mut i = 0usize;
    for k in 0..n_out {
        let t = t0 + k as f64 * dt;
        while i + 1 < s.len() && s.timestamps[i + 1] < t {
            i += 1;
        }
        let (ta, tb) = (s.timestamps[i], s.timestamps[i + 1]);
        debug_assert!(ta <= t + 1e-9 && t <= tb + 1e-9);
        if tb - ta > max_gap_s && t > ta && t < tb {
            continue; // inside a gap
        }
        let w = if tb > ta { (t - ta) / (tb - ta) } else { 0.0 };
        timestamps.push(t);
        values.push(s.values[i] * (1.0 - w) + s.values[i + 1] * w);
    }
    SampleSeries::new(s.kind, timestamps, values, Some(target_hz), None)
}

fn axis_of(kind: SignalKind) -> Result<CountAxis> {
    match kind {
        SignalKind::AccelX => Ok(CountAxis::X),
        SignalKind::AccelY => Ok(CountAxis::Y),
        SignalKind::AccelZ => Ok(CountAxis::Z),
        SignalKind::AccelMag => Ok(CountAxis::VectorMagnitude),
        other => Err(Error::InvalidArgument(format!(
            "activity counts need acceleration, got {}",
            other.name()
        ))),
    }
}

/// Computes per-minute activity counts for one acceleration axis.
///
/// The input must already be on the 30 Hz pipeline grid (see
/// [`resample_accel`]); anything else is rejected. A minute is valid only if
/// every expected 30 Hz slot inside it is present.
pub fn activity_counts(s: &SampleSeries) -> Result<CountsSeries> {
    activity_counts_with(s, &CountsConfig::default())
}

pub fn activity_counts_with(s: &SampleSeries, cfg: &CountsConfig) -> Result<CountsSeries> {
    let axis = axis_of(s.kind)?;
    let rate_ok = s
        .nominal_rate
        .is_some_and(|r| (r - cfg.pipeline_hz).abs() < 0.01);
    if !rate_ok {
        return Err(Error::InvalidArgument(format!(
            "activity counts expect a {} Hz stream; call resample_accel first (got {:?} Hz)",
            cfg.pipeline_hz, s.nominal_rate
        )));
    }
    if s.is_empty() {
        return Err(Error::InsufficientData("empty acceleration stream".into()));
    }

    let dt = 1.0 / cfg.pipeline_hz;
    let filter = BandPass::design(cfg.band_lo_hz, cfg.band_hi_hz, cfg.pipeline_hz)?;
    let dec = (cfg.pipeline_hz / cfg.decimated_hz).round() as usize;
    let slots_per_epoch = (cfg.epoch_s * cfg.pipeline_hz).round() as usize;

    let (t0, t_last) = s.span();
    let first_epoch = (t0 / cfg.epoch_s).floor() as i64;
    let last_epoch = (t_last / cfg.epoch_s).floor() as i64;
    let n_epochs = (last_epoch - first_epoch + 1) as usize;
    let mut sums = vec![0.0f64; n_epochs];
    let mut slot_counts = vec![0usize; n_epochs];

    // Process each contiguous segment independently; the filter never sees
    // data across a gap.
    let mut seg_start = 0usize;
    for i in 0..s.len() {
        let is_last = i + 1 == s.len();
        let breaks = !is_last && s.timestamps[i + 1] - s.timestamps[i] > dt * 1.5;
        if is_last || breaks {
            let seg = seg_start..=i;
            process_segment(
                &s.timestamps[seg.clone()],
                &s.values[seg],
                cfg,
                &filter,
                dec,
                first_epoch,
                &mut sums,
                &mut slot_counts,
            );
            seg_start = i + 1;
        }
    }

    let start = first_epoch as f64 * cfg.epoch_s;
    let mut values = vec![f64::NAN; n_epochs];
    let mut valid = vec![false; n_epochs];
    for e in 0..n_epochs {
        if slot_counts[e] == slots_per_epoch {
            values[e] = sums[e].round();
            valid[e] = true;
        }
    }
    Ok(CountsSeries {
        series: EpochSeries::new(start, cfg.epoch_s, values, valid)?,
        axis,
    })
}

#[allow(clippy::too_many_arguments)]
fn process_segment(
    timestamps: &[f64],
    values: &[f64],
    cfg: &CountsConfig,
    filter: &BandPass,
    dec: usize,
    first_epoch: i64,
    sums: &mut [f64],
    slot_counts: &mut [usize],
) {
    let mut buf = values.to_vec();
    filter.apply(&mut buf);
    let inv_unit = 1.0 / cfg.count_unit_g;
    for v in buf.iter_mut() {
        let r = v.abs().min(cfg.clip_g);
        let r = if r < cfg.dead_band_g { 0.0 } else { r };
        *v = (r * inv_unit).floor(); // count units
    }
    for t in timestamps {
        let e = ((t / cfg.epoch_s).floor() as i64 - first_epoch) as usize;
        slot_counts[e] += 1;
    }
    // Decimate by averaging and accumulate into the minute of the chunk start.
    let mut j = 0usize;
    while j + dec <= buf.len() {
        let chunk_mean = buf[j..j + dec].iter().sum::<f64>() / dec as f64;
        let e = ((timestamps[j] / cfg.epoch_s).floor() as i64 - first_epoch) as usize;
        sums[e] += chunk_mean;
        j += dec;
    }
}

/// Combines per-axis counts into a vector-magnitude stream:
/// round(sqrt(x² + y² + z²)) per epoch, invalid when any axis is invalid.
pub fn vector_magnitude(
    x: &CountsSeries,
    y: &CountsSeries,
    z: &CountsSeries,
) -> Result<CountsSeries> {
    let (sx, sy, sz) = (&x.series, &y.series, &z.series);
    let same_grid = sx.start == sy.start
        && sy.start == sz.start
        && sx.epoch_len == sy.epoch_len
        && sy.epoch_len == sz.epoch_len
        && sx.len() == sy.len()
        && sy.len() == sz.len();
    if !same_grid {
        return Err(Error::GridMismatch(
            "count axes are on different epoch grids".into(),
        ));
    }
    let n = sx.len();
    let mut values = vec![f64::NAN; n];
    let mut valid = vec![false; n];
    for i in 0..n {
        if let (Some(a), Some(b), Some(c)) = (sx.value(i), sy.value(i), sz.value(i)) {
            values[i] = (a * a + b * b + c * c).sqrt().round();
            valid[i] = true;
        }
    }
    Ok(CountsSeries {
        series: EpochSeries::new(sx.start, sx.epoch_len, values, valid)?,
        axis: CountAxis::VectorMagnitude,
    })
}
