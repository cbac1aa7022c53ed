//! Raw-signal ingestion: CSV parsing, quality gating, outlier exclusion,
//! non-wear detection, multi-device alignment, epoch aggregation,
//! normalization and miss-rate accounting.
//!
//! All epoch grids are anchored to multiples of the epoch length on the Unix
//! time axis, so independently aggregated signals land on compatible grids.

use std::path::Path;

use crate::error::{Error, Result};
use crate::series::{EpochSeries, NonwearReason, SampleSeries, SignalKind, WearInterval, WearMask};

/// Result of parsing one signal file.
#[derive(Debug, Clone)]
pub struct LoadedSignal {
    pub series: SampleSeries,
    /// 1-based line numbers of rows that failed to parse and were skipped.
    pub dropped_lines: Vec<u64>,
    /// Rows discarded because an earlier row had the same timestamp.
    pub duplicate_rows: usize,
}

/// Non-wear detection parameters. Defaults follow standard actigraphy
/// heuristics and are overridable through the run configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct NonwearConfig {
    /// Rolling window length in seconds over which motion is assessed.
    pub window_s: f64,
    /// Vector-magnitude standard deviation below which a window counts as
    /// motionless, in g.
    pub std_threshold_g: f64,
    /// Minimum timestamp gap flagged as a charging interval, in seconds.
    pub gap_min_s: f64,
}

impl Default for NonwearConfig {
    fn default() -> Self {
        NonwearConfig {
            window_s: 1800.0,
            std_threshold_g: 0.013,
            gap_min_s: 300.0,
        }
    }
}

/// How samples are combined within an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agg {
    Mean,
    Sum,
}

fn expected_header(kind: SignalKind) -> Result<&'static str> {
    match kind {
        SignalKind::AccelX | SignalKind::AccelY | SignalKind::AccelZ => {
            Ok("t_unix_ms,x_g,y_g,z_g")
        }
        SignalKind::Rri => Ok("t_unix_ms,rri_ms"),
        SignalKind::Hr => Ok("t_unix_ms,bpm"),
        SignalKind::Cbt | SignalKind::SkinT => Ok("t_unix_ms,cbt_c,skin_c,quality"),
        SignalKind::AccelMag => Err(Error::InvalidArgument(
            "accel_mag is derived, not parsed from CSV".into(),
        )),
    }
}

/// Column index of the value for `kind` within its CSV schema.
fn value_column(kind: SignalKind) -> usize {
    match kind {
        SignalKind::AccelX | SignalKind::Rri | SignalKind::Hr | SignalKind::Cbt => 1,
        SignalKind::AccelY | SignalKind::SkinT => 2,
        SignalKind::AccelZ => 3,
        SignalKind::AccelMag => unreachable!(),
    }
}

/// Parses one signal channel from a CSV file.
///
/// Rows that fail to parse are skipped and reported with their line numbers;
/// duplicate timestamps keep the first occurrence. A wrong header, an empty
/// file, or a file where every row fails is a hard error. The nominal rate is
/// estimated from the median timestamp delta for regularly sampled signals
/// and left unset for event-based ones (RRI, HR).
pub fn load_signal(path: impl AsRef<Path>, kind: SignalKind) -> Result<LoadedSignal> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let want_header = expected_header(kind)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(
                &path_str,
                std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
            ),
            _ => Error::MalformedRow {
                path: path_str.clone(),
                line: 1,
                msg: e.to_string(),
            },
        })?;

    let got_header = reader
        .headers()
        .map_err(|e| Error::MalformedRow {
            path: path_str.clone(),
            line: 1,
            msg: e.to_string(),
        })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if got_header != want_header {
        return Err(Error::HeaderMismatch {
            path: path_str,
            expected: want_header.to_string(),
            found: got_header,
        });
    }

    let n_cols = want_header.split(',').count();
    let col = value_column(kind);
    let mut rows: Vec<(f64, f64, u8)> = Vec::new();
    let mut dropped_lines = Vec::new();
    let mut saw_rows = false;
    for (idx, record) in reader.records().enumerate() {
        let line = idx as u64 + 2; // header is line 1
        saw_rows = true;
        let parsed = record
            .map_err(|e| e.to_string())
            .and_then(|rec| parse_row(&rec, n_cols, col, kind));
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) => dropped_lines.push(line),
        }
    }
    if !saw_rows {
        return Err(Error::EmptyFile { path: path_str });
    }
    if rows.is_empty() {
        return Err(Error::MalformedRow {
            path: path_str,
            line: dropped_lines[0],
            msg: "no parsable data rows".into(),
        });
    }

    // Stable sort + first-occurrence dedup.
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let before = rows.len();
    rows.dedup_by(|next, first| next.0 == first.0);
    let duplicate_rows = before - rows.len();

    let timestamps: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let values: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let quality = if kind.has_quality() {
        Some(rows.iter().map(|r| r.2).collect())
    } else {
        None
    };
    let nominal_rate = match kind {
        SignalKind::Rri | SignalKind::Hr => None,
        _ => estimate_rate(&timestamps),
    };
    let series = SampleSeries::new(kind, timestamps, values, nominal_rate, quality)?;
    Ok(LoadedSignal {
        series,
        dropped_lines,
        duplicate_rows,
    })
}

fn parse_row(
    rec: &csv::StringRecord,
    n_cols: usize,
    col: usize,
    kind: SignalKind,
) -> std::result::Result<(f64, f64, u8), String> {
    if rec.len() != n_cols {
        return Err(format!("expected {n_cols} fields, got {}", rec.len()));
    }
    let t_ms: i64 = rec[0].parse().map_err(|e| format!("timestamp: {e}"))?;
    let value: f64 = rec[col].parse().map_err(|e| format!("value: {e}"))?;
    if !value.is_finite() {
        return Err("non-finite value".into());
    }
    let quality = if kind.has_quality() {
        let q: u8 = rec[3].parse().map_err(|e| format!("quality: {e}"))?;
        if !(1..=4).contains(&q) {
            return Err(format!("quality {q} outside 1..=4"));
        }
        q
    } else {
        0
    };
    Ok((t_ms as f64 / 1000.0, value, quality))
}

fn estimate_rate(timestamps: &[f64]) -> Option<f64> {
    if timestamps.len() < 2 {
        return None;
    }
    let mut deltas: Vec<f64> = timestamps.windows(2).map(|w| w[1] - w[0]).collect();
    deltas.sort_by(f64::total_cmp);
    let median = deltas[deltas.len() / 2];
    if median > 0.0 {
        Some(1.0 / median)
    } else {
        None
    }
}

/// Keeps only samples with quality >= `min_score`. Errors when the signal
/// carries no quality channel.
pub fn filter_quality(s: &SampleSeries, min_score: u8) -> Result<SampleSeries> {
    let quality = s.quality.as_ref().ok_or(Error::MissingQuality {
        signal: s.kind.name(),
    })?;
    let keep: Vec<bool> = quality.iter().map(|q| *q >= min_score).collect();
    let timestamps = filter_by(&s.timestamps, &keep);
    let values = filter_by(&s.values, &keep);
    let q = quality
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(q, _)| *q)
        .collect();
    SampleSeries::new(s.kind, timestamps, values, s.nominal_rate, Some(q))
}

fn filter_by<T: Copy>(xs: &[T], keep: &[bool]) -> Vec<T> {
    xs.iter()
        .zip(keep)
        .filter(|(_, k)| **k)
        .map(|(x, _)| *x)
        .collect()
}

/// Drops samples outside the physiological bounds for the signal kind,
/// returning the cleaned series and the number of samples removed.
/// Signals without defined bounds pass through unchanged.
pub fn apply_physio_bounds(s: &SampleSeries) -> Result<(SampleSeries, usize)> {
    let Some((lo, hi)) = s.kind.physio_bounds() else {
        return Ok((s.clone(), 0));
    };
    let keep: Vec<bool> = s.values.iter().map(|v| (lo..=hi).contains(v)).collect();
    let removed = keep.iter().filter(|k| !**k).count();
    let timestamps = filter_by(&s.timestamps, &keep);
    let values = filter_by(&s.values, &keep);
    let quality = s.quality.as_ref().map(|q| filter_by(q, &keep));
    Ok((
        SampleSeries::new(s.kind, timestamps, values, s.nominal_rate, quality)?,
        removed,
    ))
}

/// Merges tri-axial acceleration into a vector-magnitude series. The three
/// axes must share identical timestamps.
pub fn accel_magnitude(
    x: &SampleSeries,
    y: &SampleSeries,
    z: &SampleSeries,
) -> Result<SampleSeries> {
    if x.timestamps != y.timestamps || x.timestamps != z.timestamps {
        return Err(Error::GridMismatch(
            "acceleration axes have different timestamps".into(),
        ));
    }
    let values: Vec<f64> = (0..x.len())
        .map(|i| (x.values[i].powi(2) + y.values[i].powi(2) + z.values[i].powi(2)).sqrt())
        .collect();
    SampleSeries::new(
        SignalKind::AccelMag,
        x.timestamps.clone(),
        values,
        x.nominal_rate,
        None,
    )
}

/// Detects non-wear periods on a vector-magnitude acceleration stream.
///
/// Windows of `window_s` whose sample standard deviation stays below
/// `std_threshold_g` are flagged `zero_motion` (the window slides in
/// 60-second steps; overlapping flagged windows merge, so any motionless
/// stretch of at least one window length is covered). Timestamp gaps of at
/// least `gap_min_s` are flagged `charging`.
pub fn detect_nonwear(accel: &SampleSeries, config: &NonwearConfig) -> Result<WearMask> {
    if accel.kind != SignalKind::AccelMag {
        return Err(Error::InvalidArgument(
            "detect_nonwear expects a vector-magnitude acceleration series".into(),
        ));
    }
    if config.window_s < 60.0 {
        return Err(Error::InvalidArgument(format!(
            "non-wear window must be >= 60 s, got {}",
            config.window_s
        )));
    }
    let mut intervals: Vec<WearInterval> = Vec::new();
    if accel.len() < 2 {
        return WearMask::from_intervals(intervals);
    }

    // Charging: gaps in the timestamp stream.
    for w in accel.timestamps.windows(2) {
        if w[1] - w[0] >= config.gap_min_s {
            intervals.push(WearInterval {
                start: w[0],
                end: w[1],
                reason: NonwearReason::Charging,
            });
        }
    }

    // Zero motion: sliding-window standard deviation below threshold.
    let (t0, t_last) = accel.span();
    let step = 60.0;
    let mut lo = 0usize;
    let mut hi = 0usize;
    let n_steps = ((t_last - t0 - config.window_s) / step).floor() as i64;
    let mut current: Option<(f64, f64)> = None;
    for k in 0..=n_steps.max(-1) {
        let w_start = t0 + k as f64 * step;
        let w_end = w_start + config.window_s;
        while lo < accel.len() && accel.timestamps[lo] < w_start {
            lo += 1;
        }
        if hi < lo {
            hi = lo;
        }
        while hi < accel.len() && accel.timestamps[hi] < w_end {
            hi += 1;
        }
        let window = &accel.values[lo..hi];
        // Sparse windows carry too little evidence to call non-wear.
        if window.len() < 30 {
            current = take_interval(&mut intervals, current);
            continue;
        }
        let sd = crate::stats::sample_var(window).sqrt();
        if sd < config.std_threshold_g {
            current = match current {
                Some((s, _)) => Some((s, w_end)),
                None => Some((w_start, w_end)),
            };
        } else {
            current = take_interval(&mut intervals, current);
        }
    }
    take_interval(&mut intervals, current);
    WearMask::from_intervals(intervals)
}

fn take_interval(
    intervals: &mut Vec<WearInterval>,
    current: Option<(f64, f64)>,
) -> Option<(f64, f64)> {
    if let Some((start, end)) = current {
        intervals.push(WearInterval {
            start,
            end,
            reason: NonwearReason::ZeroMotion,
        });
    }
    None
}

/// Outcome of aligning two epoch series.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct AlignReport {
    /// Epochs on the shared grid.
    pub n_epochs: usize,
    /// Epochs valid in the aligned outputs.
    pub n_valid: usize,
    /// Fraction of shared-grid epochs invalid in the outputs.
    pub fraction_removed: f64,
    /// Fraction invalidated by mask intervals (among epochs valid in both).
    pub fraction_masked: f64,
    /// Fraction valid in exactly one input.
    pub fraction_single: f64,
}

/// Restricts two epoch series to their shared grid and intersects validity:
/// an output epoch is valid iff it is valid in both inputs and intersects no
/// mask interval.
pub fn align_series(
    a: &EpochSeries,
    b: &EpochSeries,
    masks: &[&WearMask],
) -> Result<(EpochSeries, EpochSeries, AlignReport)> {
    if !a.grid_compatible(b) {
        return Err(Error::GridMismatch(format!(
            "epoch_len {} vs {} or misaligned starts",
            a.epoch_len, b.epoch_len
        )));
    }
    let len = a.epoch_len;
    let start = a.start.max(b.start);
    let end = a.end().min(b.end());
    if end <= start {
        return Err(Error::NoOverlap);
    }
    let n = ((end - start) / len).round() as usize;
    let mut va = Vec::with_capacity(n);
    let mut vb = Vec::with_capacity(n);
    let mut ok = Vec::with_capacity(n);
    let mut n_valid = 0usize;
    let mut n_masked = 0usize;
    let mut n_single = 0usize;
    for i in 0..n {
        let e_start = start + i as f64 * len;
        let ia = ((e_start - a.start) / len).round() as usize;
        let ib = ((e_start - b.start) / len).round() as usize;
        let a_val = a.value(ia);
        let b_val = b.value(ib);
        let both = a_val.is_some() && b_val.is_some();
        if a_val.is_some() != b_val.is_some() {
            n_single += 1;
        }
        let masked = masks.iter().any(|m| m.overlaps(e_start, e_start + len));
        let valid = both && !masked;
        if both && masked {
            n_masked += 1;
        }
        if valid {
            n_valid += 1;
        }
        va.push(if valid { a_val.unwrap() } else { f64::NAN });
        vb.push(if valid { b_val.unwrap() } else { f64::NAN });
        ok.push(valid);
    }
    let report = AlignReport {
        n_epochs: n,
        n_valid,
        fraction_removed: 1.0 - n_valid as f64 / n as f64,
        fraction_masked: n_masked as f64 / n as f64,
        fraction_single: n_single as f64 / n as f64,
    };
    Ok((
        EpochSeries::new(start, len, va, ok.clone())?,
        EpochSeries::new(start, len, vb, ok)?,
        report,
    ))
}

/// Applies mask intervals to an epoch series: epochs intersecting any masked
/// interval become invalid.
pub fn apply_mask(s: &EpochSeries, masks: &[&WearMask]) -> EpochSeries {
    let mut out = s.clone();
    for i in 0..s.len() {
        let e_start = s.epoch_start(i);
        if masks
            .iter()
            .any(|m| m.overlaps(e_start, e_start + s.epoch_len))
        {
            out.invalidate(i);
        }
    }
    out
}

/// Aggregates raw samples into uniform epochs anchored at multiples of
/// `epoch_len` on the Unix time axis. Epochs without samples are invalid.
pub fn epoch_aggregate(s: &SampleSeries, epoch_len: f64, agg: Agg) -> Result<EpochSeries> {
    if epoch_len <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "epoch_len must be positive, got {epoch_len}"
        )));
    }
    if s.is_empty() {
        return Err(Error::InsufficientData("no samples to aggregate".into()));
    }
    let (t0, t_last) = s.span();
    let first = (t0 / epoch_len).floor() as i64;
    let last = (t_last / epoch_len).floor() as i64;
    let n = (last - first + 1) as usize;
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for (t, v) in s.timestamps.iter().zip(&s.values) {
        let idx = ((t / epoch_len).floor() as i64 - first) as usize;
        sums[idx] += v;
        counts[idx] += 1;
    }
    let start = first as f64 * epoch_len;
    let mut values = vec![f64::NAN; n];
    let mut valid = vec![false; n];
    for i in 0..n {
        if counts[i] > 0 {
            valid[i] = true;
            values[i] = match agg {
                Agg::Mean => sums[i] / counts[i] as f64,
                Agg::Sum => sums[i],
            };
        }
    }
    EpochSeries::new(start, epoch_len, values, valid)
}

/// Re-bins an epoch series into longer epochs; `epoch_len` must be an
/// integral multiple of the source resolution. Aggregation runs over valid
/// source epochs only; targets with no valid source are invalid.
pub fn rebin_epochs(s: &EpochSeries, epoch_len: f64, agg: Agg) -> Result<EpochSeries> {
    if epoch_len <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "epoch_len must be positive, got {epoch_len}"
        )));
    }
    let ratio = epoch_len / s.epoch_len;
    if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
        return Err(Error::GridMismatch(format!(
            "target epoch_len {} is not a multiple of source {}",
            epoch_len, s.epoch_len
        )));
    }
    if s.is_empty() {
        return Err(Error::InsufficientData("empty epoch series".into()));
    }
    let first = (s.start / epoch_len).floor() as i64;
    let last = ((s.end() - s.epoch_len) / epoch_len).floor() as i64;
    let n = (last - first + 1) as usize;
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for (i, v) in s.valid_values() {
        let t = s.epoch_start(i);
        let idx = ((t / epoch_len).floor() as i64 - first) as usize;
        sums[idx] += v;
        counts[idx] += 1;
    }
    let start = first as f64 * epoch_len;
    let mut values = vec![f64::NAN; n];
    let mut valid = vec![false; n];
    for i in 0..n {
        if counts[i] > 0 {
            valid[i] = true;
            values[i] = match agg {
                Agg::Mean => sums[i] / counts[i] as f64,
                Agg::Sum => sums[i],
            };
        }
    }
    EpochSeries::new(start, epoch_len, values, valid)
}

/// Min-Max normalizes valid epochs to [0, 1] over the whole series.
/// Invalid epochs are untouched; a constant series is an error.
pub fn minmax_normalize(s: &EpochSeries) -> Result<EpochSeries> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (_, v) in s.valid_values() {
        min = min.min(v);
        max = max.max(v);
    }
    if !min.is_finite() || !max.is_finite() {
        return Err(Error::InsufficientData(
            "minmax_normalize: no valid epochs".into(),
        ));
    }
    if max - min <= 0.0 {
        return Err(Error::ConstantSeries(
            "minmax_normalize undefined for a constant series".into(),
        ));
    }
    let scale = 1.0 / (max - min);
    let mut out = s.clone();
    for i in 0..s.len() {
        if let Some(v) = s.value(i) {
            out.set(i, (v - min) * scale);
        }
    }
    Ok(out)
}

/// Fraction of expected epochs in `[start, end)` that are missing or
/// invalid. Expected epochs lie on the series' grid; grid slots outside the
/// stored range count as missing.
pub fn miss_rate(s: &EpochSeries, start: f64, end: f64) -> Result<f64> {
    if end <= start {
        return Err(Error::InvalidArgument(
            "miss_rate: end must be after start".into(),
        ));
    }
    let len = s.epoch_len;
    // First grid slot whose start is >= start.
    let first = ((start - s.start) / len).ceil() as i64;
    // Last grid slot whose start is < end.
    let last = ((end - s.start) / len).ceil() as i64 - 1;
    if last < first {
        return Ok(0.0);
    }
    let expected = (last - first + 1) as f64;
    let mut present = 0usize;
    for k in first..=last {
        if k >= 0 && (k as usize) < s.len() && s.is_valid(k as usize) {
            present += 1;
        }
    }
    Ok((expected - present as f64) / expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_accel_three_rows_at_25hz() {
        let f = write_csv("t_unix_ms,x_g,y_g,z_g\n0,0.1,0.2,1.0\n40,0.2,0.2,1.0\n80,0.3,0.2,1.0\n");
        let loaded = load_signal(f.path(), SignalKind::AccelX).unwrap();
        assert_eq!(loaded.series.len(), 3);
        assert_eq!(loaded.series.values, vec![0.1, 0.2, 0.3]);
        assert!((loaded.series.nominal_rate.unwrap() - 25.0).abs() < 1e-9);
        assert!(loaded.dropped_lines.is_empty());

        let y = load_signal(f.path(), SignalKind::AccelY).unwrap();
        assert_eq!(y.series.values, vec![0.2, 0.2, 0.2]);
    }

    #[test]
    fn load_skips_and_reports_bad_rows() {
        let mut content = String::from("t_unix_ms,rri_ms\n");
        for i in 0..100 {
            if i == 41 {
                content.push_str("oops,not-a-number\n");
            } else {
                content.push_str(&format!("{},800\n", i * 800));
            }
        }
        let f = write_csv(&content);
        let loaded = load_signal(f.path(), SignalKind::Rri).unwrap();
        assert_eq!(loaded.series.len(), 99);
        assert_eq!(loaded.dropped_lines, vec![43]); // header line + 1-based + 41st row
    }

    #[test]
    fn load_temperature_populates_quality() {
        let f = write_csv("t_unix_ms,cbt_c,skin_c,quality\n0,36.9,33.1,4\n60000,37.0,33.0,2\n");
        let cbt = load_signal(f.path(), SignalKind::Cbt).unwrap();
        assert_eq!(cbt.series.quality, Some(vec![4, 2]));
        assert_eq!(cbt.series.values, vec![36.9, 37.0]);
        let skin = load_signal(f.path(), SignalKind::SkinT).unwrap();
        assert_eq!(skin.series.values, vec![33.1, 33.0]);
    }

    #[test]
    fn load_rejects_empty_and_bad_header() {
        let f = write_csv("t_unix_ms,bpm\n");
        assert!(matches!(
            load_signal(f.path(), SignalKind::Hr),
            Err(Error::EmptyFile { .. })
        ));
        let f = write_csv("time,bpm\n0,60\n");
        assert!(matches!(
            load_signal(f.path(), SignalKind::Hr),
            Err(Error::HeaderMismatch { .. })
        ));
    }

    #[test]
    fn load_collapses_duplicate_timestamps_keeping_first() {
        let f = write_csv("t_unix_ms,bpm\n0,60\n1000,61\n1000,99\n2000,62\n");
        let loaded = load_signal(f.path(), SignalKind::Hr).unwrap();
        assert_eq!(loaded.series.values, vec![60.0, 61.0, 62.0]);
        assert_eq!(loaded.duplicate_rows, 1);
    }

    fn temp_series(qualities: &[u8]) -> SampleSeries {
        let n = qualities.len();
        SampleSeries::new(
            SignalKind::Cbt,
            (0..n).map(|i| i as f64 * 60.0).collect(),
            (0..n).map(|i| 36.5 + 0.01 * i as f64).collect(),
            Some(1.0 / 60.0),
            Some(qualities.to_vec()),
        )
        .unwrap()
    }

    #[test]
    fn filter_quality_thresholds() {
        let s = temp_series(&[1, 2, 3, 4]);
        let kept = filter_quality(&s, 2).unwrap();
        assert_eq!(kept.len(), 3);
        assert_eq!(kept.timestamps, vec![60.0, 120.0, 180.0]);

        let all4 = temp_series(&[4, 4, 4]);
        assert_eq!(filter_quality(&all4, 2).unwrap().len(), 3);

        let all1 = temp_series(&[1, 1, 1]);
        assert_eq!(filter_quality(&all1, 2).unwrap().len(), 0);

        let hr = SampleSeries::new(SignalKind::Hr, vec![0.0], vec![60.0], None, None).unwrap();
        assert!(matches!(
            filter_quality(&hr, 2),
            Err(Error::MissingQuality { .. })
        ));
    }

    #[test]
    fn physio_bounds_drop_outliers() {
        let s = SampleSeries::new(
            SignalKind::Hr,
            vec![0.0, 1.0, 2.0, 3.0],
            vec![60.0, 10.0, 250.0, 72.0],
            None,
            None,
        )
        .unwrap();
        let (clean, removed) = apply_physio_bounds(&s).unwrap();
        assert_eq!(removed, 2);
        assert_eq!(clean.values, vec![60.0, 72.0]);
    }

    fn const_mag_series(n_minutes: usize, hz: f64, value: f64) -> SampleSeries {
        let n = (n_minutes as f64 * 60.0 * hz) as usize;
        SampleSeries::new(
            SignalKind::AccelMag,
            (0..n).map(|i| i as f64 / hz).collect(),
            vec![value; n],
            Some(hz),
            None,
        )
        .unwrap()
    }

    #[test]
    fn nonwear_flags_motionless_stretch() {
        let s = const_mag_series(45, 1.0, 1.0);
        let cfg = NonwearConfig::default();
        let mask = detect_nonwear(&s, &cfg).unwrap();
        assert_eq!(mask.intervals().len(), 1);
        let iv = mask.intervals()[0];
        assert_eq!(iv.reason, NonwearReason::ZeroMotion);
        assert!(iv.start <= 1.0);
        assert!(iv.end >= 44.0 * 60.0);
    }

    #[test]
    fn nonwear_ignores_shaken_signal() {
        let n = 3600usize;
        let values: Vec<f64> = (0..n).map(|i| 1.0 + 0.3 * (i as f64 * 0.7).sin()).collect();
        let s = SampleSeries::new(
            SignalKind::AccelMag,
            (0..n).map(|i| i as f64).collect(),
            values,
            Some(1.0),
            None,
        )
        .unwrap();
        let mask = detect_nonwear(&s, &NonwearConfig::default()).unwrap();
        assert!(mask.is_empty());
    }

    #[test]
    fn nonwear_flags_charging_gap_exactly() {
        // 10 min of data, a 90-minute gap, 40 more minutes of data.
        let mut ts = Vec::new();
        let mut vals = Vec::new();
        for i in 0..600 {
            ts.push(i as f64);
            vals.push(1.0 + 0.2 * (i as f64 * 1.3).sin());
        }
        let resume = 600.0 + 90.0 * 60.0;
        for i in 0..2400 {
            ts.push(resume + i as f64);
            vals.push(1.0 + 0.2 * (i as f64 * 1.1).cos());
        }
        let s = SampleSeries::new(SignalKind::AccelMag, ts, vals, Some(1.0), None).unwrap();
        let mask = detect_nonwear(&s, &NonwearConfig::default()).unwrap();
        let charging: Vec<_> = mask
            .intervals()
            .iter()
            .filter(|iv| iv.reason == NonwearReason::Charging)
            .collect();
        assert_eq!(charging.len(), 1);
        assert_eq!(charging[0].start, 599.0);
        assert_eq!(charging[0].end, resume);
        assert!((charging[0].end - charging[0].start - (90.0 * 60.0 + 1.0)).abs() < 1e-9);
    }

    #[test]
    fn align_identity_and_intersection() {
        let a = EpochSeries::from_values(0.0, 600.0, (0..30).map(|i| i as f64).collect());
        let (oa, ob, rep) = align_series(&a, &a, &[]).unwrap();
        assert_eq!(oa.n_valid(), 30);
        assert_eq!(ob.n_valid(), 30);
        assert_eq!(rep.fraction_removed, 0.0);

        let mut b = a.clone();
        for i in 10..20 {
            b.invalidate(i);
        }
        let (oa, ob, rep) = align_series(&a, &b, &[]).unwrap();
        for i in 10..20 {
            assert!(!oa.is_valid(i));
            assert!(!ob.is_valid(i));
        }
        assert_eq!(rep.n_valid, 20);
        assert!((rep.fraction_single - 10.0 / 30.0).abs() < 1e-12);
    }

    #[test]
    fn align_mask_epochs_match_interval_arithmetic_oracle() {
        let a = EpochSeries::from_values(0.0, 600.0, (0..30).map(|i| i as f64).collect());
        // Mask covering epochs 5..=8 (3000 s .. 5400 s).
        let mask = WearMask::from_intervals(vec![WearInterval {
            start: 3000.0,
            end: 5400.0,
            reason: NonwearReason::Charging,
        }])
        .unwrap();
        let (oa, _, _) = align_series(&a, &a, &[&mask]).unwrap();
        // Oracle: an epoch [s, s+600) is masked iff s < 5400 && s+600 > 3000.
        for i in 0..30 {
            let s = i as f64 * 600.0;
            let expect_masked = s < 5400.0 && s + 600.0 > 3000.0;
            assert_eq!(oa.is_valid(i), !expect_masked, "epoch {i}");
        }
    }

    #[test]
    fn align_symmetry_of_validity() {
        let mut a = EpochSeries::from_values(0.0, 60.0, (0..50).map(|i| i as f64).collect());
        let mut b =
            EpochSeries::from_values(600.0, 60.0, (0..50).map(|i| i as f64 * 2.0).collect());
        a.invalidate(3);
        a.invalidate(17);
        b.invalidate(5);
        let mask = WearMask::from_intervals(vec![WearInterval {
            start: 1500.0,
            end: 1740.0,
            reason: NonwearReason::ZeroMotion,
        }])
        .unwrap();
        let (oa, _, _) = align_series(&a, &b, &[&mask]).unwrap();
        let (ob2, _, _) = align_series(&b, &a, &[&mask]).unwrap();
        assert_eq!(oa.len(), ob2.len());
        for i in 0..oa.len() {
            assert_eq!(oa.is_valid(i), ob2.is_valid(i));
        }
    }

    #[test]
    fn align_requires_overlap() {
        let a = EpochSeries::from_values(0.0, 60.0, vec![1.0; 10]);
        let b = EpochSeries::from_values(6000.0, 60.0, vec![1.0; 10]);
        assert!(matches!(align_series(&a, &b, &[]), Err(Error::NoOverlap)));
    }

    #[test]
    fn epoch_aggregate_means_match_hand_computation() {
        // 60 per-minute values aggregated into 10-minute means.
        let s = SampleSeries::new(
            SignalKind::Hr,
            (0..60).map(|i| i as f64 * 60.0).collect(),
            (0..60).map(|i| i as f64).collect(),
            Some(1.0 / 60.0),
            None,
        )
        .unwrap();
        let e = epoch_aggregate(&s, 600.0, Agg::Mean).unwrap();
        assert_eq!(e.len(), 6);
        for i in 0..6 {
            let expect = (0..10).map(|j| (10 * i + j) as f64).sum::<f64>() / 10.0;
            assert!((e.value(i).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn epoch_aggregate_marks_empty_spans_invalid() {
        let mut ts: Vec<f64> = (0..10).map(|i| i as f64 * 60.0).collect();
        ts.extend((20..30).map(|i| i as f64 * 60.0));
        let s = SampleSeries::new(SignalKind::Hr, ts, vec![70.0; 20], None, None).unwrap();
        let e = epoch_aggregate(&s, 600.0, Agg::Mean).unwrap();
        assert_eq!(e.len(), 3);
        assert!(e.is_valid(0));
        assert!(!e.is_valid(1));
        assert!(e.is_valid(2));
    }

    #[test]
    fn epoch_aggregate_single_bin_sum() {
        let s = SampleSeries::new(
            SignalKind::Hr,
            vec![0.0, 10.0, 20.0],
            vec![1.0, 2.0, 3.0],
            None,
            None,
        )
        .unwrap();
        let e = epoch_aggregate(&s, 86400.0, Agg::Sum).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e.value(0), Some(6.0));
        assert!(epoch_aggregate(&s, 0.0, Agg::Sum).is_err());
    }

    #[test]
    fn epoch_aggregate_mean_of_constant_is_constant() {
        let s = SampleSeries::new(
            SignalKind::Hr,
            (0..600).map(|i| i as f64).collect(),
            vec![7.25; 600],
            Some(1.0),
            None,
        )
        .unwrap();
        let e = epoch_aggregate(&s, 60.0, Agg::Mean).unwrap();
        for (_, v) in e.valid_values() {
            assert_eq!(v, 7.25);
        }
    }

    #[test]
    fn rebin_sum_additivity() {
        let s = EpochSeries::from_values(0.0, 60.0, (0..40).map(|i| i as f64).collect());
        let direct = rebin_epochs(&s, 1200.0, Agg::Sum).unwrap();
        let via =
            rebin_epochs(&rebin_epochs(&s, 600.0, Agg::Sum).unwrap(), 1200.0, Agg::Sum).unwrap();
        assert_eq!(direct.len(), via.len());
        for i in 0..direct.len() {
            assert!((direct.value(i).unwrap() - via.value(i).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn rebin_rejects_non_multiple() {
        let s = EpochSeries::from_values(0.0, 60.0, vec![1.0; 10]);
        assert!(rebin_epochs(&s, 90.0, Agg::Mean).is_err());
    }

    #[test]
    fn invalid_epochs_never_resurrect_downstream() {
        let mut s = EpochSeries::from_values(0.0, 60.0, (0..60).map(|i| i as f64).collect());
        for i in 0..6 {
            s.invalidate(i * 10 + 3);
        }
        let rebinned = rebin_epochs(&s, 600.0, Agg::Mean).unwrap();
        let normalized = minmax_normalize(&rebinned).unwrap();
        // A 10-minute bin with its only samples removed must stay invalid.
        let mut sparse = EpochSeries::from_values(0.0, 60.0, (0..30).map(|i| i as f64).collect());
        for i in 10..20 {
            sparse.invalidate(i);
        }
        let r = rebin_epochs(&sparse, 600.0, Agg::Mean).unwrap();
        assert!(!r.is_valid(1));
        let n = minmax_normalize(&r).unwrap();
        assert!(!n.is_valid(1));
        assert_eq!(normalized.n_valid(), rebinned.n_valid());
    }

    #[test]
    fn minmax_affine_and_invalid_handling() {
        let e = EpochSeries::from_values(0.0, 60.0, vec![2.0, 4.0, 6.0]);
        let n = minmax_normalize(&e).unwrap();
        assert_eq!(
            (0..3).map(|i| n.value(i).unwrap()).collect::<Vec<_>>(),
            vec![0.0, 0.5, 1.0]
        );

        // Already [0,1]: unchanged.
        let e = EpochSeries::from_values(0.0, 60.0, vec![0.0, 0.25, 1.0]);
        let n = minmax_normalize(&e).unwrap();
        assert_eq!(
            (0..3).map(|i| n.value(i).unwrap()).collect::<Vec<_>>(),
            vec![0.0, 0.25, 1.0]
        );

        // Min/max over valid entries only (oracle: recompute excluding invalid).
        let mut e = EpochSeries::from_values(0.0, 60.0, vec![-100.0, 2.0, 4.0, 6.0, 100.0]);
        e.invalidate(0);
        e.invalidate(4);
        let n = minmax_normalize(&e).unwrap();
        assert_eq!(n.value(1), Some(0.0));
        assert_eq!(n.value(2), Some(0.5));
        assert_eq!(n.value(3), Some(1.0));
        assert_eq!(n.value(0), None);

        let constant = EpochSeries::from_values(0.0, 60.0, vec![3.0; 5]);
        assert!(matches!(
            minmax_normalize(&constant),
            Err(Error::ConstantSeries(_))
        ));
    }

    #[test]
    fn minmax_output_in_unit_interval() {
        let vals: Vec<f64> = (0..100).map(|i| ((i * 37) % 41) as f64 - 17.0).collect();
        let e = EpochSeries::from_values(0.0, 60.0, vals);
        let n = minmax_normalize(&e).unwrap();
        let all: Vec<f64> = n.valid_values().map(|(_, v)| v).collect();
        assert!(all.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(all.iter().any(|v| *v == 0.0));
        assert!(all.iter().any(|v| *v == 1.0));
    }

    #[test]
    fn miss_rate_counting() {
        let full = EpochSeries::from_values(0.0, 60.0, vec![1.0; 100]);
        assert_eq!(miss_rate(&full, 0.0, 6000.0).unwrap(), 0.0);

        let mut half = full.clone();
        for i in 0..50 {
            half.invalidate(i * 2);
        }
        assert_eq!(miss_rate(&half, 0.0, 6000.0).unwrap(), 0.5);

        // 14-day minute series missing 2016 minutes: rate 2016/20160 = 0.10.
        let day_min = 1440usize;
        let total = 14 * day_min;
        let mut s = EpochSeries::from_values(0.0, 60.0, vec![1.0; total]);
        for i in 0..2016 {
            s.invalidate(i * 10);
        }
        let rate = miss_rate(&s, 0.0, total as f64 * 60.0).unwrap();
        assert!((rate - 0.10).abs() < 1e-12);
    }

    #[test]
    fn miss_rate_counts_absent_grid_slots() {
        // Series covers only the second half of the collection window.
        let s = EpochSeries::from_values(3000.0, 60.0, vec![1.0; 50]);
        let rate = miss_rate(&s, 0.0, 6000.0).unwrap();
        assert_eq!(rate, 0.5);
        assert!(miss_rate(&s, 10.0, 10.0).is_err());
    }

    #[test]
    fn miss_rate_monotone_in_masking() {
        let base = EpochSeries::from_values(0.0, 60.0, vec![1.0; 200]);
        let mut masked = base.clone();
        let mut prev = miss_rate(&base, 0.0, 12000.0).unwrap();
        for i in 0..200 {
            if i % 3 == 0 {
                masked.invalidate(i);
                let now = miss_rate(&masked, 0.0, 12000.0).unwrap();
                assert!(now >= prev);
                prev = now;
            }
        }
    }
}
