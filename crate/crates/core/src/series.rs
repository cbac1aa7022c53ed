//! Core time-series containers shared by the whole pipeline.
//!
//! Two representations cover every stage:
//! [`SampleSeries`] for raw, possibly irregular sensor samples, and
//! [`EpochSeries`] for uniform-epoch aggregates with an explicit validity
//! mask. Invalid epochs carry a NaN sentinel that is never read; the mask is
//! authoritative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One physical signal channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    AccelX,
    AccelY,
    AccelZ,
    /// Vector magnitude of the three acceleration axes (derived, not parsed).
    AccelMag,
    Rri,
    Hr,
    Cbt,
    SkinT,
}

impl SignalKind {
    /// Temperature channels carry a per-sample quality score 1..=4.
    pub fn has_quality(self) -> bool {
        matches!(self, SignalKind::Cbt | SignalKind::SkinT)
    }

    /// Physiological plausibility bounds used for outlier exclusion.
    /// Samples outside these bounds are dropped during ingest.
    pub fn physio_bounds(self) -> Option<(f64, f64)> {
        match self {
            SignalKind::Hr => Some((25.0, 220.0)),
            SignalKind::Rri => Some((273.0, 2400.0)),
            SignalKind::Cbt => Some((34.0, 42.0)),
            SignalKind::SkinT => Some((20.0, 42.0)),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SignalKind::AccelX => "accel_x",
            SignalKind::AccelY => "accel_y",
            SignalKind::AccelZ => "accel_z",
            SignalKind::AccelMag => "accel_mag",
            SignalKind::Rri => "rri",
            SignalKind::Hr => "hr",
            SignalKind::Cbt => "cbt",
            SignalKind::SkinT => "skin_t",
        }
    }
}

/// Timestamped samples of one signal. Timestamps are seconds since the Unix
/// epoch and strictly increasing; values are finite.
#[derive(Debug, Clone)]
pub struct SampleSeries {
    pub kind: SignalKind,
    pub timestamps: Vec<f64>,
    pub values: Vec<f64>,
    /// Nominal sampling rate in Hz; `None` for event-based signals (RRI).
    pub nominal_rate: Option<f64>,
    /// Per-sample quality 1..=4; present iff `kind.has_quality()`.
    pub quality: Option<Vec<u8>>,
}

impl SampleSeries {
    pub fn new(
        kind: SignalKind,
        timestamps: Vec<f64>,
        values: Vec<f64>,
        nominal_rate: Option<f64>,
        quality: Option<Vec<u8>>,
    ) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::InvalidSeries(format!(
                "{} timestamps vs {} values",
                timestamps.len(),
                values.len()
            )));
        }
        if let Some(q) = &quality {
            if q.len() != values.len() {
                return Err(Error::InvalidSeries("quality length mismatch".into()));
            }
        }
        if kind.has_quality() != quality.is_some() {
            return Err(Error::InvalidSeries(format!(
                "signal {} {} carry quality scores",
                kind.name(),
                if kind.has_quality() { "must" } else { "must not" }
            )));
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSeries(
                "timestamps not strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries("non-finite sample value".into()));
        }
        Ok(SampleSeries {
            kind,
            timestamps,
            values,
            nominal_rate,
            quality,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// (first, last) timestamp; requires a non-empty series.
    pub fn span(&self) -> (f64, f64) {
        (self.timestamps[0], *self.timestamps.last().unwrap())
    }
}

/// Uniform-epoch aggregated signal. Epoch `i` covers
/// `[start + i*epoch_len, start + (i+1)*epoch_len)`.
#[derive(Debug, Clone)]
pub struct EpochSeries {
    pub start: f64,
    pub epoch_len: f64,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl EpochSeries {
    pub fn new(start: f64, epoch_len: f64, values: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        if epoch_len <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "epoch_len must be positive, got {epoch_len}"
            )));
        }
        if values.len() != valid.len() {
            return Err(Error::InvalidSeries(format!(
                "{} values vs {} mask entries",
                values.len(),
                valid.len()
            )));
        }
        if values
            .iter()
            .zip(&valid)
            .any(|(v, ok)| *ok && !v.is_finite())
        {
            return Err(Error::InvalidSeries(
                "valid epoch carries a non-finite value".into(),
            ));
        }
        Ok(EpochSeries {
            start,
            epoch_len,
            values,
            valid,
        })
    }

    /// Builds a fully-valid series from plain values.
    pub fn from_values(start: f64, epoch_len: f64, values: Vec<f64>) -> Self {
        let valid = vec![true; values.len()];
        EpochSeries::new(start, epoch_len, values, valid).expect("positive epoch_len")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// End of the covered range (exclusive).
    pub fn end(&self) -> f64 {
        self.start + self.len() as f64 * self.epoch_len
    }

    pub fn epoch_start(&self, i: usize) -> f64 {
        self.start + i as f64 * self.epoch_len
    }

    pub fn epoch_mid(&self, i: usize) -> f64 {
        self.epoch_start(i) + 0.5 * self.epoch_len
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.valid[i]
    }

    /// Value of epoch `i`, or `None` when the epoch is invalid.
    pub fn value(&self, i: usize) -> Option<f64> {
        if self.valid[i] {
            Some(self.values[i])
        } else {
            None
        }
    }

    pub fn set(&mut self, i: usize, value: f64) {
        self.values[i] = value;
        self.valid[i] = true;
    }

    pub fn invalidate(&mut self, i: usize) {
        self.valid[i] = false;
        self.values[i] = f64::NAN;
    }

    pub fn n_valid(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Iterator over `(index, value)` of valid epochs.
    pub fn valid_values(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .zip(self.valid.iter())
            .enumerate()
            .filter_map(|(i, (v, ok))| if *ok { Some((i, *v)) } else { None })
    }

    /// True when `other` lies on the same epoch grid (same epoch length and
    /// integral offset between starts).
    pub fn grid_compatible(&self, other: &EpochSeries) -> bool {
        if (self.epoch_len - other.epoch_len).abs() > 1e-9 {
            return false;
        }
        let shift = (other.start - self.start) / self.epoch_len;
        (shift - shift.round()).abs() < 1e-6
    }
}

/// Why a span of time is excluded from analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonwearReason {
    Charging,
    ZeroMotion,
    Outlier,
    Quality,
}

/// A half-open `[start, end)` interval flagged as non-wear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WearInterval {
    pub start: f64,
    pub end: f64,
    pub reason: NonwearReason,
}

/// Sorted, disjoint set of non-wear intervals.
#[derive(Debug, Clone, Default)]
pub struct WearMask {
    intervals: Vec<WearInterval>,
}

impl WearMask {
    pub fn empty() -> Self {
        WearMask::default()
    }

    /// Builds a mask from arbitrary intervals: sorts them and merges overlaps
    /// (the earlier interval's reason wins on merge).
    pub fn from_intervals(mut intervals: Vec<WearInterval>) -> Result<Self> {
        if intervals.iter().any(|iv| iv.end <= iv.start) {
            return Err(Error::InvalidArgument(
                "non-wear interval with end <= start".into(),
            ));
        }
        intervals.sort_by(|a, b| a.start.total_cmp(&b.start));
        let mut merged: Vec<WearInterval> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match merged.last_mut() {
                Some(last) if iv.start <= last.end => {
                    last.end = last.end.max(iv.end);
                }
                _ => merged.push(iv),
            }
        }
        Ok(WearMask { intervals: merged })
    }

    pub fn intervals(&self) -> &[WearInterval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Total masked duration in seconds.
    pub fn total_duration(&self) -> f64 {
        self.intervals.iter().map(|iv| iv.end - iv.start).sum()
    }

    /// Does `[start, end)` intersect any masked interval?
    pub fn overlaps(&self, start: f64, end: f64) -> bool {
        // Intervals are sorted; binary-search the first candidate.
        let idx = self
            .intervals
            .partition_point(|iv| iv.end <= start);
        self.intervals
            .get(idx)
            .is_some_and(|iv| iv.start < end)
    }

    /// Union of two masks.
    pub fn union(&self, other: &WearMask) -> WearMask {
        let mut all = self.intervals.clone();
        all.extend_from_slice(&other.intervals);
        WearMask::from_intervals(all).expect("inputs already validated")
    }
}
