//! Per-participant processing: raw files to masked, normalized epoch series
//! and the eight rhythm metrics per signal.
//!
//! Masking policy: the watch's non-wear mask (zero-motion + charging gaps)
//! applies to all watch-derived signals (counts, HR, HRV); the reference
//! device's mask applies to its counts; the union of both governs the
//! aligned watch/reference count pair used for agreement, mirroring
//! dual-device non-wear exclusion.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use circadia_core::chronotype::MeqScore;
use circadia_core::counts::{self, CountsSeries};
use circadia_core::hrv::{self, HrvMetricKind};
use circadia_core::ingest::{self, Agg, AlignReport};
use circadia_core::manifest::{CohortManifest, ParticipantEntry};
use circadia_core::rhythm::{self, RhythmMetrics};
use circadia_core::series::{EpochSeries, SampleSeries, SignalKind, WearMask};
use circadia_core::Error as CoreError;

use crate::config::RunConfig;

/// Fixed signal order used by every table and export.
pub const SIGNALS: [&str; 9] = [
    "acti_ac", "watch_ac", "cbt", "skin_t", "hr", "mean_rr", "sdnn", "rmssd", "pnn50",
];

/// Acrophase features entering the chronotype analyses.
pub const FEATURE_SIGNALS: [&str; 7] =
    ["acti_ac", "watch_ac", "cbt", "skin_t", "hr", "mean_rr", "rmssd"];

/// Signals a participant's wearables produced, processed to the cosinor
/// epoch grid, normalized to [0, 1].
pub struct ParticipantOutput {
    pub id: String,
    pub age: Option<f64>,
    pub sex: Option<u8>,
    pub meq: Option<MeqScore>,
    /// Normalized cosinor-epoch series per signal.
    pub signals: BTreeMap<String, EpochSeries>,
    pub metrics: BTreeMap<String, RhythmMetrics>,
    /// Aligned valid minute counts (watch, reference) for agreement.
    pub aligned_counts: Option<(EpochSeries, EpochSeries)>,
    pub align_report: Option<AlignReport>,
    pub miss_rates: BTreeMap<String, f64>,
    pub notices: Vec<String>,
    /// Inputs consumed, for run-summary hashing.
    pub input_files: Vec<PathBuf>,
}

struct RawSignals {
    watch_accel: Option<[SampleSeries; 3]>,
    ref_accel: Option<[SampleSeries; 3]>,
    rri: Option<SampleSeries>,
    hr: Option<SampleSeries>,
    cbt: Option<SampleSeries>,
    skin: Option<SampleSeries>,
}

fn load_accel(path: &Path) -> Result<[SampleSeries; 3], CoreError> {
    let x = ingest::load_signal(path, SignalKind::AccelX)?;
    let y = ingest::load_signal(path, SignalKind::AccelY)?;
    let z = ingest::load_signal(path, SignalKind::AccelZ)?;
    Ok([x.series, y.series, z.series])
}

fn load_raw(
    manifest: &CohortManifest,
    manifest_path: &Path,
    entry: &ParticipantEntry,
    notices: &mut Vec<String>,
    inputs: &mut Vec<PathBuf>,
) -> Result<RawSignals> {
    let mut raw = RawSignals {
        watch_accel: None,
        ref_accel: None,
        rri: None,
        hr: None,
        cbt: None,
        skin: None,
    };
    let mut note = |label: &str, err: &dyn std::fmt::Display| {
        notices.push(format!("{}: {label}: {err}", entry.id));
    };
    if let Some(rel) = &entry.files.watch_accel {
        let path = manifest.resolve(manifest_path, rel);
        match load_accel(&path) {
            Ok(axes) => {
                inputs.push(path);
                raw.watch_accel = Some(axes);
            }
            Err(e) => note("watch_accel", &e),
        }
    }
    if let Some(rel) = &entry.files.ref_accel {
        let path = manifest.resolve(manifest_path, rel);
        match load_accel(&path) {
            Ok(axes) => {
                inputs.push(path);
                raw.ref_accel = Some(axes);
            }
            Err(e) => note("ref_accel", &e),
        }
    }
    if let Some(rel) = &entry.files.rri {
        let path = manifest.resolve(manifest_path, rel);
        match ingest::load_signal(&path, SignalKind::Rri) {
            Ok(l) => {
                if !l.dropped_lines.is_empty() {
                    note("rri", &format!("{} unparsable rows skipped", l.dropped_lines.len()));
                }
                inputs.push(path);
                raw.rri = Some(l.series);
            }
            Err(e) => note("rri", &e),
        }
    }
    if let Some(rel) = &entry.files.hr {
        let path = manifest.resolve(manifest_path, rel);
        match ingest::load_signal(&path, SignalKind::Hr) {
            Ok(l) => {
                inputs.push(path);
                raw.hr = Some(l.series);
            }
            Err(e) => note("hr", &e),
        }
    }
    if let Some(rel) = &entry.files.temperature {
        let path = manifest.resolve(manifest_path, rel);
        match (
            ingest::load_signal(&path, SignalKind::Cbt),
            ingest::load_signal(&path, SignalKind::SkinT),
        ) {
            (Ok(c), Ok(s)) => {
                inputs.push(path);
                raw.cbt = Some(c.series);
                raw.skin = Some(s.series);
            }
            (Err(e), _) | (_, Err(e)) => note("temperature", &e),
        }
    }
    Ok(raw)
}

fn counts_pipeline(
    axes: &[SampleSeries; 3],
    config: &RunConfig,
) -> Result<(CountsSeries, WearMask), CoreError> {
    let vm = ingest::accel_magnitude(&axes[0], &axes[1], &axes[2])?;
    let mask = ingest::detect_nonwear(&vm, &config.nonwear)?;
    let mut per_axis = Vec::with_capacity(3);
    for axis in axes {
        let resampled = counts::resample_accel_with(
            axis,
            config.counts.pipeline_hz,
            config.counts.max_interp_gap_s,
        )?;
        per_axis.push(counts::activity_counts_with(&resampled, &config.counts)?);
    }
    let vm_counts = counts::vector_magnitude(&per_axis[0], &per_axis[1], &per_axis[2])?;
    Ok((vm_counts, mask))
}

/// Normalizes to the cosinor grid and fits the eight metrics; failures
/// surface as notices, not errors.
fn finish_signal(
    id: &str,
    name: &str,
    series: EpochSeries,
    config: &RunConfig,
    utc_offset_s: f64,
    out: &mut ParticipantOutput,
) {
    match ingest::minmax_normalize(&series) {
        Ok(normalized) => {
            match rhythm::rhythm_metrics(
                &normalized,
                config.period_hours,
                utc_offset_s,
                &config.nonparam_config(),
            ) {
                Ok(metrics) => {
                    out.metrics.insert(name.to_string(), metrics);
                }
                Err(e) => out.notices.push(format!("{id}: {name}: {e}")),
            }
            out.signals.insert(name.to_string(), normalized);
        }
        Err(e) => out.notices.push(format!("{id}: {name}: {e}")),
    }
}

/// Runs the full ingest-to-metrics pipeline for one manifest entry.
pub fn process_participant(
    manifest: &CohortManifest,
    manifest_path: &Path,
    entry: &ParticipantEntry,
    config: &RunConfig,
) -> Result<ParticipantOutput> {
    let mut out = ParticipantOutput {
        id: entry.id.clone(),
        age: entry.age,
        sex: entry.sex,
        meq: None,
        signals: BTreeMap::new(),
        metrics: BTreeMap::new(),
        aligned_counts: None,
        align_report: None,
        miss_rates: BTreeMap::new(),
        notices: Vec::new(),
        input_files: Vec::new(),
    };
    if !entry.meq_administrations.is_empty() {
        out.meq = Some(
            MeqScore::from_administrations(entry.id.clone(), entry.meq_administrations.clone())
                .context("averaging MEQ administrations")?,
        );
    }
    let offset = entry.utc_offset_s as f64;
    let collection = (
        entry.collection_start_ms as f64 / 1000.0,
        entry.collection_end_ms as f64 / 1000.0,
    );
    let mut notices = Vec::new();
    let raw = load_raw(manifest, manifest_path, entry, &mut notices, &mut out.input_files)?;
    out.notices.append(&mut notices);

    // Counts + non-wear per device.
    let watch = raw
        .watch_accel
        .as_ref()
        .and_then(|axes| match counts_pipeline(axes, config) {
            Ok(v) => Some(v),
            Err(e) => {
                out.notices.push(format!("{}: watch_ac: {e}", entry.id));
                None
            }
        });
    let reference = raw
        .ref_accel
        .as_ref()
        .and_then(|axes| match counts_pipeline(axes, config) {
            Ok(v) => Some(v),
            Err(e) => {
                out.notices.push(format!("{}: acti_ac: {e}", entry.id));
                None
            }
        });

    let watch_mask = watch.as_ref().map(|(_, m)| m.clone()).unwrap_or_default();
    let ref_mask = reference
        .as_ref()
        .map(|(_, m)| m.clone())
        .unwrap_or_default();

    match (&watch, &reference) {
        (Some((w, _)), Some((r, _))) => {
            // Dual-device exclusion on the shared minute grid.
            match ingest::align_series(&w.series, &r.series, &[&watch_mask, &ref_mask]) {
                Ok((aw, ar, report)) => {
                    out.align_report = Some(report);
                    record_miss_rate(&mut out, "watch_ac", &aw, collection);
                    record_miss_rate(&mut out, "acti_ac", &ar, collection);
                    let w600 = ingest::rebin_epochs(&aw, config.cosinor_epoch_s, Agg::Mean);
                    let r600 = ingest::rebin_epochs(&ar, config.cosinor_epoch_s, Agg::Mean);
                    if let Ok(s) = w600 {
                        finish_signal(&entry.id, "watch_ac", s, config, offset, &mut out);
                    }
                    if let Ok(s) = r600 {
                        finish_signal(&entry.id, "acti_ac", s, config, offset, &mut out);
                    }
                    out.aligned_counts = Some((aw, ar));
                }
                Err(e) => out.notices.push(format!("{}: alignment: {e}", entry.id)),
            }
        }
        (Some((w, _)), None) => {
            let masked = ingest::apply_mask(&w.series, &[&watch_mask]);
            record_miss_rate(&mut out, "watch_ac", &masked, collection);
            if let Ok(s) = ingest::rebin_epochs(&masked, config.cosinor_epoch_s, Agg::Mean) {
                finish_signal(&entry.id, "watch_ac", s, config, offset, &mut out);
            }
        }
        (None, Some((r, _))) => {
            let masked = ingest::apply_mask(&r.series, &[&ref_mask]);
            record_miss_rate(&mut out, "acti_ac", &masked, collection);
            if let Ok(s) = ingest::rebin_epochs(&masked, config.cosinor_epoch_s, Agg::Mean) {
                finish_signal(&entry.id, "acti_ac", s, config, offset, &mut out);
            }
        }
        (None, None) => {}
    }

    // HRV metrics from RRI events (watch signal: watch mask applies).
    if let Some(rri) = &raw.rri {
        match ingest::apply_physio_bounds(rri) {
            Ok((clean, dropped)) => {
                if dropped > 0 {
                    out.notices
                        .push(format!("{}: rri: {dropped} out-of-bounds samples", entry.id));
                }
                match hrv::compute_hrv_windows(&clean, config.hrv_window_s, config.hrv_min_beats) {
                    Ok(windows) => {
                        let kinds = [
                            ("mean_rr", HrvMetricKind::MeanRr),
                            ("sdnn", HrvMetricKind::Sdnn),
                            ("rmssd", HrvMetricKind::Rmssd),
                            ("pnn50", HrvMetricKind::Pnn50),
                        ];
                        for (name, kind) in kinds {
                            match hrv::metric_series(&windows, kind) {
                                Ok(series) => {
                                    let masked =
                                        ingest::apply_mask(&series, &[&watch_mask]);
                                    record_miss_rate(&mut out, name, &masked, collection);
                                    finish_signal(
                                        &entry.id, name, masked, config, offset, &mut out,
                                    );
                                }
                                Err(e) => {
                                    out.notices.push(format!("{}: {name}: {e}", entry.id))
                                }
                            }
                        }
                    }
                    Err(e) => out.notices.push(format!("{}: hrv: {e}", entry.id)),
                }
            }
            Err(e) => out.notices.push(format!("{}: rri: {e}", entry.id)),
        }
    }

    // Heart rate (watch signal).
    if let Some(hr_raw) = &raw.hr {
        process_sampled(
            &entry.id,
            "hr",
            hr_raw,
            Some(&watch_mask),
            config,
            offset,
            collection,
            &mut out,
        );
    }

    // Temperatures: quality gate, then bounds; no accel mask (separate device).
    for (name, series) in [("cbt", &raw.cbt), ("skin_t", &raw.skin)] {
        let Some(s) = series else { continue };
        match ingest::filter_quality(s, config.quality_min) {
            Ok(gated) => {
                if gated.is_empty() {
                    out.notices
                        .push(format!("{}: {name}: no samples pass quality gating", entry.id));
                    continue;
                }
                process_sampled(
                    &entry.id, name, &gated, None, config, offset, collection, &mut out,
                );
            }
            Err(e) => out.notices.push(format!("{}: {name}: {e}", entry.id)),
        }
    }

    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn process_sampled(
    id: &str,
    name: &str,
    raw: &SampleSeries,
    mask: Option<&WearMask>,
    config: &RunConfig,
    offset: f64,
    collection: (f64, f64),
    out: &mut ParticipantOutput,
) {
    let (clean, dropped) = match ingest::apply_physio_bounds(raw) {
        Ok(v) => v,
        Err(e) => {
            out.notices.push(format!("{id}: {name}: {e}"));
            return;
        }
    };
    if dropped > 0 {
        out.notices
            .push(format!("{id}: {name}: {dropped} out-of-bounds samples"));
    }
    if clean.is_empty() {
        out.notices.push(format!("{id}: {name}: no samples remain"));
        return;
    }
    let minutes = match ingest::epoch_aggregate(&clean, config.counts_epoch_s, Agg::Mean) {
        Ok(v) => v,
        Err(e) => {
            out.notices.push(format!("{id}: {name}: {e}"));
            return;
        }
    };
    let minutes = match mask {
        Some(m) => ingest::apply_mask(&minutes, &[m]),
        None => minutes,
    };
    record_miss_rate(out, name, &minutes, collection);
    match ingest::rebin_epochs(&minutes, config.cosinor_epoch_s, Agg::Mean) {
        Ok(s) => finish_signal(id, name, s, config, offset, out),
        Err(e) => out.notices.push(format!("{id}: {name}: {e}")),
    }
}

fn record_miss_rate(
    out: &mut ParticipantOutput,
    name: &str,
    series: &EpochSeries,
    collection: (f64, f64),
) {
    if let Ok(rate) = ingest::miss_rate(series, collection.0, collection.1) {
        out.miss_rates.insert(name.to_string(), rate);
    }
}

/// Processes a whole manifest, in manifest order, optionally in parallel.
pub fn process_cohort(
    manifest: &CohortManifest,
    manifest_path: &Path,
    config: &RunConfig,
) -> Result<Vec<ParticipantOutput>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .context("building worker pool")?;
    let results: Vec<Result<ParticipantOutput>> = pool.install(|| {
        manifest
            .participants
            .par_iter()
            .map(|entry| {
                eprintln!("[circadia] processing {}", entry.id);
                process_participant(manifest, manifest_path, entry, config)
            })
            .collect()
    });
    results.into_iter().collect()
}

/// Sample median and interquartile range (linear interpolation between
/// order statistics).
pub fn median_iqr(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| -> f64 {
        let pos = p * (sorted.len() as f64 - 1.0);
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    };
    Some((q(0.5), q(0.75) - q(0.25)))
}

/// Pulls one metric out of the bundle by table name.
pub fn metric_value(m: &RhythmMetrics, metric: &str) -> Option<f64> {
    match metric {
        "amplitude" => Some(m.amplitude),
        "acrophase" => m.acrophase_hours,
        "mesor" => Some(m.mesor),
        "is" => m.is_,
        "iv" => m.iv,
        "m10" => m.m10,
        "l5" => m.l5,
        "ra" => m.ra,
        _ => None,
    }
}

/// Metric order mirroring the published results table.
pub const METRICS: [&str; 8] = [
    "amplitude",
    "acrophase",
    "mesor",
    "is",
    "iv",
    "m10",
    "l5",
    "ra",
];
