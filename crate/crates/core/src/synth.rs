//! Seedable synthetic cohorts with known circadian ground truth, plus the
//! brute-force cosinor oracle used to cross-check the least-squares fit.
//!
//! Every stream is a deterministic function of the participant seed; the
//! missingness and charging filters draw from their own derived RNG streams,
//! so degrading a recording never changes the values of the samples that
//! survive.

use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_distr::{Distribution, Normal};
use rand_pcg::Pcg64;

use crate::chronotype::ChronotypeGroup;
use crate::error::{Error, Result};
use crate::manifest::{CohortManifest, ParticipantEntry, SignalFiles, MANIFEST_SCHEMA_VERSION};
use crate::rhythm::CosinorFit;
use crate::series::{EpochSeries, SampleSeries, SignalKind};

pub const SECONDS_PER_DAY: f64 = 86400.0;
/// 2023-11-14 00:00:00 UTC, a whole-day boundary.
pub const DEFAULT_START_S: f64 = 1_699_920_000.0;

const OMEGA_H: f64 = 2.0 * std::f64::consts::PI / 24.0;

// RNG stream tags; each (seed, tag, index) triple gets its own generator.
const TAG_CARRIER: u64 = 1;
const TAG_ACCEL_WATCH: u64 = 2;
const TAG_ACCEL_REF: u64 = 3;
const TAG_RRI: u64 = 4;
const TAG_HR: u64 = 5;
const TAG_TEMP: u64 = 6;
const TAG_MEQ: u64 = 7;
const TAG_CHARGING: u64 = 8;
const TAG_MISS_ACCEL_WATCH: u64 = 9;
const TAG_MISS_ACCEL_REF: u64 = 10;
const TAG_MISS_RRI: u64 = 11;
const TAG_MISS_HR: u64 = 12;
const TAG_MISS_TEMP: u64 = 13;

fn sub_rng(seed: u64, tag: u64, index: u64) -> Pcg64 {
    let mixed = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(tag.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(index.wrapping_mul(0x94D0_49BB_1331_11EB));
    Pcg64::seed_from_u64(mixed)
}

/// One signal's injected rhythm: value(t) = mesor + amplitude·cos(ω(t − acro)).
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SignalSpec {
    pub acrophase_h: f64,
    pub mesor: f64,
    pub amplitude: f64,
    pub noise_sd: f64,
}

impl SignalSpec {
    pub fn value_at(&self, local_h: f64) -> f64 {
        self.mesor + self.amplitude * (OMEGA_H * (local_h - self.acrophase_h)).cos()
    }
}

/// Ground truth for one synthetic participant.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SynthProfile {
    pub id: String,
    pub seed: u64,
    pub group: ChronotypeGroup,
    /// Target mean of the MEQ administrations.
    pub meq_mean: f64,
    pub meq_admin_sd: f64,
    pub meq_clamp: (f64, f64),
    /// Motion envelope in g; drives both devices' acceleration.
    pub activity: SignalSpec,
    /// Heart rate in bpm.
    pub hr: SignalSpec,
    /// Mean R-R interval in ms.
    pub rri: SignalSpec,
    /// Modulation of the RRI noise SD in ms (drives SDNN/RMSSD/pNN50).
    pub rri_var: SignalSpec,
    /// Core body temperature in deg C.
    pub cbt: SignalSpec,
    /// Skin temperature in deg C.
    pub skin: SignalSpec,
    /// Fraction of each stream dropped at random (whole minutes/bursts).
    pub missingness: f64,
    /// Daily watch charging gap; 0 disables it.
    pub charging_min_per_day: f64,
    pub utc_offset_s: i64,
}

/// Generation-rate parameters shared by a cohort.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub days: u32,
    pub start_unix_s: f64,
    pub watch_accel_hz: f64,
    pub ref_accel_hz: f64,
    /// Acceleration is emitted in bursts of this length...
    pub accel_burst_s: f64,
    /// ...once per this period. Keeps desk-scale datasets small while every
    /// burst still yields one fully covered minute of counts.
    pub accel_burst_period_s: f64,
    pub rri_burst_s: f64,
    pub rri_burst_period_s: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            days: 2,
            start_unix_s: DEFAULT_START_S,
            watch_accel_hz: 2.0,
            ref_accel_hz: 4.0,
            accel_burst_s: 61.0,
            accel_burst_period_s: 600.0,
            rri_burst_s: 61.0,
            rri_burst_period_s: 600.0,
        }
    }
}

/// All generated streams of one participant.
#[derive(Debug, Clone)]
pub struct ParticipantRecord {
    pub profile: SynthProfile,
    pub collection_start_s: f64,
    pub collection_end_s: f64,
    pub watch_accel: [SampleSeries; 3],
    pub ref_accel: [SampleSeries; 3],
    pub rri: SampleSeries,
    pub hr: SampleSeries,
    pub cbt: SampleSeries,
    pub skin: SampleSeries,
    pub meq_administrations: Vec<(u32, f64)>,
}

/// Latent band-limited motion process: an envelope-modulated sum of fixed
/// sinusoids, evaluable at any instant so different devices sample the same
/// continuous signal.
struct MotionCarrier {
    components: Vec<(f64, f64, f64)>, // (freq Hz, phase, weight)
    axis_weights: [f64; 3],
}

impl MotionCarrier {
    fn new(seed: u64, max_hz: f64) -> MotionCarrier {
        let mut rng = sub_rng(seed, TAG_CARRIER, 0);
        let lo = 0.33;
        let hi = (0.45 * max_hz).clamp(lo + 0.05, 1.45);
        let n = 5;
        let mut components = Vec::with_capacity(n);
        for _ in 0..n {
            let f = lo + (hi - lo) * rng.random::<f64>();
            let phase = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            let weight = 0.5 + 0.5 * rng.random::<f64>();
            components.push((f, phase, weight));
        }
        let norm: f64 = components.iter().map(|c| c.2 * c.2).sum::<f64>().sqrt();
        for c in components.iter_mut() {
            c.2 /= norm;
        }
        let ax = 0.5 + 0.3 * rng.random::<f64>();
        let ay = 0.5 + 0.3 * rng.random::<f64>();
        let az = (1.0 - (ax * ax + ay * ay).min(0.99)).max(0.01).sqrt();
        MotionCarrier {
            components,
            axis_weights: [ax, ay, az],
        }
    }

    fn at(&self, t: f64) -> f64 {
        self.components
            .iter()
            .map(|(f, p, w)| w * (2.0 * std::f64::consts::PI * f * t + p).sin())
            .sum()
    }
}

fn local_hours(t: f64, utc_offset_s: i64) -> f64 {
    (t + utc_offset_s as f64) / 3600.0
}

/// Generates every stream of one participant. Fails on invalid fractions or
/// on fewer than 2 days.
pub fn generate_participant(
    profile: &SynthProfile,
    cfg: &SynthConfig,
) -> Result<ParticipantRecord> {
    if cfg.days < 2 {
        return Err(Error::InvalidArgument(format!(
            "synthetic cohorts need days >= 2 (cosinor needs a full cycle; got {})",
            cfg.days
        )));
    }
    if !(0.0..1.0).contains(&profile.missingness) {
        return Err(Error::InvalidArgument(format!(
            "missingness must lie in [0, 1), got {}",
            profile.missingness
        )));
    }
    let start = cfg.start_unix_s;
    let end = start + cfg.days as f64 * SECONDS_PER_DAY;
    let offset = profile.utc_offset_s;

    // Daily watch charging gaps (watch accel, RRI, HR).
    let mut charging: Vec<(f64, f64)> = Vec::new();
    if profile.charging_min_per_day > 0.0 {
        let mut rng = sub_rng(profile.seed, TAG_CHARGING, 0);
        for d in 0..cfg.days {
            let jitter = rng.random::<f64>() * 1800.0;
            let gap_start = start + d as f64 * SECONDS_PER_DAY + 3.5 * 3600.0 + jitter;
            charging.push((gap_start, gap_start + profile.charging_min_per_day * 60.0));
        }
    }
    let in_charging = |t: f64| charging.iter().any(|(a, b)| t >= *a && t < *b);

    let carrier = MotionCarrier::new(profile.seed, cfg.watch_accel_hz.min(cfg.ref_accel_hz));
    let envelope = |t: f64| {
        profile
            .activity
            .value_at(local_hours(t, offset))
            .max(0.0)
    };

    // Bursts sit on a minute boundary near the middle of their period so
    // aggregated epochs stay phase-centered.
    let burst_offset = |period: f64, burst: f64| ((period - burst) / 2.0 / 60.0).floor().max(0.0) * 60.0;

    let accel_for = |hz: f64, noise_tag: u64, miss_tag: u64, charging_applies: bool| {
        let n_bursts = ((end - start) / cfg.accel_burst_period_s).ceil() as u64;
        let offset_in_period = burst_offset(cfg.accel_burst_period_s, cfg.accel_burst_s);
        let samples_per_burst = (cfg.accel_burst_s * hz).floor() as usize + 1;
        let mut ts = Vec::new();
        let mut vals = [Vec::new(), Vec::new(), Vec::new()];
        let mut miss_rng = sub_rng(profile.seed, miss_tag, 0);
        for b in 0..n_bursts {
            let burst_start = start + b as f64 * cfg.accel_burst_period_s + offset_in_period;
            let dropped = miss_rng.random::<f64>() < profile.missingness;
            let mut noise_rng = sub_rng(profile.seed, noise_tag, b);
            let noise = Normal::new(0.0, profile.activity.noise_sd.max(1e-12)).unwrap();
            for i in 0..samples_per_burst {
                let t = burst_start + i as f64 / hz;
                // Draw per-sample noise unconditionally so retained samples
                // are identical whether or not others are dropped.
                let nx = noise.sample(&mut noise_rng);
                let ny = noise.sample(&mut noise_rng);
                let nz = noise.sample(&mut noise_rng);
                if dropped || t >= end || (charging_applies && in_charging(t)) {
                    continue;
                }
                let m = envelope(t) * carrier.at(t);
                ts.push(t);
                vals[0].push(carrier.axis_weights[0] * m + nx);
                vals[1].push(carrier.axis_weights[1] * m + ny);
                vals[2].push(1.0 + carrier.axis_weights[2] * m + nz);
            }
        }
        let kinds = [SignalKind::AccelX, SignalKind::AccelY, SignalKind::AccelZ];
        let mut out = Vec::with_capacity(3);
        for (axis, kind) in kinds.into_iter().enumerate() {
            out.push(SampleSeries::new(
                kind,
                ts.clone(),
                std::mem::take(&mut vals[axis]),
                Some(hz),
                None,
            )?);
        }
        Ok::<[SampleSeries; 3], Error>([
            out.remove(0),
            out.remove(0),
            out.remove(0),
        ])
    };

    let watch_accel = accel_for(cfg.watch_accel_hz, TAG_ACCEL_WATCH, TAG_MISS_ACCEL_WATCH, true)?;
    let ref_accel = accel_for(cfg.ref_accel_hz, TAG_ACCEL_REF, TAG_MISS_ACCEL_REF, false)?;

    // RRI event bursts with circadian modulation of the mean interval and of
    // the beat-to-beat noise.
    let rri = {
        let n_bursts = ((end - start) / cfg.rri_burst_period_s).ceil() as u64;
        let offset_in_period = burst_offset(cfg.rri_burst_period_s, cfg.rri_burst_s);
        let mut ts = Vec::new();
        let mut vals = Vec::new();
        let mut miss_rng = sub_rng(profile.seed, TAG_MISS_RRI, 0);
        for b in 0..n_bursts {
            let burst_start = start + b as f64 * cfg.rri_burst_period_s + offset_in_period;
            let dropped = miss_rng.random::<f64>() < profile.missingness;
            let mut rng = sub_rng(profile.seed, TAG_RRI, b);
            let mut t = burst_start;
            while t < (burst_start + cfg.rri_burst_s).min(end) {
                let lh = local_hours(t, offset);
                let sd = profile.rri_var.value_at(lh).max(3.0);
                let rr_ms = profile.rri.value_at(lh)
                    + sd * Normal::new(0.0, 1.0).unwrap().sample(&mut rng);
                if !(dropped || in_charging(t)) {
                    ts.push(t);
                    vals.push(rr_ms);
                }
                t += (rr_ms / 1000.0).max(0.25);
            }
        }
        SampleSeries::new(SignalKind::Rri, ts, vals, None, None)?
    };

    // Minute-level HR.
    let hr = {
        let n_min = (cfg.days as usize) * 1440;
        let mut rng = sub_rng(profile.seed, TAG_HR, 0);
        let mut miss_rng = sub_rng(profile.seed, TAG_MISS_HR, 0);
        let noise = Normal::new(0.0, profile.hr.noise_sd.max(1e-12)).unwrap();
        let mut ts = Vec::with_capacity(n_min);
        let mut vals = Vec::with_capacity(n_min);
        for m in 0..n_min {
            let t = start + m as f64 * 60.0 + 30.0;
            let v = profile.hr.value_at(local_hours(t, offset)) + noise.sample(&mut rng);
            let dropped = miss_rng.random::<f64>() < profile.missingness;
            if dropped || in_charging(t) {
                continue;
            }
            ts.push(t);
            vals.push(v);
        }
        SampleSeries::new(SignalKind::Hr, ts, vals, None, None)?
    };

    // Minute-level temperatures with a shared quality channel.
    let (cbt, skin) = {
        let n_min = (cfg.days as usize) * 1440;
        let mut rng = sub_rng(profile.seed, TAG_TEMP, 0);
        let mut miss_rng = sub_rng(profile.seed, TAG_MISS_TEMP, 0);
        let cbt_noise = Normal::new(0.0, profile.cbt.noise_sd.max(1e-12)).unwrap();
        let skin_noise = Normal::new(0.0, profile.skin.noise_sd.max(1e-12)).unwrap();
        let mut ts = Vec::with_capacity(n_min);
        let mut cbt_v = Vec::with_capacity(n_min);
        let mut skin_v = Vec::with_capacity(n_min);
        let mut quality = Vec::with_capacity(n_min);
        for m in 0..n_min {
            let t = start + m as f64 * 60.0 + 30.0;
            let lh = local_hours(t, offset);
            let c = profile.cbt.value_at(lh) + cbt_noise.sample(&mut rng);
            let s = profile.skin.value_at(lh) + skin_noise.sample(&mut rng);
            let u: f64 = rng.random();
            let q = if u < 0.80 {
                4
            } else if u < 0.92 {
                3
            } else if u < 0.965 {
                2
            } else {
                1
            };
            let dropped = miss_rng.random::<f64>() < profile.missingness;
            if dropped {
                continue;
            }
            ts.push(t);
            cbt_v.push(c);
            skin_v.push(s);
            quality.push(q);
        }
        (
            SampleSeries::new(
                SignalKind::Cbt,
                ts.clone(),
                cbt_v,
                Some(1.0 / 60.0),
                Some(quality.clone()),
            )?,
            SampleSeries::new(
                SignalKind::SkinT,
                ts,
                skin_v,
                Some(1.0 / 60.0),
                Some(quality),
            )?,
        )
    };

    // MEQ administrations on the first, middle and last study day.
    let meq_administrations = {
        let mut rng = sub_rng(profile.seed, TAG_MEQ, 0);
        let days = [0u32, cfg.days / 2, cfg.days];
        let noise = Normal::new(0.0, profile.meq_admin_sd.max(1e-12)).unwrap();
        days.iter()
            .map(|d| {
                let score = (profile.meq_mean + noise.sample(&mut rng))
                    .clamp(profile.meq_clamp.0, profile.meq_clamp.1);
                (*d, score)
            })
            .collect()
    };

    Ok(ParticipantRecord {
        profile: profile.clone(),
        collection_start_s: start,
        collection_end_s: end,
        watch_accel,
        ref_accel,
        rri,
        hr,
        cbt,
        skin,
        meq_administrations,
    })
}

/// Generates a whole cohort.
pub fn generate_cohort(
    profiles: &[SynthProfile],
    cfg: &SynthConfig,
) -> Result<Vec<ParticipantRecord>> {
    profiles
        .iter()
        .map(|p| generate_participant(p, cfg))
        .collect()
}

/// Group acrophase parameters used by the demo cohort and by the group
/// separation analysis: medians, IQRs and skews of the split-uniform
/// generator, ordered Evening, Intermediate, Morning.
pub const GROUP_ACRO_MEDIANS_H: [f64; 3] = [17.11, 16.53, 15.18];
pub const GROUP_ACRO_IQRS_H: [f64; 3] = [1.48, 1.73, 0.74];
pub const GROUP_ACRO_SKEWS: [f64; 3] = [0.3, -0.3, 0.0];
pub const GROUP_SIZES: [usize; 3] = [6, 16, 14];
const GROUPS: [ChronotypeGroup; 3] = [
    ChronotypeGroup::Evening,
    ChronotypeGroup::Intermediate,
    ChronotypeGroup::Morning,
];
const GROUP_MEQ_MEAN_SD: [(f64, f64); 3] = [(36.83, 3.83), (49.65, 4.79), (63.40, 4.45)];
const GROUP_MEQ_CLAMP: [(f64, f64); 3] = [(16.0, 41.5), (42.5, 57.5), (58.5, 86.0)];

/// Draws from a split-uniform distribution with exact median and IQR:
/// half the mass uniform on `[med − w·(1+skew)/2, med]`, half on
/// `[med, med + w·(1−skew)/2]` with w = 2·IQR.
fn split_uniform(rng: &mut Pcg64, median: f64, iqr: f64, skew: f64) -> f64 {
    let w = 2.0 * iqr;
    let w_lo = w * (0.5 + skew / 2.0);
    let w_up = w - w_lo;
    let side: f64 = rng.random();
    let u: f64 = rng.random();
    if side < 0.5 {
        median - u * w_lo
    } else {
        median + u * w_up
    }
}

/// Acrophase cohort with the demo group structure: returns
/// (group, HR acrophase) pairs for 6 Evening, 16 Intermediate and 14
/// Morning participants.
pub fn group_acrophase_cohort(seed: u64) -> Vec<(ChronotypeGroup, f64)> {
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut out = Vec::with_capacity(36);
    for g in 0..3 {
        for _ in 0..GROUP_SIZES[g] {
            let acro = split_uniform(
                &mut rng,
                GROUP_ACRO_MEDIANS_H[g],
                GROUP_ACRO_IQRS_H[g],
                GROUP_ACRO_SKEWS[g],
            );
            out.push((GROUPS[g], acro.rem_euclid(24.0)));
        }
    }
    out
}

/// Cohort for regression recovery: acrophases ~ N(acro_mean, acro_sd),
/// MEQ = intercept + slope·acrophase + N(0, noise_sd).
pub fn generate_regression_cohort(
    seed: u64,
    n: usize,
    intercept: f64,
    slope: f64,
    noise_sd: f64,
    acro_mean: f64,
    acro_sd: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut rng = Pcg64::seed_from_u64(seed);
    let acro_dist = Normal::new(acro_mean, acro_sd).unwrap();
    let eps = Normal::new(0.0, noise_sd).unwrap();
    let mut acros = Vec::with_capacity(n);
    let mut meqs = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = acro_dist.sample(&mut rng);
        acros.push(a);
        meqs.push(intercept + slope * a + eps.sample(&mut rng));
    }
    (acros, meqs)
}

/// Default demo cohort: `n` profiles with the published group structure
/// (truncated or cycled from 6 Evening / 16 Intermediate / 14 Morning).
pub fn demo_profiles(n: usize, master_seed: u64) -> Vec<SynthProfile> {
    let mut rng = sub_rng(master_seed, 100, 0);
    let mut group_order = Vec::new();
    for g in 0..3 {
        for _ in 0..GROUP_SIZES[g] {
            group_order.push(g);
        }
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let g = group_order[i % group_order.len()];
        let acro_hr = split_uniform(
            &mut rng,
            GROUP_ACRO_MEDIANS_H[g],
            GROUP_ACRO_IQRS_H[g],
            GROUP_ACRO_SKEWS[g],
        );
        let (meq_mean_g, meq_sd_g) = GROUP_MEQ_MEAN_SD[g];
        let clamp = GROUP_MEQ_CLAMP[g];
        let meq_mean = (meq_mean_g + meq_sd_g * Normal::new(0.0, 1.0).unwrap().sample(&mut rng))
            .clamp(clamp.0, clamp.1);
        let jig = |rng: &mut Pcg64, sd: f64| sd * Normal::new(0.0, 1.0).unwrap().sample(rng);
        let acro_act = (acro_hr - 0.37 + jig(&mut rng, 0.3)).rem_euclid(24.0);
        let acro_cbt = (acro_hr + 0.8 + jig(&mut rng, 0.4)).rem_euclid(24.0);
        let acro_skin = (acro_hr - 12.8 + jig(&mut rng, 0.8)).rem_euclid(24.0);
        let acro_rri = (acro_hr - 11.75 + jig(&mut rng, 0.3)).rem_euclid(24.0);
        let acro_var = (acro_hr - 0.6 + jig(&mut rng, 0.4)).rem_euclid(24.0);
        out.push(SynthProfile {
            id: format!("p{:02}", i + 1),
            seed: master_seed.wrapping_add(1 + i as u64),
            group: GROUPS[g],
            meq_mean,
            meq_admin_sd: 1.5,
            meq_clamp: clamp,
            activity: SignalSpec {
                acrophase_h: acro_act,
                mesor: 0.15,
                amplitude: 0.20,
                noise_sd: 0.025,
            },
            hr: SignalSpec {
                acrophase_h: acro_hr,
                mesor: 70.0,
                amplitude: 6.0,
                noise_sd: 2.0,
            },
            rri: SignalSpec {
                acrophase_h: acro_rri,
                mesor: 820.0,
                amplitude: 80.0,
                noise_sd: 0.0,
            },
            rri_var: SignalSpec {
                acrophase_h: acro_var,
                mesor: 35.0,
                amplitude: 15.0,
                noise_sd: 0.0,
            },
            cbt: SignalSpec {
                acrophase_h: acro_cbt,
                mesor: 36.9,
                amplitude: 0.35,
                noise_sd: 0.08,
            },
            skin: SignalSpec {
                acrophase_h: acro_skin,
                mesor: 33.3,
                amplitude: 0.9,
                noise_sd: 0.15,
            },
            missingness: 0.03,
            charging_min_per_day: 60.0,
            utc_offset_s: 3600,
        });
    }
    out
}

// ---------------------------------------------------------------------------
// CSV + manifest export (the exact formats ingest consumes)
// ---------------------------------------------------------------------------

fn ms(t: f64) -> i64 {
    (t * 1000.0).round() as i64
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path.display().to_string(), e))
}

fn accel_csv(axes: &[SampleSeries; 3]) -> String {
    let mut out = String::with_capacity(axes[0].len() * 40 + 32);
    out.push_str("t_unix_ms,x_g,y_g,z_g\n");
    for i in 0..axes[0].len() {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            ms(axes[0].timestamps[i]),
            axes[0].values[i],
            axes[1].values[i],
            axes[2].values[i]
        ));
    }
    out
}

fn rri_csv(s: &SampleSeries) -> String {
    let mut out = String::with_capacity(s.len() * 24 + 20);
    out.push_str("t_unix_ms,rri_ms\n");
    for i in 0..s.len() {
        out.push_str(&format!("{},{:.3}\n", ms(s.timestamps[i]), s.values[i]));
    }
    out
}

fn hr_csv(s: &SampleSeries) -> String {
    let mut out = String::with_capacity(s.len() * 22 + 18);
    out.push_str("t_unix_ms,bpm\n");
    for i in 0..s.len() {
        out.push_str(&format!("{},{:.3}\n", ms(s.timestamps[i]), s.values[i]));
    }
    out
}

fn temperature_csv(cbt: &SampleSeries, skin: &SampleSeries) -> String {
    let q = cbt.quality.as_ref().expect("cbt carries quality");
    let mut out = String::with_capacity(cbt.len() * 34 + 34);
    out.push_str("t_unix_ms,cbt_c,skin_c,quality\n");
    for i in 0..cbt.len() {
        out.push_str(&format!(
            "{},{:.4},{:.4},{}\n",
            ms(cbt.timestamps[i]),
            cbt.values[i],
            skin.values[i],
            q[i]
        ));
    }
    out
}

/// Writes a cohort as per-participant CSV directories plus a manifest;
/// returns the manifest path. The on-disk tree is a pure function of the
/// records, so identical seeds reproduce identical bytes.
pub fn write_cohort(records: &[ParticipantRecord], dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut entries = Vec::with_capacity(records.len());
    for rec in records {
        let pdir = dir.join(&rec.profile.id);
        std::fs::create_dir_all(&pdir).map_err(|e| Error::io(pdir.display().to_string(), e))?;
        write_file(&pdir.join("watch_accel.csv"), &accel_csv(&rec.watch_accel))?;
        write_file(&pdir.join("ref_accel.csv"), &accel_csv(&rec.ref_accel))?;
        write_file(&pdir.join("rri.csv"), &rri_csv(&rec.rri))?;
        write_file(&pdir.join("hr.csv"), &hr_csv(&rec.hr))?;
        write_file(
            &pdir.join("temperature.csv"),
            &temperature_csv(&rec.cbt, &rec.skin),
        )?;
        entries.push(ParticipantEntry {
            id: rec.profile.id.clone(),
            utc_offset_s: rec.profile.utc_offset_s,
            collection_start_ms: ms(rec.collection_start_s),
            collection_end_ms: ms(rec.collection_end_s),
            meq_administrations: rec.meq_administrations.clone(),
            age: None,
            sex: None,
            files: SignalFiles {
                watch_accel: Some(PathBuf::from(format!("{}/watch_accel.csv", rec.profile.id))),
                ref_accel: Some(PathBuf::from(format!("{}/ref_accel.csv", rec.profile.id))),
                rri: Some(PathBuf::from(format!("{}/rri.csv", rec.profile.id))),
                hr: Some(PathBuf::from(format!("{}/hr.csv", rec.profile.id))),
                temperature: Some(PathBuf::from(format!(
                    "{}/temperature.csv",
                    rec.profile.id
                ))),
            },
        });
    }
    let manifest = CohortManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        participants: entries,
    };
    let path = dir.join("manifest.json");
    manifest.save(&path)?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// Brute-force cosinor oracle
// ---------------------------------------------------------------------------

/// Grid bounds and steps for [`oracle_cosinor_grid`]: (lo, hi, step) for
/// mesor and amplitude, plus the acrophase step over [0, 24).
#[derive(Debug, Clone, Copy)]
pub struct CosinorGrid {
    pub mesor: (f64, f64, f64),
    pub amplitude: (f64, f64, f64),
    pub acrophase_h: f64,
}

/// Exhaustive SSE minimization of y ≈ M + A·cos(ω(t − acro)) over the grid.
///
/// The SSE of each cell is evaluated through an exact algebraic expansion of
/// the residual sum (precomputed inner products), which is identical to the
/// literal per-cell sum but runs in O(1) per cell; for fixed (A, acro) the
/// best grid mesor is the grid point nearest the closed-form optimum, which
/// the quadratic dependence on M makes exact.
pub fn oracle_cosinor_grid(
    s: &EpochSeries,
    period_hours: f64,
    utc_offset_s: f64,
    grid: &CosinorGrid,
) -> Result<CosinorFit> {
    let (m_lo, m_hi, m_step) = grid.mesor;
    let (a_lo, a_hi, a_step) = grid.amplitude;
    if m_step <= 0.0
        || a_step <= 0.0
        || grid.acrophase_h <= 0.0
        || m_hi < m_lo
        || a_hi < a_lo
    {
        return Err(Error::InvalidArgument("empty cosinor grid".into()));
    }
    let pts: Vec<(f64, f64)> = s
        .valid_values()
        .map(|(i, v)| ((s.epoch_mid(i) + utc_offset_s) / 3600.0, v))
        .collect();
    let n = pts.len();
    if n < 3 {
        return Err(Error::InsufficientData(
            "oracle requires >= 3 valid epochs".into(),
        ));
    }
    let nf = n as f64;
    let omega = 2.0 * std::f64::consts::PI / period_hours;

    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let cbar = pts.iter().map(|p| (omega * p.0).cos()).sum::<f64>() / nf;
    let sbar = pts.iter().map(|p| (omega * p.0).sin()).sum::<f64>() / nf;
    let mut syy = 0.0;
    let mut syc = 0.0;
    let mut sys_ = 0.0;
    let mut scc = 0.0;
    let mut sss = 0.0;
    let mut scs = 0.0;
    for (t, y) in &pts {
        let yd = y - ybar;
        let cd = (omega * t).cos() - cbar;
        let sd = (omega * t).sin() - sbar;
        syy += yd * yd;
        syc += yd * cd;
        sys_ += yd * sd;
        scc += cd * cd;
        sss += sd * sd;
        scs += cd * sd;
    }

    let n_acro = (period_hours / grid.acrophase_h).round() as usize;
    let n_amp = ((a_hi - a_lo) / a_step).round() as usize + 1;
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    for ia in 0..n_acro {
        let acro = ia as f64 * grid.acrophase_h;
        // cos(ω(t − acro)) = cosφ·cos(ωt) + sinφ·sin(ωt) with φ = ω·acro.
        let (cp, sp) = ((omega * acro).cos(), (omega * acro).sin());
        let syc_a = cp * syc + sp * sys_;
        let scc_a = cp * cp * scc + 2.0 * cp * sp * scs + sp * sp * sss;
        let cbar_a = cp * cbar + sp * sbar;
        for ja in 0..n_amp {
            let amp = a_lo + ja as f64 * a_step;
            let base = syy - 2.0 * amp * syc_a + amp * amp * scc_a;
            let m_opt = ybar - amp * cbar_a;
            let m_grid = (((m_opt - m_lo) / m_step).round() * m_step + m_lo).clamp(m_lo, m_hi);
            let sse = base + nf * (m_grid - m_opt) * (m_grid - m_opt);
            if sse < best.0 {
                best = (sse, m_grid, amp, acro);
            }
        }
    }
    let (sse, mesor, amplitude, acro) = best;
    let r_squared = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let phi = (-acro * omega).rem_euclid(2.0 * std::f64::consts::PI);
    let phi = if phi > std::f64::consts::PI {
        phi - 2.0 * std::f64::consts::PI
    } else {
        phi
    };
    Ok(CosinorFit {
        mesor,
        amplitude,
        acrophase_hours: if amplitude == 0.0 { None } else { Some(acro) },
        phi_radians: if amplitude == 0.0 { None } else { Some(phi) },
        r_squared,
        n_points: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{self, Agg};
    use crate::rhythm;

    fn small_profile(seed: u64) -> SynthProfile {
        let mut p = demo_profiles(1, seed).remove(0);
        p.missingness = 0.0;
        p.charging_min_per_day = 0.0;
        p
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig::default();
        let p = small_profile(42);
        let a = generate_participant(&p, &cfg).unwrap();
        let b = generate_participant(&p, &cfg).unwrap();
        assert_eq!(a.rri.timestamps, b.rri.timestamps);
        assert_eq!(a.rri.values, b.rri.values);
        assert_eq!(a.watch_accel[0].values, b.watch_accel[0].values);
        assert_eq!(a.cbt.values, b.cbt.values);
        assert_eq!(a.meq_administrations, b.meq_administrations);
    }

    #[test]
    fn written_cohort_is_byte_identical_across_runs() {
        let cfg = SynthConfig::default();
        let p = small_profile(7);
        let rec = generate_participant(&p, &cfg).unwrap();
        let csv1 = temperature_csv(&rec.cbt, &rec.skin);
        let rri1 = rri_csv(&rec.rri);
        let rec2 = generate_participant(&p, &cfg).unwrap();
        assert_eq!(csv1, temperature_csv(&rec2.cbt, &rec2.skin));
        assert_eq!(rri1, rri_csv(&rec2.rri));
    }

    #[test]
    fn cohort_days_and_fraction_preconditions() {
        let mut cfg = SynthConfig::default();
        cfg.days = 1;
        let p = small_profile(1);
        assert!(generate_participant(&p, &cfg).is_err());
        let mut p2 = small_profile(1);
        p2.missingness = 1.2;
        assert!(generate_participant(&p2, &SynthConfig::default()).is_err());
    }

    #[test]
    fn noiseless_round_trip_recovers_acrophase() {
        let mut p = small_profile(11);
        p.cbt.noise_sd = 0.0;
        p.cbt.acrophase_h = 16.6;
        let cfg = SynthConfig::default();
        let rec = generate_participant(&p, &cfg).unwrap();
        let epochs = ingest::epoch_aggregate(&rec.cbt, 600.0, Agg::Mean).unwrap();
        let fit = rhythm::fit_cosinor(&epochs, 24.0, p.utc_offset_s as f64).unwrap();
        let acro = fit.acrophase_hours.unwrap();
        let diff = (acro - 16.6).abs();
        assert!(diff.min(24.0 - diff) < 1e-3, "acrophase {acro}");
    }

    #[test]
    fn missingness_reported_by_miss_rate() {
        let mut p = small_profile(5);
        p.missingness = 0.10;
        let mut cfg = SynthConfig::default();
        cfg.days = 4;
        let rec = generate_participant(&p, &cfg).unwrap();
        let minutes = ingest::epoch_aggregate(&rec.cbt, 60.0, Agg::Mean).unwrap();
        let rate =
            ingest::miss_rate(&minutes, rec.collection_start_s, rec.collection_end_s).unwrap();
        assert!((rate - 0.10).abs() < 0.01, "miss rate {rate}");
    }

    #[test]
    fn rri_mean_tracks_configured_mesor() {
        let p = small_profile(9);
        let mut cfg = SynthConfig::default();
        cfg.days = 3;
        let rec = generate_participant(&p, &cfg).unwrap();
        let mean = rec.rri.values.iter().sum::<f64>() / rec.rri.len() as f64;
        let rel = (mean - p.rri.mesor).abs() / p.rri.mesor;
        assert!(rel < 0.01, "mean RRI {mean} vs mesor {}", p.rri.mesor);
    }

    #[test]
    fn group_cohort_structure_and_determinism() {
        let a = group_acrophase_cohort(3);
        let b = group_acrophase_cohort(3);
        assert_eq!(a.len(), 36);
        assert_eq!(
            a.iter().filter(|(g, _)| *g == ChronotypeGroup::Evening).count(),
            6
        );
        assert_eq!(
            a.iter()
                .filter(|(g, _)| *g == ChronotypeGroup::Intermediate)
                .count(),
            16
        );
        assert_eq!(
            a.iter().filter(|(g, _)| *g == ChronotypeGroup::Morning).count(),
            14
        );
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.1, y.1);
        }
    }

    #[test]
    fn split_uniform_matches_median_and_iqr() {
        let mut rng = Pcg64::seed_from_u64(123);
        let mut draws: Vec<f64> = (0..200_000)
            .map(|_| split_uniform(&mut rng, 17.11, 1.48, 0.3))
            .collect();
        draws.sort_by(f64::total_cmp);
        let q = |p: f64| draws[(p * draws.len() as f64) as usize];
        assert!((q(0.5) - 17.11).abs() < 0.02, "median {}", q(0.5));
        let iqr = q(0.75) - q(0.25);
        assert!((iqr - 1.48).abs() < 0.03, "IQR {iqr}");
    }

    #[test]
    fn cohort_round_trips_through_csv_files() {
        let cfg = SynthConfig::default();
        let p = small_profile(21);
        let rec = generate_participant(&p, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest_path = write_cohort(std::slice::from_ref(&rec), dir.path()).unwrap();
        let manifest = crate::manifest::CohortManifest::load(&manifest_path).unwrap();
        assert_eq!(manifest.participants.len(), 1);
        let entry = &manifest.participants[0];

        let rri_path = manifest.resolve(&manifest_path, entry.files.rri.as_ref().unwrap());
        let loaded = ingest::load_signal(&rri_path, SignalKind::Rri).unwrap();
        assert_eq!(loaded.series.len(), rec.rri.len());
        assert!(loaded.dropped_lines.is_empty());

        let temp_path =
            manifest.resolve(&manifest_path, entry.files.temperature.as_ref().unwrap());
        let cbt = ingest::load_signal(&temp_path, SignalKind::Cbt).unwrap();
        assert_eq!(cbt.series.len(), rec.cbt.len());
        assert_eq!(cbt.series.quality.as_ref().unwrap().len(), rec.cbt.len());

        let accel_path =
            manifest.resolve(&manifest_path, entry.files.watch_accel.as_ref().unwrap());
        let ax = ingest::load_signal(&accel_path, SignalKind::AccelX).unwrap();
        assert_eq!(ax.series.len(), rec.watch_accel[0].len());
    }

    fn cosine_series(mesor: f64, amp: f64, acro: f64, days: usize) -> EpochSeries {
        let n = days * 144;
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let t_h = (i as f64 * 600.0 + 300.0) / 3600.0;
                mesor + amp * (2.0 * std::f64::consts::PI / 24.0 * (t_h - acro)).cos()
            })
            .collect();
        EpochSeries::from_values(0.0, 600.0, vals)
    }

    #[test]
    fn oracle_recovers_noiseless_parameters_to_grid_resolution() {
        let s = cosine_series(0.5, 0.3, 15.74, 3);
        let grid = CosinorGrid {
            mesor: (0.0, 1.0, 0.001),
            amplitude: (0.0, 1.0, 0.001),
            acrophase_h: 0.01,
        };
        let fit = oracle_cosinor_grid(&s, 24.0, 0.0, &grid).unwrap();
        assert!((fit.mesor - 0.5).abs() <= 0.001 + 1e-12);
        assert!((fit.amplitude - 0.3).abs() <= 0.001 + 1e-12);
        assert!((fit.acrophase_hours.unwrap() - 15.74).abs() <= 0.01 + 1e-9);
    }

    #[test]
    fn oracle_selects_zero_amplitude_for_constant_signal() {
        let s = EpochSeries::from_values(0.0, 600.0, vec![0.37; 288]);
        let grid = CosinorGrid {
            mesor: (0.0, 1.0, 0.01),
            amplitude: (0.0, 1.0, 0.01),
            acrophase_h: 0.25,
        };
        let fit = oracle_cosinor_grid(&s, 24.0, 0.0, &grid).unwrap();
        assert_eq!(fit.amplitude, 0.0);
        assert_eq!(fit.acrophase_hours, None);
        assert!((fit.mesor - 0.37).abs() <= 0.01);
        let empty = CosinorGrid {
            mesor: (0.0, 1.0, 0.0),
            amplitude: (0.0, 1.0, 0.01),
            acrophase_h: 0.25,
        };
        assert!(oracle_cosinor_grid(&s, 24.0, 0.0, &empty).is_err());
    }

    #[test]
    fn oracle_expansion_equals_literal_sse_enumeration() {
        // The O(1) algebraic cell evaluation must agree with the direct
        // residual sum over a coarse grid.
        let s = cosine_series(0.45, 0.22, 9.3, 2);
        let grid = CosinorGrid {
            mesor: (0.3, 0.7, 0.05),
            amplitude: (0.0, 0.5, 0.05),
            acrophase_h: 1.0,
        };
        let fit = oracle_cosinor_grid(&s, 24.0, 0.0, &grid).unwrap();

        let literal_sse = |m: f64, a: f64, acro: f64| -> f64 {
            s.valid_values()
                .map(|(i, v)| {
                    let t_h = s.epoch_mid(i) / 3600.0;
                    let pred =
                        m + a * (2.0 * std::f64::consts::PI / 24.0 * (t_h - acro)).cos();
                    (v - pred) * (v - pred)
                })
                .sum()
        };
        let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
        let mut m = 0.3;
        while m <= 0.7 + 1e-9 {
            let mut a = 0.0;
            while a <= 0.5 + 1e-9 {
                for ia in 0..24 {
                    let acro = ia as f64;
                    let sse = literal_sse(m, a, acro);
                    if sse < best.0 {
                        best = (sse, m, a, acro);
                    }
                }
                a += 0.05;
            }
            m += 0.05;
        }
        assert!((fit.mesor - best.1).abs() < 1e-9);
        assert!((fit.amplitude - best.2).abs() < 1e-9);
        assert!((fit.acrophase_hours.unwrap() - best.3).abs() < 1e-9);
    }

    #[test]
    fn regression_cohort_has_requested_structure() {
        let (acros, meqs) = generate_regression_cohort(17, 500, 135.0, -5.27, 5.0, 15.74, 1.6);
        assert_eq!(acros.len(), 500);
        let mean_acro = acros.iter().sum::<f64>() / 500.0;
        assert!((mean_acro - 15.74).abs() < 0.25);
        // Check slope by simple regression.
        let mx = mean_acro;
        let my = meqs.iter().sum::<f64>() / 500.0;
        let sxy: f64 = acros.iter().zip(&meqs).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = acros.iter().map(|x| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        assert!((slope + 5.27).abs() < 0.5, "slope {slope}");
    }
}
