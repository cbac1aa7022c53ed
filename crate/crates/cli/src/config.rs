//! Run configuration: JSON-loadable, fully defaulted, round-trip stable.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use circadia_core::counts::CountsConfig;
use circadia_core::ingest::NonwearConfig;
use circadia_core::rhythm::{NonparamConfig, ProfileResolution};
use circadia_core::synth::SynthConfig;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Cohort manifest path; relative paths resolve against the config file
    /// location (or the working directory when given on the command line).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    /// Minimum temperature quality score retained (1..=4).
    pub quality_min: u8,
    /// Activity-count epoch, seconds.
    pub counts_epoch_s: f64,
    /// Cosinor aggregation epoch, seconds.
    pub cosinor_epoch_s: f64,
    /// IS/IV bin, seconds.
    pub nonparam_bin_s: f64,
    /// Fixed cosinor period, hours.
    pub period_hours: f64,
    pub profile_resolution: ProfileResolution,
    pub nonwear: NonwearConfig,
    pub counts: CountsConfig,
    /// Signed-rank exact-enumeration threshold.
    pub exact_test_threshold: usize,
    pub hrv_window_s: f64,
    pub hrv_min_beats: usize,
    /// Signal every other signal is compared against.
    pub reference_signal: String,
    /// Worker threads; 0 means one per core.
    pub jobs: usize,
    pub seed: u64,
    /// Cohort size written by the synth command.
    pub synth_n: usize,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            manifest: None,
            quality_min: 2,
            counts_epoch_s: 60.0,
            cosinor_epoch_s: 600.0,
            nonparam_bin_s: 3600.0,
            period_hours: 24.0,
            profile_resolution: ProfileResolution::TenMinute,
            nonwear: NonwearConfig::default(),
            counts: CountsConfig::default(),
            exact_test_threshold: 25,
            hrv_window_s: 600.0,
            hrv_min_beats: 30,
            reference_signal: "acti_ac".into(),
            jobs: 0,
            seed: 0,
            synth_n: 36,
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        if config.schema_version != CONFIG_SCHEMA_VERSION {
            bail!(
                "unsupported config schema_version {} (supported: {CONFIG_SCHEMA_VERSION})",
                config.schema_version
            );
        }
        // Relative manifest paths are relative to the config file.
        if let (Some(m), Some(dir)) = (&config.manifest, path.parent()) {
            if m.is_relative() {
                config.manifest = Some(dir.join(m));
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.quality_min) {
            bail!("quality_min must lie in 1..=4, got {}", self.quality_min);
        }
        for (name, v) in [
            ("counts_epoch_s", self.counts_epoch_s),
            ("cosinor_epoch_s", self.cosinor_epoch_s),
            ("nonparam_bin_s", self.nonparam_bin_s),
            ("period_hours", self.period_hours),
            ("hrv_window_s", self.hrv_window_s),
        ] {
            if v <= 0.0 {
                bail!("{name} must be positive, got {v}");
            }
        }
        let ratio = self.cosinor_epoch_s / self.counts_epoch_s;
        if (ratio - ratio.round()).abs() > 1e-9 {
            bail!(
                "cosinor_epoch_s ({}) must be a multiple of counts_epoch_s ({})",
                self.cosinor_epoch_s,
                self.counts_epoch_s
            );
        }
        let ratio = self.nonparam_bin_s / self.cosinor_epoch_s;
        if (ratio - ratio.round()).abs() > 1e-9 {
            bail!(
                "nonparam_bin_s ({}) must be a multiple of cosinor_epoch_s ({})",
                self.nonparam_bin_s,
                self.cosinor_epoch_s
            );
        }
        if self.nonwear.window_s < 60.0 {
            bail!(
                "nonwear.window_s must be >= 60, got {}",
                self.nonwear.window_s
            );
        }
        if !(0.0..1.0).contains(&(self.nonwear.std_threshold_g / 10.0)) {
            bail!(
                "nonwear.std_threshold_g out of range: {}",
                self.nonwear.std_threshold_g
            );
        }
        Ok(())
    }

    /// Copy with machine-local paths removed, for embedding in run
    /// summaries that must be reproducible across directories.
    pub fn sanitized(&self) -> RunConfig {
        let mut c = self.clone();
        c.manifest = None;
        c
    }

    pub fn nonparam_config(&self) -> NonparamConfig {
        NonparamConfig {
            stability_bin_s: self.nonparam_bin_s,
            profile_resolution: self.profile_resolution,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_stably() {
        let c = RunConfig::default();
        let json1 = serde_json::to_string_pretty(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&json1).unwrap();
        let json2 = serde_json::to_string_pretty(&back).unwrap();
        assert_eq!(json1, json2);
    }

    #[test]
    fn config_rejects_out_of_range_values() {
        let mut c = RunConfig::default();
        c.quality_min = 0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.cosinor_epoch_s = 601.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.nonwear.window_s = 10.0;
        assert!(c.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn partial_json_uses_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"quality_min": 3}"#).unwrap();
        assert_eq!(c.quality_min, 3);
        assert_eq!(c.cosinor_epoch_s, 600.0);
        assert_eq!(c.reference_signal, "acti_ac");
    }
}
