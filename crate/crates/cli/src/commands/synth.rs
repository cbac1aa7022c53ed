//! `circadia synth`: write a synthetic cohort (CSV files + manifest)
//! consumable by every other command.

use std::path::Path;

use anyhow::{Context, Result};

use circadia_core::synth::{self, SynthProfile};

use crate::config::RunConfig;
use crate::summary::RunSummary;

pub fn run(config: &RunConfig, out: &Path, profiles_path: Option<&Path>) -> Result<()> {
    super::ensure_out_dir(out)?;
    let mut summary = RunSummary::new("synth", config);

    let profiles: Vec<SynthProfile> = match profiles_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading profiles {}", path.display()))?;
            summary.add_input(path, path.parent().unwrap_or(Path::new(".")))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing profiles {}", path.display()))?
        }
        None => synth::demo_profiles(config.synth_n, config.seed),
    };
    eprintln!(
        "[circadia] generating {} participants x {} days",
        profiles.len(),
        config.synth.days
    );
    let records = synth::generate_cohort(&profiles, &config.synth)?;
    let manifest_path = synth::write_cohort(&records, out)?;

    for rec in &records {
        for name in [
            "watch_accel.csv",
            "ref_accel.csv",
            "rri.csv",
            "hr.csv",
            "temperature.csv",
        ] {
            summary.add_output(format!("{}/{name}", rec.profile.id));
        }
    }
    summary.add_output("manifest.json");

    // Ship a processing config tuned to the dataset's duty cycle: burst
    // gaps must not read as charging intervals.
    let mut dataset_config = config.clone();
    dataset_config.manifest = Some("manifest.json".into());
    let burst_gap = (config.synth.accel_burst_period_s - config.synth.accel_burst_s).max(0.0);
    if burst_gap >= dataset_config.nonwear.gap_min_s {
        dataset_config.nonwear.gap_min_s = (2.0 * burst_gap + 120.0).ceil();
    }
    let config_text =
        serde_json::to_string_pretty(&dataset_config).expect("config serializes") + "\n";
    std::fs::write(out.join("config.json"), config_text)
        .with_context(|| format!("writing {}", out.join("config.json").display()))?;
    summary.add_output("config.json");
    summary.write(out)?;
    eprintln!(
        "[circadia] wrote dataset with manifest {}",
        manifest_path.display()
    );
    Ok(())
}
