pub mod agreement;
pub mod chronotype;
pub mod metrics;
pub mod synth;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use circadia_core::manifest::CohortManifest;

use crate::config::RunConfig;

/// Resolves the manifest path from config/CLI and loads it.
pub fn load_manifest(config: &RunConfig) -> Result<(CohortManifest, PathBuf)> {
    let Some(path) = &config.manifest else {
        bail!("no manifest configured; pass --manifest or set `manifest` in the config");
    };
    let manifest = CohortManifest::load(path)
        .with_context(|| format!("loading manifest {}", path.display()))?;
    if manifest.participants.is_empty() {
        bail!("manifest {} lists no participants", path.display());
    }
    Ok((manifest, path.clone()))
}

pub fn ensure_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))
}

/// Simple plot-descriptor JSON: names the data files and their axes so a
/// downstream renderer needs no knowledge of the schemas.
#[derive(serde::Serialize)]
pub struct PlotDescriptor {
    pub name: String,
    pub kind: String,
    pub data: String,
    pub x: String,
    pub y: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group_by: Option<String>,
}

pub fn write_plots(
    summary: &mut crate::summary::RunSummary,
    out: &Path,
    plots: Vec<PlotDescriptor>,
) -> Result<()> {
    #[derive(serde::Serialize)]
    struct Plots {
        schema_version: u32,
        plots: Vec<PlotDescriptor>,
    }
    let body = serde_json::to_string_pretty(&Plots {
        schema_version: 1,
        plots,
    })
    .expect("plots serialize");
    crate::summary::write_output(summary, out, "plots.json", &(body + "\n"))
}
