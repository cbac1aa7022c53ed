//! Cohort manifest: the JSON index describing each participant's files,
//! collection window, timezone offset and MEQ administrations.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortManifest {
    pub schema_version: u32,
    pub participants: Vec<ParticipantEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParticipantEntry {
    pub id: String,
    /// Fixed UTC offset in seconds applied to all of this participant's
    /// timestamps when clock hours matter.
    pub utc_offset_s: i64,
    pub collection_start_ms: i64,
    pub collection_end_ms: i64,
    /// MEQ administrations as (study day, score) pairs.
    pub meq_administrations: Vec<(u32, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<f64>,
    /// 0 female, 1 male.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sex: Option<u8>,
    pub files: SignalFiles,
}

/// Per-signal file paths, relative to the manifest location.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SignalFiles {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub watch_accel: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_accel: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rri: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hr: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<PathBuf>,
}

impl SignalFiles {
    /// All present (label, path) pairs in a fixed order.
    pub fn present(&self) -> Vec<(&'static str, &Path)> {
        let mut out = Vec::new();
        if let Some(p) = &self.watch_accel {
            out.push(("watch_accel", p.as_path()));
        }
        if let Some(p) = &self.ref_accel {
            out.push(("ref_accel", p.as_path()));
        }
        if let Some(p) = &self.rri {
            out.push(("rri", p.as_path()));
        }
        if let Some(p) = &self.hr {
            out.push(("hr", p.as_path()));
        }
        if let Some(p) = &self.temperature {
            out.push(("temperature", p.as_path()));
        }
        out
    }
}

impl CohortManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<CohortManifest> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let manifest: CohortManifest = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.display().to_string(),
            source: e,
        })?;
        if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported manifest schema_version {} (supported: {MANIFEST_SCHEMA_VERSION})",
                manifest.schema_version
            )));
        }
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Resolves a participant's file paths relative to the manifest's
    /// directory.
    pub fn resolve(&self, manifest_path: &Path, relative: &Path) -> PathBuf {
        if relative.is_absolute() {
            relative.to_path_buf()
        } else {
            manifest_path
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join(relative)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips_through_json() {
        let m = CohortManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            participants: vec![ParticipantEntry {
                id: "p01".into(),
                utc_offset_s: 7200,
                collection_start_ms: 1_699_920_000_000,
                collection_end_ms: 1_700_092_800_000,
                meq_administrations: vec![(0, 52.0), (7, 54.0), (14, 50.0)],
                age: Some(31.0),
                sex: Some(0),
                files: SignalFiles {
                    watch_accel: Some("p01/watch_accel.csv".into()),
                    ref_accel: None,
                    rri: Some("p01/rri.csv".into()),
                    hr: None,
                    temperature: Some("p01/temperature.csv".into()),
                },
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        m.save(&path).unwrap();
        let loaded = CohortManifest::load(&path).unwrap();
        assert_eq!(loaded.participants.len(), 1);
        let p = &loaded.participants[0];
        assert_eq!(p.id, "p01");
        assert_eq!(p.utc_offset_s, 7200);
        assert_eq!(p.files.present().len(), 3);
        let resolved = loaded.resolve(&path, p.files.rri.as_ref().unwrap());
        assert!(resolved.ends_with("p01/rri.csv"));
        assert!(resolved.starts_with(dir.path()));
    }

    #[test]
    fn manifest_rejects_unknown_schema_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        std::fs::write(&path, r#"{"schema_version": 99, "participants": []}"#).unwrap();
        assert!(CohortManifest::load(&path).is_err());
    }
}
