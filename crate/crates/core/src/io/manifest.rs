//! JSON-lines sample manifests tying feature rows to labels or positions.
//!
//! ```text
//! {"task":"har","k":2048,"classes":7,"features":"har.fvec"}
//! {"id":"g0","feature_row":0,"label":3}
//! ```
//!
//! Localisation rows carry `"position":[x,y]` and `"power"` instead of `label`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Har,
    Loc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestHeader {
    pub task: TaskKind,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
    /// Companion feature file, relative to the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub feature_row: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 2]>,
    /// Channel power side input for localisation heads.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Checks every entry against the header and a feature file of `feature_count` rows.
    pub fn validate(&self, feature_count: usize) -> Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            self.check_entry(e, feature_count).map_err(|msg| Error::parse(i + 2, 1, msg))?;
        }
        Ok(())
    }

    fn check_entry(&self, e: &ManifestEntry, feature_count: usize) -> std::result::Result<(), String> {
        if e.feature_row >= feature_count {
            return Err(format!(
                "feature_row {} out of range for {feature_count} feature rows",
                e.feature_row
            ));
        }
        match self.header.task {
            TaskKind::Har => {
                let label = e.label.ok_or("entry has no label")?;
                let classes = self.header.classes.unwrap_or(crate::io::HAR_CLASSES);
                if label >= classes {
                    return Err(format!("label {label} outside [0, {classes})"));
                }
            }
            TaskKind::Loc => {
                let p = e.position.ok_or("entry has no position")?;
                if !p.iter().all(|v| v.is_finite()) {
                    return Err("position is not finite".into());
                }
                if let Some(pw) = e.power {
                    if !(pw.is_finite() && pw >= 0.0) {
                        return Err("power must be finite and non-negative".into());
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut s = serde_json::to_string(&self.header).map_err(|e| Error::domain(e.to_string()))?;
        s.push('\n');
        for e in &self.entries {
            let line = serde_json::to_string(e).map_err(|e| Error::domain(e.to_string()))?;
            writeln!(s, "{line}").expect("string write");
        }
        Ok(s)
    }

    /// Parses without cross-checking against a feature file.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header_line) = lines.next().ok_or_else(|| Error::parse(1, 1, "manifest is empty"))?;
        let header: ManifestHeader =
            serde_json::from_str(header_line).map_err(|e| Error::parse(hl + 1, e.column(), e.to_string()))?;
        let entries = lines
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(i + 1, e.column(), e.to_string())))
            .collect::<Result<Vec<ManifestEntry>>>()?;
        Ok(Manifest { header, entries })
    }
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    std::fs::write(path, manifest.to_jsonl()?).map_err(|e| Error::file(path, e))
}

/// Reads a manifest and validates it against a feature file with `feature_count` rows.
pub fn read_manifest(path: &Path, feature_count: usize) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let m = Manifest::from_jsonl(&text)?;
    m.validate(feature_count)?;
    Ok(m)
}
