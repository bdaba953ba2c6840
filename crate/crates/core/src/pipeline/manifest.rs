//! Dataset manifests.
//!
//! A manifest is a CSV file with the columns
//! `id,path,rate_hz,group,label,baseline_score,followup_score`. Empty cells
//! are missing values. Every subject needs either a label or both scores,
//! not both. Paths are relative to the manifest's directory.
//!
//! Optional fields can also come from a sidecar `<manifest stem>.json`
//! holding `{"<id>": {"group": "F", "baseline_score": 30, ...}}`; sidecar
//! values fill cells left empty in the CSV.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::SubjectRecord;
use crate::error::{Error, Result};
use crate::signal::Recording;

use super::io::read_recording_csv;

pub const MAX_SCORE: f64 = 60.0;

/// Responder label from a baseline and a follow-up score: 1 when the
/// follow-up is at most half the baseline.
pub fn derive_label(baseline: f64, followup: f64) -> Result<u8> {
    for (name, v) in [("baseline", baseline), ("follow-up", followup)] {
        if !(0.0..=MAX_SCORE).contains(&v) {
            return Err(Error::invalid(format!("{name} score {v} outside 0..={MAX_SCORE}")));
        }
    }
    Ok(u8::from(followup <= 0.5 * baseline))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub rate_hz: f64,
    pub group: Option<String>,
    pub label: Option<u8>,
    pub baseline_score: Option<f64>,
    pub followup_score: Option<f64>,
}

impl ManifestEntry {
    pub fn resolved_label(&self) -> Result<u8> {
        match (self.label, self.baseline_score, self.followup_score) {
            (Some(l), None, None) if l <= 1 => Ok(l),
            (Some(l), None, None) => Err(Error::Manifest(format!("subject {}: label {l} is not 0/1", self.id))),
            (None, Some(b), Some(f)) => {
                derive_label(b, f).map_err(|e| Error::Manifest(format!("subject {}: {e}", self.id)))
            }
            (Some(_), _, _) => Err(Error::Manifest(format!(
                "subject {}: give either a label or a score pair, not both",
                self.id
            ))),
            _ => Err(Error::Manifest(format!(
                "subject {}: needs a label or both baseline_score and followup_score",
                self.id
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    group: Option<String>,
    label: Option<u8>,
    baseline_score: Option<f64>,
    followup_score: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct Row {
    id: String,
    path: String,
    rate_hz: f64,
    #[serde(default)]
    group: Option<String>,
    #[serde(default)]
    label: Option<u8>,
    #[serde(default)]
    baseline_score: Option<f64>,
    #[serde(default)]
    followup_score: Option<f64>,
}

fn manifest_err(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Manifest(format!("{}: {msg}", path.display()))
}

impl DatasetManifest {
    /// Reads and validates a manifest; every recording file must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| manifest_err(path, e))?;
        let sidecar_path = path.with_extension("json");
        let mut sidecar: BTreeMap<String, Sidecar> = if sidecar_path.exists() {
            let text = std::fs::read_to_string(&sidecar_path).map_err(|e| manifest_err(&sidecar_path, e))?;
            serde_json::from_str(&text).map_err(|e| manifest_err(&sidecar_path, e))?
        } else {
            BTreeMap::new()
        };
        let mut entries = Vec::new();
        for (i, row) in reader.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| manifest_err(path, format!("row {}: {e}", i + 2)))?;
            let extra = sidecar.remove(&row.id).unwrap_or_default();
            let p = PathBuf::from(&row.path);
            entries.push(ManifestEntry {
                path: if p.is_absolute() { p } else { base.join(p) },
                rate_hz: row.rate_hz,
                group: row.group.filter(|g| !g.is_empty()).or(extra.group),
                label: row.label.or(extra.label),
                baseline_score: row.baseline_score.or(extra.baseline_score),
                followup_score: row.followup_score.or(extra.followup_score),
                id: row.id,
            });
        }
        if let Some(id) = sidecar.keys().next() {
            return Err(manifest_err(&sidecar_path, format!("subject {id} is not in the manifest")));
        }
        let m = DatasetManifest { entries };
        m.validate().map_err(|e| match e {
            Error::Manifest(msg) => manifest_err(path, msg),
            e => e,
        })?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Manifest("no subjects".into()));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if e.id.is_empty() || e.id.contains(['/', '\\']) {
                return Err(Error::Manifest(format!("invalid subject id {:?}", e.id)));
            }
            if !seen.insert(&e.id) {
                return Err(Error::Manifest(format!("duplicate subject id {}", e.id)));
            }
            if !(e.rate_hz > 0.0 && e.rate_hz.is_finite()) {
                return Err(Error::Manifest(format!("subject {}: rate_hz must be positive", e.id)));
            }
            e.resolved_label()?;
            if !e.path.is_file() {
                return Err(Error::Manifest(format!("subject {}: {} does not exist", e.id, e.path.display())));
            }
        }
        Ok(())
    }

    /// Reads every recording into a subject record.
    pub fn load_subjects(&self) -> Result<Vec<SubjectRecord>> {
        self.entries
            .iter()
            .map(|e| {
                let rec: Recording = read_recording_csv(&e.path, e.rate_hz)?;
                Ok(SubjectRecord {
                    id: e.id.clone(),
                    recording: rec,
                    label: e.resolved_label()?,
                    group: e.group.clone(),
                    baseline_score: e.baseline_score,
                    followup_score: e.followup_score,
                })
            })
            .collect()
    }

    /// Writes the manifest CSV; paths are written as stored.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| manifest_err(path, e))?;
        w.write_record(["id", "path", "rate_hz", "group", "label", "baseline_score", "followup_score"])?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for e in &self.entries {
            w.write_record([
                e.id.clone(),
                e.path.display().to_string(),
                e.rate_hz.to_string(),
                opt(e.group.clone()),
                opt(e.label.map(|l| l.to_string())),
                opt(e.baseline_score.map(|v| v.to_string())),
                opt(e.followup_score.map(|v| v.to_string())),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
