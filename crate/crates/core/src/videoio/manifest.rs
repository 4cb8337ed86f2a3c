use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which test source a clip came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DatabaseTag {
    A,
    B,
}

impl fmt::Display for DatabaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatabaseTag::A => "A",
            DatabaseTag::B => "B",
        })
    }
}

impl FromStr for DatabaseTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(DatabaseTag::A),
            "B" | "b" => Ok(DatabaseTag::B),
            other => Err(Error::Format(format!("unknown database tag {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClipRecord {
    pub sample_id: String,
    pub database_tag: DatabaseTag,
    pub ground_truth_hr: Option<f64>,
}

impl ClipRecord {
    pub fn new(
        sample_id: impl Into<String>,
        database_tag: DatabaseTag,
        ground_truth_hr: Option<f64>,
    ) -> Result<Self> {
        let sample_id = sample_id.into();
        if sample_id.is_empty() {
            return Err(Error::Invariant("sample_id must be non-empty".into()));
        }
        if let Some(hr) = ground_truth_hr {
            if !(hr > 0.0 && hr < 300.0) {
                return Err(Error::Invariant(format!(
                    "ground truth {hr} bpm for {sample_id} outside (0, 300)"
                )));
            }
        }
        Ok(ClipRecord {
            sample_id,
            database_tag,
            ground_truth_hr,
        })
    }
}

/// One manifest row. Relative paths resolve against the manifest's directory.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub record: ClipRecord,
    pub path: PathBuf,
    pub landmarks_path: Option<PathBuf>,
}

#[derive(Deserialize, Serialize)]
struct ManifestRow {
    sample_id: String,
    path: String,
    landmarks_path: String,
    database_tag: String,
    gt_hr: String,
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_manifest(&text, base)
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let expected = [
        "sample_id",
        "path",
        "landmarks_path",
        "database_tag",
        "gt_hr",
    ];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Format(format!(
            "manifest header must be {}, found {:?}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let resolve = |p: &str| {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for row in reader.deserialize::<ManifestRow>() {
        let row = row.map_err(|e| Error::Format(format!("manifest row: {e}")))?;
        if !seen.insert(row.sample_id.clone()) {
            return Err(Error::Validation(format!(
                "duplicate sample_id {}",
                row.sample_id
            )));
        }
        let gt = if row.gt_hr.is_empty() {
            None
        } else {
            Some(row.gt_hr.parse::<f64>().map_err(|_| {
                Error::Format(format!(
                    "gt_hr {:?} of {} is not a number",
                    row.gt_hr, row.sample_id
                ))
            })?)
        };
        let record = ClipRecord::new(row.sample_id, row.database_tag.parse()?, gt)
            .map_err(|e| Error::Validation(e.to_string()))?;
        entries.push(ManifestEntry {
            record,
            path: resolve(&row.path),
            landmarks_path: (!row.landmarks_path.is_empty()).then(|| resolve(&row.landmarks_path)),
        });
    }
    Ok(entries)
}

/// Writes a manifest; paths are stored relative to `base` when possible.
pub fn write_manifest(entries: &[ManifestEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let rel = |p: &Path| {
        p.strip_prefix(base)
            .unwrap_or(p)
            .to_string_lossy()
            .into_owned()
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in entries {
        w.serialize(ManifestRow {
            sample_id: e.record.sample_id.clone(),
            path: rel(&e.path),
            landmarks_path: e.landmarks_path.as_deref().map(rel).unwrap_or_default(),
            database_tag: e.record.database_tag.to_string(),
            gt_hr: e
                .record
                .ground_truth_hr
                .map(|v| format!("{v}"))
                .unwrap_or_default(),
        })?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Format(format!("manifest csv: {e}")))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
