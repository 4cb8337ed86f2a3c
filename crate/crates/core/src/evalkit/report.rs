use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use crate::error::{Error, Result};
use crate::videoio::ClipRecord;

/// Band edges in bpm: low below 77, mid from 77 to 90 inclusive, high above 90.
pub const LOW_BELOW: f64 = 77.0;
pub const HIGH_ABOVE: f64 = 90.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HrBand {
    Low,
    Mid,
    High,
}

impl HrBand {
    pub const ALL: [HrBand; 3] = [HrBand::Low, HrBand::Mid, HrBand::High];

    pub fn of(hr: f64) -> HrBand {
        if hr < LOW_BELOW {
            HrBand::Low
        } else if hr <= HIGH_ABOVE {
            HrBand::Mid
        } else {
            HrBand::High
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HrBand::Low => "low",
            HrBand::Mid => "mid",
            HrBand::High => "high",
        }
    }
}

impl fmt::Display for HrBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn stratify_bands(gt: &[f64]) -> Vec<HrBand> {
    gt.iter().map(|&h| HrBand::of(h)).collect()
}

/// Predicted heart rate per sample id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Submission {
    entries: BTreeMap<String, f64>,
}

impl Submission {
    /// Builds a submission, rejecting duplicate ids and predictions outside (0, 300).
    pub fn new(rows: impl IntoIterator<Item = (String, f64)>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (id, hr) in rows {
            if id.is_empty() {
                return Err(Error::Validation("empty sample_id".into()));
            }
            if !(hr.is_finite() && hr > 0.0 && hr < 300.0) {
                return Err(Error::Validation(format!(
                    "prediction {hr} for {id} outside (0, 300)"
                )));
            }
            if entries.insert(id.clone(), hr).is_some() {
                return Err(Error::Validation(format!("duplicate sample_id {id}")));
            }
        }
        Ok(Submission { entries })
    }

    pub fn entries(&self) -> &BTreeMap<String, f64> {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.entries.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `sample_id,hr_bpm` CSV with rows in `order` (ids absent from it follow, sorted).
    pub fn to_csv_ordered(&self, order: &[String]) -> String {
        let mut out = String::from("sample_id,hr_bpm\n");
        let mut seen = BTreeSet::new();
        for id in order {
            if let Some(hr) = self.entries.get(id) {
                if seen.insert(id.as_str()) {
                    out.push_str(&format!("{id},{hr}\n"));
                }
            }
        }
        for (id, hr) in &self.entries {
            if !seen.contains(id.as_str()) {
                out.push_str(&format!("{id},{hr}\n"));
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        self.to_csv_ordered(&[])
    }

    pub fn parse(text: &str) -> Result<Submission> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Validation(format!("submission header: {e}")))?;
        if headers.iter().collect::<Vec<_>>() != ["sample_id", "hr_bpm"] {
            return Err(Error::Validation(format!(
                "submission header must be 'sample_id,hr_bpm', got {:?}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec =
                rec.map_err(|e| Error::Validation(format!("submission row {}: {e}", line + 2)))?;
            if rec.len() != 2 {
                return Err(Error::Validation(format!(
                    "submission row {} needs 2 fields",
                    line + 2
                )));
            }
            let hr: f64 = rec[1].parse().map_err(|_| {
                Error::Validation(format!(
                    "submission row {}: bad hr_bpm {:?}",
                    line + 2,
                    &rec[1]
                ))
            })?;
            rows.push((rec[0].to_string(), hr));
        }
        Submission::new(rows)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Submission> {
        let path = path.as_ref();
        Submission::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn write(&self, path: impl AsRef<Path>, order: &[String]) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_ordered(order)).map_err(|e| Error::io(path, e))
    }
}

/// Overall, per-database and per-band metrics. Empty strata are omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: Metrics,
    pub per_database: BTreeMap<String, Metrics>,
    pub per_band: BTreeMap<HrBand, Metrics>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn from_json(text: &str) -> Result<EvalReport> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("eval report: {e}")))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<EvalReport> {
        let path = path.as_ref();
        EvalReport::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Scores a submission against the labelled clips of a manifest. Ids unknown to
/// the manifest and labelled clips without a prediction are validation errors.
pub fn evaluate(sub: &Submission, manifest: &[ClipRecord]) -> Result<EvalReport> {
    let known: HashMap<&str, &ClipRecord> =
        manifest.iter().map(|r| (r.sample_id.as_str(), r)).collect();
    let unknown: Vec<&str> = sub
        .entries
        .keys()
        .map(String::as_str)
        .filter(|id| !known.contains_key(id))
        .collect();
    if !unknown.is_empty() {
        return Err(Error::Validation(format!(
            "unknown sample ids: {}",
            unknown.join(", ")
        )));
    }
    let labelled: Vec<&ClipRecord> = manifest
        .iter()
        .filter(|r| r.ground_truth_hr.is_some())
        .collect();
    let missing: Vec<&str> = labelled
        .iter()
        .map(|r| r.sample_id.as_str())
        .filter(|id| !sub.entries.contains_key(*id))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation(format!(
            "missing predictions for: {}",
            missing.join(", ")
        )));
    }
    if labelled.is_empty() {
        return Err(Error::Validation("manifest has no labelled clips".into()));
    }
    let pairs: Vec<(f64, f64, String, HrBand)> = labelled
        .iter()
        .map(|r| {
            let gt = r.ground_truth_hr.expect("filtered");
            (
                sub.entries[&r.sample_id],
                gt,
                r.database_tag.to_string(),
                HrBand::of(gt),
            )
        })
        .collect();
    let stratum = |keep: &dyn Fn(&(f64, f64, String, HrBand)) -> bool| -> Result<Option<Metrics>> {
        let (p, g): (Vec<f64>, Vec<f64>) =
            pairs.iter().filter(|x| keep(x)).map(|x| (x.0, x.1)).unzip();
        if p.is_empty() {
            Ok(None)
        } else {
            Metrics::compute(&p, &g).map(Some)
        }
    };
    let overall = stratum(&|_| true)?.expect("non-empty");
    let mut per_database = BTreeMap::new();
    let tags: BTreeSet<&str> = pairs.iter().map(|x| x.2.as_str()).collect();
    for tag in tags {
        if let Some(m) = stratum(&|x| x.2 == tag)? {
            per_database.insert(tag.to_string(), m);
        }
    }
    let mut per_band = BTreeMap::new();
    for band in HrBand::ALL {
        if let Some(m) = stratum(&|x| x.3 == band)? {
            per_band.insert(band, m);
        }
    }
    Ok(EvalReport {
        overall,
        per_database,
        per_band,
    })
}
