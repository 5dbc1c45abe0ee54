//! Triplet corpus ingestion.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use super::TrainError;
use crate::chem::{detect_functional_groups, parse_smiles, FGMatch, FGPattern};

/// Shortest accepted text description, in characters.
pub const MIN_TEXT_CHARS: usize = 18;

#[derive(Debug, Clone, PartialEq)]
pub struct TripletRecord {
    pub id: String,
    pub smiles: String,
    pub text: String,
    pub hta: String,
    pub fg_matches: Vec<FGMatch>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    pub line: usize,
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RejectReport {
    pub rejects: Vec<Reject>,
}

impl RejectReport {
    pub fn len(&self) -> usize {
        self.rejects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rejects.is_empty()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    id: String,
    smiles: String,
    text: String,
    #[serde(default)]
    hta: Option<String>,
    #[serde(default)]
    hta_raw: Option<Value>,
}

/// Renders the `system → {path, description}` mapping as one
/// `system: path — description` line per system, systems sorted.
pub fn hta_flatten(raw: &Value) -> Result<String, TrainError> {
    let violation = |msg: String| TrainError::SchemaViolation(msg);
    let map = raw
        .as_object()
        .ok_or_else(|| violation("expected an object of classification systems".into()))?;
    let mut sorted = BTreeMap::new();
    for (system, entry) in map {
        let field = |name: &str| {
            entry
                .get(name)
                .and_then(Value::as_str)
                .ok_or_else(|| violation(format!("system {system:?}: missing string field {name:?}")))
        };
        if !entry.is_object() {
            return Err(violation(format!("system {system:?}: expected an object")));
        }
        sorted.insert(system.as_str(), format!("{system}: {} — {}", field("path")?, field("description")?));
    }
    Ok(sorted.into_values().collect::<Vec<_>>().join("\n"))
}

impl TripletRecord {
    /// Validates one record and precomputes its functional groups.
    /// `Err` carries the rejection reason.
    pub fn build(id: &str, smiles: &str, text: &str, hta: &str, library: &[FGPattern]) -> Result<Self, String> {
        let mol = parse_smiles(smiles).map_err(|e| format!("unparseable SMILES: {e}"))?;
        let n = text.chars().count();
        if n < MIN_TEXT_CHARS {
            return Err(format!("text has {n} characters, fewer than {MIN_TEXT_CHARS}"));
        }
        if hta.trim().is_empty() {
            return Err("empty HTA".into());
        }
        Ok(TripletRecord {
            id: id.to_string(),
            smiles: smiles.to_string(),
            text: text.to_string(),
            hta: hta.to_string(),
            fg_matches: detect_functional_groups(&mol, library),
        })
    }
}

/// Parses a JSON-lines corpus from memory. `origin` labels errors.
pub fn parse_triplets(
    text: &str,
    origin: &Path,
    library: &[FGPattern],
) -> Result<(Vec<TripletRecord>, RejectReport), TrainError> {
    let mut records = Vec::new();
    let mut report = RejectReport::default();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| TrainError::MalformedLine {
            path: origin.to_path_buf(),
            line: line_no,
            message,
        };
        let line: Line = serde_json::from_str(raw).map_err(|e| malformed(e.to_string()))?;
        let hta = match (&line.hta, &line.hta_raw) {
            (Some(h), _) => h.clone(),
            (None, Some(raw)) => hta_flatten(raw).map_err(|e| malformed(e.to_string()))?,
            (None, None) => return Err(malformed("record has neither \"hta\" nor \"hta_raw\"".into())),
        };
        let mut reject = |reason: String| {
            report.rejects.push(Reject {
                line: line_no,
                id: line.id.clone(),
                reason,
            })
        };
        if !seen.insert(line.id.clone()) {
            reject("duplicate id".into());
            continue;
        }
        match TripletRecord::build(&line.id, &line.smiles, &line.text, &hta, library) {
            Ok(r) => records.push(r),
            Err(reason) => reject(reason),
        }
    }
    if records.is_empty() {
        return Err(TrainError::EmptyCorpus {
            path: origin.to_path_buf(),
        });
    }
    Ok((records, report))
}

pub fn load_triplets(path: &Path, library: &[FGPattern]) -> Result<(Vec<TripletRecord>, RejectReport), TrainError> {
    let text = fs::read_to_string(path).map_err(|source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_triplets(&text, path, library)
}
