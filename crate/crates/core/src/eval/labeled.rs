//! Binary-labeled molecule sets: CSV with header `id,smiles,label` and an
//! optional `split` column (`train`, `val` or `test`).

use std::collections::HashSet;
use std::path::Path;

use serde::Deserialize;

use super::EvalError;
use crate::train::{split_indices, SplitMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitName {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledItem {
    pub id: String,
    pub smiles: String,
    pub label: bool,
    pub split: SplitName,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledSet {
    pub items: Vec<LabeledItem>,
}

impl LabeledSet {
    pub fn part(&self, split: SplitName) -> Vec<&LabeledItem> {
        self.items.iter().filter(|i| i.split == split).collect()
    }
}

#[derive(Deserialize)]
struct Row {
    id: String,
    smiles: String,
    label: String,
    split: Option<String>,
}

/// Parses labeled CSV text. Rows without a split are assigned by an
/// 80/10/10 scaffold split.
pub fn parse_labeled(text: &str, seed: u64) -> Result<LabeledSet, EvalError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut items = Vec::new();
    let mut seen = HashSet::new();
    let mut unassigned = Vec::new();
    for (k, row) in reader.deserialize::<Row>().enumerate() {
        let line = k + 2;
        let bad = |message: String| EvalError::MalformedLine { line, message };
        let row = row.map_err(|e| bad(e.to_string()))?;
        let label = match row.label.as_str() {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("label must be 0 or 1, got {other:?}"))),
        };
        if !seen.insert(row.id.clone()) {
            return Err(bad(format!("duplicate id {:?}", row.id)));
        }
        let split = match row.split.as_deref().unwrap_or("") {
            "" => {
                unassigned.push(items.len());
                SplitName::Train
            }
            "train" => SplitName::Train,
            "val" => SplitName::Val,
            "test" => SplitName::Test,
            other => return Err(bad(format!("unknown split {other:?}"))),
        };
        items.push(LabeledItem {
            id: row.id,
            smiles: row.smiles,
            label,
            split,
        });
    }
    if items.is_empty() {
        return Err(EvalError::Empty);
    }
    if !unassigned.is_empty() {
        let smiles: Vec<&str> = unassigned.iter().map(|&i| items[i].smiles.as_str()).collect();
        let parts = split_indices(&smiles, SplitMode::Scaffold, [0.8, 0.1, 0.1], seed)
            .map_err(|e| EvalError::DegenerateLabels(e.to_string()))?;
        for (name, part) in [SplitName::Train, SplitName::Val, SplitName::Test].into_iter().zip(parts) {
            for j in part {
                items[unassigned[j]].split = name;
            }
        }
    }
    Ok(LabeledSet { items })
}

pub fn load_labeled(path: &Path, seed: u64) -> Result<LabeledSet, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_labeled(&text, seed)
}
