use std::collections::HashSet;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::pattern::{PatternError, QueryGraph};

const DEFAULT_LIBRARY: &str = include_str!("../../data/fg_library.jsonl");

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: pattern '{pattern}' does not parse: {source}")]
    BadPattern {
        line: usize,
        pattern: String,
        source: PatternError,
    },
    #[error("line {line}: duplicate id '{id}'")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: description is empty")]
    EmptyDescription { line: usize },
    #[error("library has no patterns")]
    Empty,
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LibraryLine {
    id: String,
    name: String,
    pattern: String,
    description: String,
}

/// One functional-group definition with its compiled query.
#[derive(Debug, Clone, PartialEq)]
pub struct FGPattern {
    pub id: String,
    pub name: String,
    pub pattern: String,
    pub description: String,
    pub query: QueryGraph,
}

impl FGPattern {
    pub fn new(id: &str, name: &str, pattern: &str, description: &str) -> Result<FGPattern, PatternError> {
        Ok(FGPattern {
            id: id.to_string(),
            name: name.to_string(),
            pattern: pattern.to_string(),
            description: description.to_string(),
            query: QueryGraph::parse(pattern)?,
        })
    }
}

/// Parses a JSON-lines library. Blank lines are skipped.
pub fn parse_library(text: &str) -> Result<Vec<FGPattern>, LibraryError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: LibraryLine = serde_json::from_str(raw).map_err(|e| LibraryError::MalformedLine {
            line,
            message: e.to_string(),
        })?;
        if rec.description.trim().is_empty() {
            return Err(LibraryError::EmptyDescription { line });
        }
        if !ids.insert(rec.id.clone()) {
            return Err(LibraryError::DuplicateId { line, id: rec.id });
        }
        let query = QueryGraph::parse(&rec.pattern).map_err(|source| LibraryError::BadPattern {
            line,
            pattern: rec.pattern.clone(),
            source,
        })?;
        out.push(FGPattern {
            id: rec.id,
            name: rec.name,
            pattern: rec.pattern,
            description: rec.description,
            query,
        });
    }
    if out.is_empty() {
        return Err(LibraryError::Empty);
    }
    Ok(out)
}

pub fn load_library(path: &Path) -> Result<Vec<FGPattern>, LibraryError> {
    let text = std::fs::read_to_string(path).map_err(|source| LibraryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_library(&text)
}

/// The bundled library. It is a hand-curated stand-in, not a published
/// reference list.
pub fn default_library() -> Vec<FGPattern> {
    parse_library(DEFAULT_LIBRARY).expect("bundled functional-group library is valid")
}
