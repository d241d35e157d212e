//! JSON-lines records exchanged between pipeline stages and with the
//! neural scorer.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{EntityId, RelationId};

#[derive(Debug, Error)]
pub enum InterchangeError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Scored candidates for one query: `{"h": id, "r": id, "candidates": [[entity, score], ...]}`.
/// Used for both logical and neural exports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub h: EntityId,
    pub r: RelationId,
    pub candidates: Vec<(EntityId, f64)>,
}

/// Fused ranking for one query: `{"h": id, "r": id, "ranking": [[entity, score], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRecord {
    pub h: EntityId,
    pub r: RelationId,
    pub ranking: Vec<(EntityId, f64)>,
}

/// Explanations for one answer of one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub h: EntityId,
    pub r: RelationId,
    pub entity: EntityId,
    pub rank: usize,
    pub explanations: Vec<String>,
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), InterchangeError> {
    let io_err = |source| InterchangeError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    for record in records {
        serde_json::to_writer(&mut out, record).map_err(|e| InterchangeError::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, InterchangeError> {
    let io_err = |source| InterchangeError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| InterchangeError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidate_record_wire_format() {
        let rec = CandidateRecord {
            h: EntityId(3),
            r: RelationId(1),
            candidates: vec![(EntityId(7), 0.5), (EntityId(2), 0.25)],
        };
        let text = serde_json::to_string(&rec).unwrap();
        assert_eq!(text, r#"{"h":3,"r":1,"candidates":[[7,0.5],[2,0.25]]}"#);
        let back: CandidateRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn jsonl_reports_bad_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        std::fs::write(&path, "{\"h\":0,\"r\":0,\"ranking\":[]}\n\nnot json\n").unwrap();
        let err = read_jsonl::<RankingRecord>(&path).unwrap_err();
        assert!(matches!(err, InterchangeError::Json { line: 3, .. }));
    }
}
