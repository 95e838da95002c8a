//! Dataset ingestion: line-delimited JSON manifests of
//! (table_id, statement, label, channel) plus a directory of table files.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{load_table_file, Table, TableError};
use crate::verifier::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Simple,
    Complex,
    Unknown,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Simple => "simple",
            Channel::Complex => "complex",
            Channel::Unknown => "unknown",
        }
    }
}

/// One verification sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub table_id: String,
    pub statement: String,
    pub label: Label,
    pub channel: Channel,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest line {line}: {message}")]
    ManifestParse { line: usize, message: String },
    #[error("missing tables:\n{}", format_missing(.0))]
    MissingTables(Vec<(usize, String)>),
    #[error("table {id:?}: {source}")]
    Table { id: String, source: TableError },
}

fn format_missing(entries: &[(usize, String)]) -> String {
    let mut out = String::new();
    for (line, id) in entries {
        let _ = writeln!(out, "  line {line}: table {id:?} not found");
    }
    out
}

#[derive(Deserialize)]
struct ManifestRecord {
    table_id: String,
    statement: String,
    label: String,
    #[serde(default)]
    channel: Option<String>,
}

/// A prediction line as written by `eval --out`.
#[derive(Debug, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub index: usize,
    pub table_id: String,
    pub gold: String,
    pub predicted: String,
    pub p_entailed: f64,
    /// True when the pipeline failed and the default label was emitted.
    pub failed: bool,
}

/// Resolve a table id to a file: exact name, then `.csv`, then `.tbl`.
pub fn resolve_table_path(tables_dir: &Path, id: &str) -> Option<PathBuf> {
    let direct = tables_dir.join(id);
    if direct.is_file() {
        return Some(direct);
    }
    for ext in ["csv", "tbl"] {
        let p = tables_dir.join(format!("{id}.{ext}"));
        if p.is_file() {
            return Some(p);
        }
    }
    None
}

/// Parse a manifest and check every referenced table file exists.
/// Missing tables are collected with their manifest line numbers.
pub fn load_dataset(
    manifest: &Path,
    tables_dir: &Path,
) -> Result<Vec<Sample>, DatasetError> {
    let text = std::fs::read_to_string(manifest)?;
    let mut samples = Vec::new();
    let mut missing = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: ManifestRecord =
            serde_json::from_str(line).map_err(|e| DatasetError::ManifestParse {
                line: line_no,
                message: e.to_string(),
            })?;
        let label = Label::parse(&record.label).ok_or_else(|| DatasetError::ManifestParse {
            line: line_no,
            message: format!("unknown label {:?}", record.label),
        })?;
        let channel = match record.channel.as_deref() {
            Some("simple") => Channel::Simple,
            Some("complex") => Channel::Complex,
            None | Some("") => Channel::Unknown,
            Some(other) => {
                return Err(DatasetError::ManifestParse {
                    line: line_no,
                    message: format!("unknown channel {other:?}"),
                })
            }
        };
        if resolve_table_path(tables_dir, &record.table_id).is_none() {
            missing.push((line_no, record.table_id.clone()));
        }
        samples.push(Sample {
            table_id: record.table_id,
            statement: record.statement,
            label,
            channel,
        });
    }
    if !missing.is_empty() {
        return Err(DatasetError::MissingTables(missing));
    }
    Ok(samples)
}

/// Load every table a sample set references, once each.
pub fn load_tables(
    samples: &[Sample],
    tables_dir: &Path,
    delimiter: char,
) -> Result<HashMap<String, Table>, DatasetError> {
    let mut tables = HashMap::new();
    for s in samples {
        if tables.contains_key(&s.table_id) {
            continue;
        }
        let path = resolve_table_path(tables_dir, &s.table_id).ok_or_else(|| {
            DatasetError::MissingTables(vec![(0, s.table_id.clone())])
        })?;
        let mut table = load_table_file(&path, delimiter).map_err(|source| {
            DatasetError::Table {
                id: s.table_id.clone(),
                source,
            }
        })?;
        table.id = s.table_id.clone();
        tables.insert(s.table_id.clone(), table);
    }
    Ok(tables)
}

/// Write samples as a manifest (JSON lines).
pub fn write_manifest(samples: &[Sample], path: &Path) -> Result<(), DatasetError> {
    let mut out = String::new();
    for s in samples {
        let rec = serde_json::json!({
            "table_id": s.table_id,
            "statement": s.statement,
            "label": s.label.as_str(),
            "channel": s.channel.as_str(),
        });
        let _ = writeln!(out, "{rec}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn loads_valid_manifest() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("tables")).unwrap();
        write(&dir.path().join("tables"), "t1.csv", "a#b\n1#2\n");
        let manifest = write(
            dir.path(),
            "train.jsonl",
            r#"{"table_id":"t1","statement":"a be 1","label":"ENTAILED","channel":"simple"}
{"table_id":"t1","statement":"b be 3","label":"REFUTED"}
"#,
        );
        let samples = load_dataset(&manifest, &dir.path().join("tables")).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].channel, Channel::Simple);
        assert_eq!(samples[1].channel, Channel::Unknown);
        assert_eq!(samples[1].label, Label::Refuted);
        let tables = load_tables(&samples, &dir.path().join("tables"), '#').unwrap();
        assert_eq!(tables.len(), 1);
        assert_eq!(tables["t1"].id, "t1");
    }

    #[test]
    fn empty_manifest_is_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write(dir.path(), "empty.jsonl", "");
        assert!(load_dataset(&manifest, dir.path()).unwrap().is_empty());
    }

    #[test]
    fn missing_tables_reported_with_lines() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write(
            dir.path(),
            "m.jsonl",
            r#"{"table_id":"absent","statement":"x","label":"ENTAILED"}
{"table_id":"also-absent","statement":"y","label":"REFUTED"}
"#,
        );
        match load_dataset(&manifest, dir.path()) {
            Err(DatasetError::MissingTables(missing)) => {
                assert_eq!(
                    missing,
                    vec![(1, "absent".to_string()), (2, "also-absent".to_string())]
                );
            }
            other => panic!("expected missing tables, got {other:?}"),
        }
    }

    #[test]
    fn bad_json_and_bad_label_report_line() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write(dir.path(), "m.jsonl", "{ not json\n");
        match load_dataset(&manifest, dir.path()) {
            Err(DatasetError::ManifestParse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        let manifest = write(
            dir.path(),
            "m2.jsonl",
            r#"{"table_id":"t","statement":"x","label":"MAYBE"}"#,
        );
        assert!(matches!(
            load_dataset(&manifest, dir.path()),
            Err(DatasetError::ManifestParse { line: 1, .. })
        ));
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("t9.csv"), "a\nx\n").unwrap();
        let samples = vec![Sample {
            table_id: "t9".into(),
            statement: "the a be x".into(),
            label: Label::Entailed,
            channel: Channel::Complex,
        }];
        let path = dir.path().join("out.jsonl");
        write_manifest(&samples, &path).unwrap();
        let back = load_dataset(&path, dir.path()).unwrap();
        assert_eq!(back, samples);
    }
}
