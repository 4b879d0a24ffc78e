//! CSV and JSON-lines datasets plus their label description and template
//! files.
//!
//! CSV rows hold a 1-based label followed by one or more text fields, which
//! are joined with `". "`. JSON-lines records carry `text`, an optional
//! 0-based `label` and an optional `id`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::corpus::{Document, LabelPromptSet, Vocabulary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    Jsonl,
    /// Generated in memory from the synthetic corpus settings.
    Synthetic,
}

impl std::str::FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "jsonl" => Ok(Self::Jsonl),
            "synthetic" => Ok(Self::Synthetic),
            _ => Err(format!("unknown dataset format {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub format: DatasetFormat,
    pub path: Option<PathBuf>,
    /// Zero-based CSV columns concatenated into the text; all columns after
    /// the label when unset.
    pub text_columns: Option<Vec<usize>>,
    pub label_column: usize,
    /// One label description per line.
    pub descriptions: Option<PathBuf>,
    /// One template per line, each with a single `[desc]` slot.
    pub templates: Option<PathBuf>,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            format: DatasetFormat::Synthetic,
            path: None,
            text_columns: None,
            label_column: 0,
            descriptions: None,
            templates: None,
        }
    }
}

/// A document before sentence splitting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub id: String,
    pub text: String,
    pub label: Option<usize>,
    pub line: u64,
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub documents: Vec<Document>,
    pub labels: LabelPromptSet,
    pub vocab: Vocabulary,
}

fn require<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Config(format!("dataset needs a {what} path")))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

/// Label descriptions and templates named by `spec`.
pub fn load_labels(spec: &DatasetSpec) -> Result<LabelPromptSet> {
    let descriptions = read_lines(require(&spec.descriptions, "descriptions")?)?;
    let templates = read_lines(require(&spec.templates, "templates")?)?;
    LabelPromptSet::new(descriptions, templates)
}

/// Records of a CSV or JSON-lines file, checked against `num_classes`.
pub fn read_records(spec: &DatasetSpec, num_classes: usize) -> Result<Vec<RawRecord>> {
    let path = require(&spec.path, "data")?;
    match spec.format {
        DatasetFormat::Csv => read_csv(path, spec, num_classes),
        DatasetFormat::Jsonl => read_jsonl(path, num_classes),
        DatasetFormat::Synthetic => Err(Error::Config("synthetic datasets are generated, not read".into())),
    }
}

fn read_csv(path: &Path, spec: &DatasetSpec, num_classes: usize) -> Result<Vec<RawRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::file(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut out = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let record = result.map_err(|e| Error::Parse {
            line: e.position().map_or(row as u64 + 1, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(row as u64 + 1, |p| p.line());
        let parse_err = |message: String| Error::Parse { line, message };

        let label_field = record
            .get(spec.label_column)
            .ok_or_else(|| parse_err(format!("missing label column {}", spec.label_column)))?;
        let label: i64 = label_field
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("label {label_field:?} is not an integer")))?;
        if label < 1 || label > num_classes as i64 {
            return Err(Error::LabelRange {
                line,
                label,
                min: 1,
                max: num_classes as i64,
            });
        }

        let columns: Vec<usize> = match &spec.text_columns {
            Some(cols) => cols.clone(),
            None => (0..record.len()).filter(|&c| c != spec.label_column).collect(),
        };
        if columns.is_empty() {
            return Err(parse_err("row has no text fields".into()));
        }
        let mut fields = Vec::with_capacity(columns.len());
        for c in columns {
            let field = record
                .get(c)
                .ok_or_else(|| parse_err(format!("missing text column {c}")))?
                .trim();
            if !field.is_empty() {
                fields.push(field);
            }
        }
        // inner fields lose a trailing period; the separator supplies it
        let last = fields.len().saturating_sub(1);
        let fields: Vec<&str> = fields
            .iter()
            .enumerate()
            .map(|(i, f)| if i < last { f.trim_end_matches('.') } else { f })
            .collect();
        out.push(RawRecord {
            id: row.to_string(),
            text: fields.join(". "),
            label: Some((label - 1) as usize),
            line,
        });
    }
    Ok(out)
}

#[derive(Deserialize)]
struct JsonRecord {
    text: String,
    #[serde(default)]
    label: Option<i64>,
    #[serde(default)]
    id: Option<serde_json::Value>,
}

fn read_jsonl(path: &Path, num_classes: usize) -> Result<Vec<RawRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord = serde_json::from_str(raw).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let label = match rec.label {
            None => None,
            Some(l) if (0..num_classes as i64).contains(&l) => Some(l as usize),
            Some(l) => {
                return Err(Error::LabelRange {
                    line,
                    label: l,
                    min: 0,
                    max: num_classes as i64 - 1,
                })
            }
        };
        let id = match rec.id {
            None => out.len().to_string(),
            Some(serde_json::Value::String(s)) => s,
            Some(v) => v.to_string(),
        };
        out.push(RawRecord {
            id,
            text: rec.text,
            label,
            line,
        });
    }
    Ok(out)
}

/// Sentence-splits and tokenizes records against `vocab`.
pub fn build_documents(records: &[RawRecord], vocab: &Vocabulary) -> Result<Vec<Document>> {
    records
        .iter()
        .map(|r| {
            Document::new(r.id.clone(), r.text.clone(), r.label, vocab).map_err(|e| match e {
                Error::EmptyDocument => Error::Parse {
                    line: r.line,
                    message: "empty document".into(),
                },
                other => other,
            })
        })
        .collect()
}

/// Vocabulary over the documents and rendered prompts.
pub fn build_vocabulary(records: &[RawRecord], labels: &LabelPromptSet) -> Vocabulary {
    Vocabulary::build(records.iter().map(|r| r.text.as_str()).chain(labels.texts()))
}

/// Reads the dataset, building the vocabulary from it when `vocab` is
/// `None`.
pub fn load_dataset_with_vocab(spec: &DatasetSpec, vocab: Option<&Vocabulary>) -> Result<LoadedDataset> {
    let labels = load_labels(spec)?;
    let records = read_records(spec, labels.num_classes())?;
    let vocab = match vocab {
        Some(v) => v.clone(),
        None => build_vocabulary(&records, &labels),
    };
    let documents = build_documents(&records, &vocab)?;
    Ok(LoadedDataset {
        documents,
        labels,
        vocab,
    })
}

pub fn load_dataset(spec: &DatasetSpec) -> Result<LoadedDataset> {
    load_dataset_with_vocab(spec, None)
}
