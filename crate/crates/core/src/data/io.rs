//! File formats: JSON item banks, CSV matrices and value tables, and
//! line-delimited JSON records.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{RawSurvey, ResponseMatrix};
use crate::error::{Error, Result};
use crate::irt::{DichotomousItem, GradedItem, Item, ItemBank, ItemKind};

const BANK_FORMAT: &str = "augcat-item-bank";
const BANK_VERSION: u32 = 1;
pub const RESPONDENT_COLUMN: &str = "respondent_id";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BankDocument {
    format: String,
    version: u32,
    items: Vec<ItemRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ItemRecord {
    Dichotomous {
        id: String,
        a: f64,
        b: f64,
        frozen: bool,
    },
    Graded {
        id: String,
        a: f64,
        thresholds: [f64; 4],
        frozen: bool,
    },
}

fn json_parse_error(path: &str, e: serde_json::Error) -> Error {
    Error::Parse {
        path: path.to_string(),
        line: e.line() as u64,
        column: e.column() as u64,
        message: e.to_string(),
    }
}

pub fn bank_to_json(bank: &ItemBank) -> String {
    let doc = BankDocument {
        format: BANK_FORMAT.into(),
        version: BANK_VERSION,
        items: bank
            .items()
            .iter()
            .zip(bank.frozen_flags())
            .map(|(item, &frozen)| match item {
                Item::Dichotomous(d) => ItemRecord::Dichotomous {
                    id: d.id.clone(),
                    a: d.a,
                    b: d.b,
                    frozen,
                },
                Item::Graded(g) => ItemRecord::Graded {
                    id: g.id.clone(),
                    a: g.a,
                    thresholds: g.thresholds,
                    frozen,
                },
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("bank serializes") + "\n"
}

pub fn bank_from_json(text: &str, source: &str) -> Result<ItemBank> {
    let doc: BankDocument = serde_json::from_str(text).map_err(|e| json_parse_error(source, e))?;
    if doc.format != BANK_FORMAT || doc.version != BANK_VERSION {
        return Err(Error::Schema {
            path: source.to_string(),
            message: format!("unsupported bank format {} v{}", doc.format, doc.version),
        });
    }
    let (items, frozen) = doc
        .items
        .into_iter()
        .map(|r| match r {
            ItemRecord::Dichotomous { id, a, b, frozen } => (Item::Dichotomous(DichotomousItem { id, a, b }), frozen),
            ItemRecord::Graded {
                id,
                a,
                thresholds,
                frozen,
            } => (Item::Graded(GradedItem { id, a, thresholds }), frozen),
        })
        .unzip();
    ItemBank::new(items, frozen)
}

pub fn save_bank(path: &Path, bank: &ItemBank) -> Result<()> {
    fs::write(path, bank_to_json(bank))?;
    Ok(())
}

pub fn load_bank(path: &Path) -> Result<ItemBank> {
    bank_from_json(&fs::read_to_string(path)?, &path.display().to_string())
}

/// Expected matrix columns when reading a CSV.
#[derive(Debug, Clone, Copy)]
pub enum ColumnSchema<'a> {
    /// Every non-id column, of one kind, in file order.
    AllOf(ItemKind),
    /// Exactly these columns (any file order); output follows this order.
    Exact(&'a [(String, ItemKind)]),
}

pub fn write_matrix_csv(path: &Path, matrix: &ResponseMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header = vec![RESPONDENT_COLUMN.to_string()];
    header.extend(matrix.item_ids().iter().cloned());
    w.write_record(&header).map_err(csv_io)?;
    for (id, row) in matrix.respondent_ids().iter().zip(matrix.rows()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn csv_parse(path: &str, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        path: path.to_string(),
        line,
        column: 0,
        message: e.to_string(),
    }
}

fn read_header(path: &str, reader: &mut csv::Reader<BufReader<File>>) -> Result<Vec<String>> {
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_parse(path, e))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header.first().map(String::as_str) != Some(RESPONDENT_COLUMN) {
        return Err(Error::Schema {
            path: path.to_string(),
            message: format!("first column must be `{RESPONDENT_COLUMN}`"),
        });
    }
    Ok(header)
}

pub fn read_matrix_csv(path: &Path, schema: ColumnSchema<'_>) -> Result<ResponseMatrix> {
    let label = path.display().to_string();
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let header = read_header(&label, &mut reader)?;
    let columns: Vec<(String, ItemKind)> = match schema {
        ColumnSchema::AllOf(kind) => header[1..].iter().map(|h| (h.clone(), kind)).collect(),
        ColumnSchema::Exact(expected) => {
            let mut cols = Vec::with_capacity(header.len() - 1);
            for h in &header[1..] {
                let kind = expected
                    .iter()
                    .find(|(id, _)| id == h)
                    .map(|(_, k)| *k)
                    .ok_or_else(|| Error::Schema {
                        path: label.clone(),
                        message: format!("unknown column `{h}`"),
                    })?;
                cols.push((h.clone(), kind));
            }
            if let Some((missing, _)) = expected.iter().find(|(id, _)| !header[1..].contains(id)) {
                return Err(Error::Schema {
                    path: label,
                    message: format!("missing column `{missing}`"),
                });
            }
            cols
        }
    };
    let mut ids = Vec::new();
    let mut cells = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_parse(&label, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        ids.push(record[0].trim().to_string());
        for (j, (id, kind)) in columns.iter().enumerate() {
            let raw = record[j + 1].trim();
            let cell = if raw.is_empty() || raw == "NA" {
                None
            } else {
                match raw.parse::<u8>() {
                    Ok(v) if kind.accepts(v) => Some(v),
                    _ => {
                        return Err(Error::Parse {
                            path: label,
                            line,
                            column: j as u64 + 2,
                            message: format!("`{raw}` is not a valid {kind:?} response for `{id}`"),
                        })
                    }
                }
            };
            cells.push(cell);
        }
    }
    let matrix = ResponseMatrix::new(ids, columns, cells)?;
    match schema {
        ColumnSchema::AllOf(_) => Ok(matrix),
        ColumnSchema::Exact(expected) => {
            let order: Vec<&str> = expected.iter().map(|(id, _)| id.as_str()).collect();
            matrix.select_items(&order)
        }
    }
}

/// Two-column table `respondent_id,<name>` of floating-point values.
pub fn write_values_csv(path: &Path, name: &str, ids: &[String], values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record([RESPONDENT_COLUMN, name]).map_err(csv_io)?;
    for (id, v) in ids.iter().zip(values) {
        w.write_record([id.as_str(), &v.to_string()]).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_values_csv(path: &Path, name: &str) -> Result<(Vec<String>, Vec<f64>)> {
    let label = path.display().to_string();
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let header = read_header(&label, &mut reader)?;
    if header.len() != 2 || header[1] != name {
        return Err(Error::Schema {
            path: label,
            message: format!("expected columns `{RESPONDENT_COLUMN},{name}`"),
        });
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_parse(&label, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        ids.push(record[0].to_string());
        values.push(record[1].trim().parse::<f64>().map_err(|e| Error::Parse {
            path: label.clone(),
            line,
            column: 2,
            message: e.to_string(),
        })?);
    }
    Ok((ids, values))
}

/// Raw 0–10 ratings: `respondent_id`, item columns, and optionally an
/// external criterion column.
pub fn read_ratings_csv(path: &Path, reverse_keyed: &[String], external_column: Option<&str>) -> Result<RawSurvey> {
    let label = path.display().to_string();
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let header = read_header(&label, &mut reader)?;
    let external_idx = match external_column {
        Some(name) => Some(header.iter().position(|h| h == name).ok_or_else(|| Error::Schema {
            path: label.clone(),
            message: format!("missing column `{name}`"),
        })?),
        None => None,
    };
    let item_cols: Vec<usize> = (1..header.len()).filter(|&j| Some(j) != external_idx).collect();
    let mut survey = RawSurvey {
        respondent_ids: Vec::new(),
        item_ids: item_cols.iter().map(|&j| header[j].clone()).collect(),
        rows: Vec::new(),
        reverse_keyed: reverse_keyed.to_vec(),
        external: external_idx.map(|_| Vec::new()),
    };
    for record in reader.records() {
        let record = record.map_err(|e| csv_parse(&label, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        survey.respondent_ids.push(record[0].trim().to_string());
        let mut row = Vec::with_capacity(item_cols.len());
        for &j in &item_cols {
            let raw = record[j].trim();
            row.push(if raw.is_empty() || raw == "NA" {
                None
            } else {
                Some(raw.parse::<i64>().map_err(|e| Error::Parse {
                    path: label.clone(),
                    line,
                    column: j as u64 + 1,
                    message: format!("`{raw}`: {e}"),
                })?)
            });
        }
        survey.rows.push(row);
        if let (Some(j), Some(ext)) = (external_idx, survey.external.as_mut()) {
            ext.push(record[j].trim().parse::<f64>().map_err(|e| Error::Parse {
                path: label.clone(),
                line,
                column: j as u64 + 1,
                message: e.to_string(),
            })?);
        }
    }
    Ok(survey)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        writeln!(w, "{}", serde_json::to_string(r)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let label = path.display().to_string();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: label.clone(),
            line: i as u64 + 1,
            column: e.column() as u64,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| json_parse_error(&path.display().to_string(), e))
}
