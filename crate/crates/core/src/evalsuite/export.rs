use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One exported embedding with its display label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRow {
    pub id: String,
    pub label: String,
    pub values: Vec<f64>,
}

/// Tab-separated `id  label  v0 .. vN` with a header row, for external
/// projection tools.
pub fn export_embeddings(path: &Path, rows: &[ExportRow]) -> Result<()> {
    let bytes = embeddings_to_tsv(rows)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// The bytes [`export_embeddings`] writes.
pub fn embeddings_to_tsv(rows: &[ExportRow]) -> Result<Vec<u8>> {
    let dim = rows.first().map_or(0, |r| r.values.len());
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(Vec::new());
    let ser = |e: csv::Error| Error::Ingest(format!("embedding export: {e}"));
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((0..dim).map(|i| format!("v{i}")));
    w.write_record(&header).map_err(ser)?;
    for r in rows {
        if r.values.len() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                actual: r.values.len(),
            });
        }
        let mut record = vec![r.id.clone(), r.label.clone()];
        record.extend(r.values.iter().map(f64::to_string));
        w.write_record(&record).map_err(ser)?;
    }
    w.into_inner()
        .map_err(|e| Error::Ingest(format!("embedding export: {e}")))
}

pub fn read_exported_embeddings(path: &Path) -> Result<Vec<ExportRow>> {
    let mut r = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let parse_err = |message: String| Error::Parse {
            line: line + 2,
            message,
        };
        if record.len() < 2 {
            return Err(parse_err("expected id and label columns".into()));
        }
        let values = record
            .iter()
            .skip(2)
            .map(|v| v.parse::<f64>().map_err(|e| parse_err(format!("{v:?}: {e}"))))
            .collect::<Result<_>>()?;
        rows.push(ExportRow {
            id: record[0].to_string(),
            label: record[1].to_string(),
            values,
        });
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Ingest(format!("{}: {e}", path.display()))
    }
}
