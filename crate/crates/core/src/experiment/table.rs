//! Reading back the CSV files written by the runners.

use std::path::Path;

use super::run::{OPTIMUM_SCHEMA, SWEEP_SCHEMA};
use super::ExperimentError;

/// A parsed result file: `# key: value` header lines, then a CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub origin: String,
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn read(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, ExperimentError> {
        let malformed = |message: String| ExperimentError::MalformedCsv {
            origin: origin.to_string(),
            message,
        };
        let mut meta = Vec::new();
        let mut body_start = 0;
        for line in text.split_inclusive('\n') {
            let Some(comment) = line.strip_prefix('#') else {
                break;
            };
            body_start += line.len();
            if let Some((k, v)) = comment.split_once(':') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
        }

        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text[body_start..].as_bytes());
        let columns: Vec<String> = reader
            .headers()
            .map_err(|e| malformed(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if columns.iter().all(|c| c.is_empty()) {
            return Err(malformed("missing column header".into()));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| malformed(e.to_string()))?;
            rows.push(record.iter().map(str::to_string).collect());
        }

        let table = CsvTable {
            origin: origin.to_string(),
            meta,
            columns,
            rows,
        };
        match table.meta("schema") {
            Some(SWEEP_SCHEMA) | Some(OPTIMUM_SCHEMA) => {}
            Some(other) => return Err(malformed(format!("unknown schema {other:?}"))),
            None => return Err(malformed("missing schema header".into())),
        }
        if table.column("sweep_value").is_none() {
            return Err(malformed("missing sweep_value column".into()));
        }
        Ok(table)
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn schema(&self) -> &str {
        self.meta("schema").unwrap_or_default()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric column; empty cells are `None`.
    pub fn values(&self, name: &str) -> Result<Vec<Option<f64>>, ExperimentError> {
        let malformed = |message: String| ExperimentError::MalformedCsv {
            origin: self.origin.clone(),
            message,
        };
        let idx = self
            .column(name)
            .ok_or_else(|| malformed(format!("missing column {name}")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let cell = row[idx].trim();
                if cell.is_empty() {
                    return Ok(None);
                }
                cell.parse::<f64>().map(Some).map_err(|_| {
                    malformed(format!("row {}: {name} = {cell:?} is not a number", r + 1))
                })
            })
            .collect()
    }

    /// Text column.
    pub fn text(&self, name: &str) -> Option<Vec<&str>> {
        let idx = self.column(name)?;
        Some(self.rows.iter().map(|row| row[idx].as_str()).collect())
    }
}
