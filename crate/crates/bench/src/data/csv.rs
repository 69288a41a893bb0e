//! CSV with a header row; empty fields are missing.

use super::{Cell, Column, ColumnKind, RawTable};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CsvKind {
    Numeric,
    /// Categories are collected in order of first appearance.
    Nominal,
}

fn reader(text: &str) -> ::csv::Reader<&[u8]> {
    ::csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes())
}

fn parse_error(e: ::csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

pub fn parse_csv(text: &str, schema: &[CsvKind]) -> Result<RawTable> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(parse_error)?.clone();
    if headers.len() != schema.len() {
        return Err(Error::Parse {
            line: 1,
            message: format!("{} header fields but {} schema entries", headers.len(), schema.len()),
        });
    }
    let mut columns: Vec<Column> = headers
        .iter()
        .zip(schema)
        .map(|(name, kind)| Column {
            name: name.to_string(),
            kind: match kind {
                CsvKind::Numeric => ColumnKind::Numeric,
                CsvKind::Nominal => ColumnKind::Nominal(Vec::new()),
            },
            cells: Vec::new(),
        })
        .collect();
    for record in rdr.records() {
        let record = record.map_err(parse_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        for (col, field) in columns.iter_mut().zip(record.iter()) {
            let cell = if field.is_empty() {
                Cell::Missing
            } else {
                match &mut col.kind {
                    ColumnKind::Numeric => {
                        let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                            line,
                            message: format!("`{field}` is not a number ({})", col.name),
                        })?;
                        if !v.is_finite() {
                            return Err(Error::Parse {
                                line,
                                message: format!("non-finite value in `{}`", col.name),
                            });
                        }
                        Cell::Number(v)
                    }
                    ColumnKind::Nominal(cats) => match cats.iter().position(|c| c == field) {
                        Some(k) => Cell::Category(k),
                        None => {
                            cats.push(field.to_string());
                            Cell::Category(cats.len() - 1)
                        }
                    },
                }
            };
            col.cells.push(cell);
        }
    }
    Ok(RawTable {
        relation: String::new(),
        columns,
        target_column: None,
    })
}

/// Numeric where every non-empty field parses as a finite number.
pub fn infer_csv_schema(text: &str) -> Result<Vec<CsvKind>> {
    let mut rdr = reader(text);
    let n = rdr.headers().map_err(parse_error)?.len();
    let mut numeric = vec![true; n];
    for record in rdr.records() {
        let record = record.map_err(parse_error)?;
        for (k, field) in record.iter().enumerate() {
            if !field.is_empty() && !field.trim().parse::<f64>().is_ok_and(f64::is_finite) {
                numeric[k] = false;
            }
        }
    }
    Ok(numeric
        .into_iter()
        .map(|b| if b { CsvKind::Numeric } else { CsvKind::Nominal })
        .collect())
}
