//! Dense ARFF: numeric and nominal attributes, `?` for missing values.

use std::fmt::Write as _;

use super::{Cell, Column, ColumnKind, RawTable};
use crate::error::{Error, Result};

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Splits on top-level commas, honouring single/double quotes and
/// backslash escapes inside quotes. Tokens come back trimmed, with a flag
/// telling whether they were quoted.
fn split_values(s: &str, line: usize) -> Result<Vec<(String, bool)>> {
    let mut out = Vec::new();
    let mut chars = s.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        let mut token = String::new();
        let mut quoted = false;
        if let Some(&q) = chars.peek().filter(|&&c| c == '\'' || c == '"') {
            quoted = true;
            chars.next();
            loop {
                match chars.next() {
                    Some('\\') => match chars.next() {
                        Some(c) => token.push(c),
                        None => return Err(err(line, "dangling escape")),
                    },
                    Some(c) if c == q => break,
                    Some(c) => token.push(c),
                    None => return Err(err(line, "unterminated quote")),
                }
            }
            while chars.peek().is_some_and(|c| c.is_whitespace()) {
                chars.next();
            }
        } else {
            while let Some(&c) = chars.peek() {
                if c == ',' {
                    break;
                }
                token.push(c);
                chars.next();
            }
            token = token.trim_end().to_string();
        }
        out.push((token, quoted));
        match chars.next() {
            Some(',') => continue,
            None => break,
            Some(c) => return Err(err(line, format!("unexpected `{c}` after quoted value"))),
        }
    }
    Ok(out)
}

/// Reads a possibly quoted name at the start of `s`; returns it and the rest.
fn take_name(s: &str, line: usize) -> Result<(String, &str)> {
    let s = s.trim_start();
    let first = s.chars().next().ok_or_else(|| err(line, "missing name"))?;
    if first == '\'' || first == '"' {
        let mut name = String::new();
        let mut iter = s.char_indices().skip(1);
        while let Some((i, c)) = iter.next() {
            if c == '\\' {
                let (_, e) = iter.next().ok_or_else(|| err(line, "dangling escape"))?;
                name.push(e);
            } else if c == first {
                return Ok((name, &s[i + 1..]));
            } else {
                name.push(c);
            }
        }
        Err(err(line, "unterminated quote"))
    } else {
        let end = s.find(char::is_whitespace).unwrap_or(s.len());
        Ok((s[..end].to_string(), &s[end..]))
    }
}

fn keyword(line: &str) -> Option<(String, &str)> {
    let rest = line.strip_prefix('@')?;
    let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
    Some((rest[..end].to_ascii_lowercase(), &rest[end..]))
}

pub fn parse_arff(text: &str) -> Result<RawTable> {
    let mut relation = None;
    let mut columns: Vec<Column> = Vec::new();
    let mut in_data = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if !in_data {
            let (kw, rest) = keyword(line).ok_or_else(|| err(line_no, "expected a header declaration"))?;
            match kw.as_str() {
                "relation" => relation = Some(take_name(rest, line_no)?.0),
                "attribute" => {
                    let (name, ty) = take_name(rest, line_no)?;
                    let ty = ty.trim();
                    let kind = if let Some(body) = ty.strip_prefix('{') {
                        let body = body
                            .strip_suffix('}')
                            .ok_or_else(|| err(line_no, "unterminated nominal list"))?;
                        let cats: Vec<String> = split_values(body, line_no)?.into_iter().map(|(t, _)| t).collect();
                        if cats.iter().any(|c| c.is_empty()) {
                            return Err(err(line_no, "empty nominal value"));
                        }
                        ColumnKind::Nominal(cats)
                    } else {
                        match ty.to_ascii_lowercase().as_str() {
                            "numeric" | "real" | "integer" => ColumnKind::Numeric,
                            other => return Err(err(line_no, format!("unsupported attribute type `{other}`"))),
                        }
                    };
                    if columns.iter().any(|c| c.name == name) {
                        return Err(err(line_no, format!("duplicate attribute `{name}`")));
                    }
                    columns.push(Column {
                        name,
                        kind,
                        cells: Vec::new(),
                    });
                }
                "data" => in_data = true,
                other => return Err(err(line_no, format!("unknown declaration `@{other}`"))),
            }
            continue;
        }
        if line.starts_with('{') {
            return Err(err(line_no, "sparse data rows are not supported"));
        }
        let values = split_values(line, line_no)?;
        if values.len() != columns.len() {
            return Err(err(
                line_no,
                format!("row has {} values, expected {}", values.len(), columns.len()),
            ));
        }
        for (col, (token, quoted)) in columns.iter_mut().zip(values) {
            let cell = if token == "?" && !quoted {
                Cell::Missing
            } else {
                match &col.kind {
                    ColumnKind::Numeric => {
                        let v: f64 = token
                            .parse()
                            .map_err(|_| err(line_no, format!("`{token}` is not a number ({})", col.name)))?;
                        if !v.is_finite() {
                            return Err(err(line_no, format!("non-finite value in `{}`", col.name)));
                        }
                        Cell::Number(v)
                    }
                    ColumnKind::Nominal(cats) => Cell::Category(
                        cats.iter()
                            .position(|c| *c == token)
                            .ok_or_else(|| err(line_no, format!("undeclared value `{token}` for `{}`", col.name)))?,
                    ),
                }
            };
            col.cells.push(cell);
        }
    }
    if !in_data {
        return Err(err(text.lines().count(), "missing @data section"));
    }
    Ok(RawTable {
        relation: relation.unwrap_or_default(),
        columns,
        target_column: None,
    })
}

fn quote(s: &str) -> String {
    let plain = !s.is_empty()
        && s != "?"
        && !s
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, ',' | '\'' | '"' | '%' | '{' | '}' | '\\'));
    if plain {
        s.to_string()
    } else {
        let mut out = String::with_capacity(s.len() + 2);
        out.push('\'');
        for c in s.chars() {
            if c == '\'' || c == '\\' {
                out.push('\\');
            }
            out.push(c);
        }
        out.push('\'');
        out
    }
}

/// Serializes a table so that [`parse_arff`] reads it back unchanged
/// (the target marker is not part of the format).
pub fn write_arff(table: &RawTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "@relation {}", quote(&table.relation));
    for c in &table.columns {
        match &c.kind {
            ColumnKind::Numeric => {
                let _ = writeln!(out, "@attribute {} numeric", quote(&c.name));
            }
            ColumnKind::Nominal(cats) => {
                let list: Vec<String> = cats.iter().map(|s| quote(s)).collect();
                let _ = writeln!(out, "@attribute {} {{{}}}", quote(&c.name), list.join(","));
            }
        }
    }
    out.push_str("@data\n");
    for r in 0..table.n_rows() {
        let row: Vec<String> = table
            .columns
            .iter()
            .map(|c| match (&c.kind, c.cells[r]) {
                (_, Cell::Missing) => "?".to_string(),
                (_, Cell::Number(v)) => format!("{v}"),
                (ColumnKind::Nominal(cats), Cell::Category(k)) => quote(&cats[k]),
                (ColumnKind::Numeric, Cell::Category(k)) => format!("{k}"),
            })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
