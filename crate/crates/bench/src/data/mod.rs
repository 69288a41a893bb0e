//! Raw tables, file formats and preprocessing.

pub mod arff;
pub mod csv;
pub mod load;
pub mod openml;
pub mod preprocess;

pub use self::csv::{infer_csv_schema, parse_csv, CsvKind};
pub use arff::{parse_arff, write_arff};
pub use load::{prepare_dataset, DatasetRef, DatasetSource, LoadedTable};
pub use preprocess::{apply_preprocess, fit_preprocess, PreprocessModel};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnKind {
    Numeric,
    /// Categories in declaration order.
    Nominal(Vec<String>),
}

/// One cell; nominal cells hold an index into the column's categories.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Missing,
    Number(f64),
    Category(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub cells: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub relation: String,
    pub columns: Vec<Column>,
    pub target_column: Option<String>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.cells.len())
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// The target column: the declared one, else the last column.
    pub fn target_index(&self) -> Result<usize> {
        match &self.target_column {
            Some(name) => self
                .columns
                .iter()
                .position(|c| &c.name == name)
                .ok_or_else(|| Error::Preprocess(format!("target column `{name}` not found"))),
            None if !self.columns.is_empty() => Ok(self.columns.len() - 1),
            None => Err(Error::Preprocess("table has no columns".into())),
        }
    }

    /// Drops columns by name; unknown names are ignored.
    pub fn drop_columns(&mut self, names: &[String]) {
        self.columns.retain(|c| !names.contains(&c.name));
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_rows();
        for c in &self.columns {
            if c.cells.len() != n {
                return Err(Error::Preprocess(format!(
                    "column `{}` has {} cells, expected {n}",
                    c.name,
                    c.cells.len()
                )));
            }
            let ok = c.cells.iter().all(|cell| match (&c.kind, cell) {
                (_, Cell::Missing) => true,
                (ColumnKind::Numeric, Cell::Number(v)) => v.is_finite(),
                (ColumnKind::Nominal(cats), Cell::Category(i)) => *i < cats.len(),
                _ => false,
            });
            if !ok {
                return Err(Error::Preprocess(format!(
                    "column `{}` has a cell of the wrong kind",
                    c.name
                )));
            }
        }
        Ok(())
    }
}
