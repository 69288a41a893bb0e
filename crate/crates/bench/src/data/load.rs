//! Dataset references and per-scenario dataset preparation.

use std::path::PathBuf;

use alp_core::dataset::{gaussian_classes, GaussianSpec};
use alp_core::setting::Scenario;
use alp_core::split::split_labels;
use alp_core::Dataset;

use super::csv::infer_csv_schema;
use super::openml::OpenMlClient;
use super::{apply_preprocess, fit_preprocess, parse_arff, parse_csv, Cell, ColumnKind, RawTable};
use crate::error::{Error, IoContext, Result};

const SYNTHETIC_PREFIX: &str = "synthetic:gauss:";

/// Where a dataset comes from: an OpenML id, a local ARFF/CSV file (target
/// is the last column), or a synthetic Gaussian spec such as
/// `synthetic:gauss:n=600,c=2,d=2,sep=1,seed=0`.
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetRef {
    OpenMl(i64),
    File(PathBuf),
    Synthetic(GaussianSpec),
}

impl DatasetRef {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(id) = s.parse::<i64>() {
            return Ok(DatasetRef::OpenMl(id));
        }
        if let Some(rest) = s.strip_prefix(SYNTHETIC_PREFIX) {
            let mut spec = GaussianSpec {
                n: 600,
                n_classes: 2,
                dims: 2,
                separation: 1.0,
                seed: 0,
            };
            for part in rest.split(',').filter(|p| !p.is_empty()) {
                let (k, v) = part
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("synthetic parameter `{part}` is not key=value")))?;
                let bad = || Error::Config(format!("bad value for synthetic parameter `{k}`: `{v}`"));
                match k {
                    "n" => spec.n = v.parse().map_err(|_| bad())?,
                    "c" => spec.n_classes = v.parse().map_err(|_| bad())?,
                    "d" => spec.dims = v.parse().map_err(|_| bad())?,
                    "sep" => spec.separation = v.parse().map_err(|_| bad())?,
                    "seed" => spec.seed = v.parse().map_err(|_| bad())?,
                    _ => return Err(Error::Config(format!("unknown synthetic parameter `{k}`"))),
                }
            }
            return Ok(DatasetRef::Synthetic(spec));
        }
        let path = PathBuf::from(s);
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("arff") | Some("csv") => Ok(DatasetRef::File(path)),
            _ => Err(Error::Config(format!(
                "dataset `{s}` is neither an OpenML id, a .arff/.csv path, nor `{SYNTHETIC_PREFIX}...`"
            ))),
        }
    }
}

/// Directory-safe rendering of a dataset reference string.
pub fn store_key(reference: &str) -> String {
    let base = match DatasetRef::parse(reference) {
        Ok(DatasetRef::File(p)) => p.file_stem().and_then(|s| s.to_str()).unwrap_or(reference).to_string(),
        _ => reference.to_string(),
    };
    base.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '=') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// A dataset before the scenario-dependent preprocessing.
#[derive(Clone, Debug)]
pub enum LoadedTable {
    Table { table: RawTable, source_id: String },
    Ready(Dataset),
}

impl LoadedTable {
    pub fn source_id(&self) -> &str {
        match self {
            LoadedTable::Table { source_id, .. } => source_id,
            LoadedTable::Ready(d) => &d.source_id,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DatasetSource {
    pub openml: OpenMlClient,
}

impl DatasetSource {
    pub fn new(openml: OpenMlClient) -> Self {
        Self { openml }
    }

    pub fn load(&self, reference: &DatasetRef) -> Result<LoadedTable> {
        match reference {
            DatasetRef::OpenMl(id) => Ok(LoadedTable::Table {
                table: self.openml.fetch(*id)?,
                source_id: format!("openml:{id}"),
            }),
            DatasetRef::Synthetic(spec) => Ok(LoadedTable::Ready(gaussian_classes(spec)?)),
            DatasetRef::File(path) => {
                let text = std::fs::read_to_string(path).at(path)?;
                let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
                let table = if is_csv {
                    parse_csv(&text, &infer_csv_schema(&text)?)?
                } else {
                    parse_arff(&text)?
                };
                Ok(LoadedTable::Table {
                    table,
                    source_id: path.display().to_string(),
                })
            }
        }
    }
}

/// Class labels of the target column. Rows with a missing target are
/// dropped; `rows` maps dataset rows back to table rows. Nominal classes
/// keep declaration order, numeric ones ascending order; classes that never
/// occur are removed.
pub fn encode_labels(table: &RawTable) -> Result<(Vec<usize>, Vec<usize>, Vec<String>)> {
    let col = &table.columns[table.target_index()?];
    let rows: Vec<usize> = (0..col.cells.len())
        .filter(|&i| col.cells[i] != Cell::Missing)
        .collect();
    let (raw, names): (Vec<usize>, Vec<String>) = match &col.kind {
        ColumnKind::Nominal(cats) => (
            rows.iter()
                .map(|&i| match col.cells[i] {
                    Cell::Category(k) => k,
                    _ => unreachable!(),
                })
                .collect(),
            cats.clone(),
        ),
        ColumnKind::Numeric => {
            let mut values: Vec<f64> = rows
                .iter()
                .map(|&i| match col.cells[i] {
                    Cell::Number(v) => v,
                    _ => unreachable!(),
                })
                .collect();
            let per_row = values.clone();
            values.sort_by(f64::total_cmp);
            values.dedup();
            (
                per_row
                    .iter()
                    .map(|v| values.binary_search_by(|p| p.total_cmp(v)).unwrap())
                    .collect(),
                values.iter().map(|v| v.to_string()).collect(),
            )
        }
    };
    let mut present = vec![false; names.len()];
    for &k in &raw {
        present[k] = true;
    }
    let mut remap = vec![usize::MAX; names.len()];
    let mut kept = Vec::new();
    for (k, name) in names.into_iter().enumerate() {
        if present[k] {
            remap[k] = kept.len();
            kept.push(name);
        }
    }
    Ok((raw.into_iter().map(|k| remap[k]).collect(), rows, kept))
}

/// Builds the scenario's dataset. Preprocessing is fitted on the train split
/// only, so the split is drawn from the labels first; [`alp_core::pipeline::run_alp`]
/// redraws the identical split from the same labels and seed.
pub fn prepare_dataset(loaded: &LoadedTable, scenario: &Scenario) -> Result<Dataset> {
    let (table, source_id) = match loaded {
        LoadedTable::Ready(d) => return Ok(d.clone()),
        LoadedTable::Table { table, source_id } => (table, source_id),
    };
    let (labels, rows, classes) = encode_labels(table)?;
    let n_classes = classes.len();
    if n_classes < 2 {
        return Err(Error::Preprocess(format!(
            "{source_id}: target has {n_classes} class(es)"
        )));
    }
    let setting = scenario.setting.resolve(n_classes)?;
    let plan = split_labels(&labels, n_classes, &setting, scenario.split_seed)?;
    let train_rows: Vec<usize> = plan.train_indices.iter().map(|&i| rows[i]).collect();
    let model = fit_preprocess(table, &train_rows)?;
    let features = apply_preprocess(&model, table, &rows)?;
    Ok(Dataset::new(
        features,
        labels,
        n_classes,
        source_id.clone(),
        model.feature_names(),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_references() {
        assert_eq!(DatasetRef::parse("61").unwrap(), DatasetRef::OpenMl(61));
        match DatasetRef::parse("synthetic:gauss:n=50,c=3,sep=2.5").unwrap() {
            DatasetRef::Synthetic(s) => assert_eq!((s.n, s.n_classes, s.dims, s.separation), (50, 3, 2, 2.5)),
            other => panic!("{other:?}"),
        }
        assert!(DatasetRef::parse("synthetic:gauss:q=1").is_err());
        assert!(DatasetRef::parse("data.txt").is_err());
        assert_eq!(store_key("synthetic:gauss:n=50,c=3"), "synthetic_gauss_n=50_c=3");
        assert_eq!(store_key("/tmp/x/my data.arff"), "my_data");
    }

    #[test]
    fn labels_drop_missing_and_absent_classes() {
        let t =
            parse_arff("@relation t\n@attribute a numeric\n@attribute y {p,q,r}\n@data\n1,r\n2,?\n3,p\n4,r\n").unwrap();
        let (labels, rows, classes) = encode_labels(&t).unwrap();
        assert_eq!(labels, vec![1, 0, 1]);
        assert_eq!(rows, vec![0, 2, 3]);
        assert_eq!(classes, vec!["p", "r"]);
    }
}
