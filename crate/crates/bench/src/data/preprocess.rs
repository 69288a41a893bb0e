//! Mean/mode imputation, one-hot encoding and z-scoring, fitted on a row subset.

use alp_core::Matrix;

use super::{Cell, ColumnKind, RawTable};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum FeatureModel {
    Numeric {
        column: usize,
        name: String,
        /// Imputation value and z-score centre.
        mean: f64,
        /// Population standard deviation; 0 maps the column to zeros.
        std: f64,
    },
    Nominal {
        column: usize,
        name: String,
        categories: Vec<String>,
        mode: usize,
        /// Categories observed on the fit rows; the rest encode as zeros.
        seen: Vec<bool>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessModel {
    pub features: Vec<FeatureModel>,
    pub target: usize,
    pub n_columns: usize,
    pub fitted_on: Vec<usize>,
}

impl PreprocessModel {
    pub fn output_width(&self) -> usize {
        self.features
            .iter()
            .map(|f| match f {
                FeatureModel::Numeric { .. } => 1,
                FeatureModel::Nominal { categories, .. } => categories.len(),
            })
            .sum()
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for f in &self.features {
            match f {
                FeatureModel::Numeric { name, .. } => out.push(name.clone()),
                FeatureModel::Nominal { name, categories, .. } => {
                    out.extend(categories.iter().map(|c| format!("{name}={c}")));
                }
            }
        }
        out
    }
}

/// Fits statistics on `fit_indices` for every column except the target.
pub fn fit_preprocess(table: &RawTable, fit_indices: &[usize]) -> Result<PreprocessModel> {
    table.validate()?;
    if fit_indices.is_empty() {
        return Err(Error::Preprocess("no rows to fit on".into()));
    }
    let n = table.n_rows();
    if let Some(&bad) = fit_indices.iter().find(|&&i| i >= n) {
        return Err(Error::Preprocess(format!("fit row {bad} out of range for {n} rows")));
    }
    let target = table.target_index()?;
    let mut features = Vec::new();
    for (k, col) in table.columns.iter().enumerate() {
        if k == target {
            continue;
        }
        let present = fit_indices
            .iter()
            .map(|&i| col.cells[i])
            .filter(|c| *c != Cell::Missing);
        match &col.kind {
            ColumnKind::Numeric => {
                let values: Vec<f64> = present
                    .map(|c| match c {
                        Cell::Number(v) => v,
                        _ => unreachable!("validated"),
                    })
                    .collect();
                if values.is_empty() {
                    return Err(Error::Preprocess(format!(
                        "column `{}` is entirely missing on the fit rows",
                        col.name
                    )));
                }
                let m = values.len() as f64;
                let mean = values.iter().sum::<f64>() / m;
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
                features.push(FeatureModel::Numeric {
                    column: k,
                    name: col.name.clone(),
                    mean,
                    std: var.sqrt(),
                });
            }
            ColumnKind::Nominal(cats) => {
                let mut counts = vec![0usize; cats.len()];
                for c in present {
                    if let Cell::Category(j) = c {
                        counts[j] += 1;
                    }
                }
                if counts.iter().all(|&c| c == 0) {
                    return Err(Error::Preprocess(format!(
                        "column `{}` is entirely missing on the fit rows",
                        col.name
                    )));
                }
                // Strict comparison keeps the first declared category on ties.
                let mut mode = 0;
                for (j, &c) in counts.iter().enumerate() {
                    if c > counts[mode] {
                        mode = j;
                    }
                }
                features.push(FeatureModel::Nominal {
                    column: k,
                    name: col.name.clone(),
                    categories: cats.clone(),
                    mode,
                    seen: counts.iter().map(|&c| c > 0).collect(),
                });
            }
        }
    }
    Ok(PreprocessModel {
        features,
        target,
        n_columns: table.columns.len(),
        fitted_on: fit_indices.to_vec(),
    })
}

/// Transforms `indices` rows of `table` into a feature matrix.
pub fn apply_preprocess(model: &PreprocessModel, table: &RawTable, indices: &[usize]) -> Result<Matrix> {
    if table.columns.len() != model.n_columns {
        return Err(Error::Preprocess(format!(
            "schema mismatch: {} columns, model expects {}",
            table.columns.len(),
            model.n_columns
        )));
    }
    for f in &model.features {
        let (column, name, ok) = match f {
            FeatureModel::Numeric { column, name, .. } => {
                (*column, name, table.columns[*column].kind == ColumnKind::Numeric)
            }
            FeatureModel::Nominal {
                column,
                name,
                categories,
                ..
            } => (
                *column,
                name,
                table.columns[*column].kind == ColumnKind::Nominal(categories.clone()),
            ),
        };
        if !ok || table.columns[column].name != *name {
            return Err(Error::Preprocess(format!("schema mismatch at column `{name}`")));
        }
    }
    let width = model.output_width();
    let mut out = Matrix::zeros(indices.len(), width);
    for (r, &i) in indices.iter().enumerate() {
        let row = out.row_mut(r);
        let mut at = 0;
        for f in &model.features {
            match f {
                FeatureModel::Numeric { column, mean, std, .. } => {
                    let v = match table.columns[*column].cells[i] {
                        Cell::Number(v) => v,
                        _ => *mean,
                    };
                    row[at] = if *std > 0.0 { (v - mean) / std } else { 0.0 };
                    at += 1;
                }
                FeatureModel::Nominal {
                    column,
                    categories,
                    mode,
                    seen,
                    ..
                } => {
                    let k = match table.columns[*column].cells[i] {
                        Cell::Category(k) => k,
                        _ => *mode,
                    };
                    if seen[k] {
                        row[at + k] = 1.0;
                    }
                    at += categories.len();
                }
            }
        }
    }
    Ok(out)
}
