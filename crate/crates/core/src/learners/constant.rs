use alloc::vec;
use alloc::vec::Vec;

use super::FittedModel;
use crate::error::Result;
use crate::matrix::Matrix;

/// Predicts the same distribution for every input.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantModel {
    row: Vec<f64>,
}

impl ConstantModel {
    /// Smoothed prior of a training set holding `n` instances of one class:
    /// each class receives `1/C` of a virtual vote.
    pub fn single_class(class: usize, n: usize, n_classes: usize) -> Self {
        let c = n_classes as f64;
        let denom = n as f64 + 1.0;
        let mut row = vec![(1.0 / c) / denom; n_classes];
        row[class] = (n as f64 + 1.0 / c) / denom;
        Self { row }
    }

    pub fn uniform(n_classes: usize) -> Self {
        Self {
            row: vec![1.0 / n_classes as f64; n_classes],
        }
    }

    pub fn row(&self) -> &[f64] {
        &self.row
    }
}

impl FittedModel for ConstantModel {
    fn n_classes(&self) -> usize {
        self.row.len()
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(x.rows(), self.row.len());
        for i in 0..x.rows() {
            out.row_mut(i).copy_from_slice(&self.row);
        }
        Ok(out)
    }
}
