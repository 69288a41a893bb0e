use alloc::vec::Vec;

use super::FittedModel;
use crate::error::Result;
use crate::matrix::{squared_distance, Matrix};

/// k-nearest-neighbour vote fractions with `1/C` virtual votes per class.
#[derive(Clone, Debug)]
pub struct Knn {
    x: Matrix,
    y: Vec<usize>,
    n_classes: usize,
    k: usize,
}

impl Knn {
    pub fn fit(x: &Matrix, y: &[usize], n_classes: usize, k: usize) -> Self {
        Self {
            x: x.clone(),
            y: y.to_vec(),
            n_classes,
            k: k.clamp(1, x.rows()),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

impl FittedModel for Knn {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let c = self.n_classes as f64;
        let mut out = Matrix::zeros(x.rows(), self.n_classes);
        let mut dists: Vec<(f64, usize)> = Vec::with_capacity(self.x.rows());
        for i in 0..x.rows() {
            let q = x.row(i);
            dists.clear();
            dists.extend(self.x.iter_rows().enumerate().map(|(j, r)| (squared_distance(q, r), j)));
            // Ties resolve to the lower training index.
            dists.select_nth_unstable_by(self.k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let row = out.row_mut(i);
            for &(_, j) in &dists[..self.k] {
                row[self.y[j]] += 1.0;
            }
            let denom = self.k as f64 + 1.0;
            for v in row.iter_mut() {
                *v = (*v + 1.0 / c) / denom;
            }
        }
        Ok(out)
    }
}
