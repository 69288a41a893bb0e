use alloc::vec;
use alloc::vec::Vec;

use super::{softmax_in_place, FittedModel};
use crate::error::Result;
use crate::matrix::Matrix;

/// Gaussian naive Bayes with per-class feature means and variances.
/// Classes absent from the training set get zero prior mass.
#[derive(Clone, Debug)]
pub struct GaussianNb {
    n_classes: usize,
    log_prior: Vec<f64>,
    means: Matrix,
    vars: Matrix,
}

impl GaussianNb {
    pub fn fit(x: &Matrix, y: &[usize], n_classes: usize, var_floor: f64) -> Self {
        let d = x.cols();
        let mut counts = vec![0usize; n_classes];
        let mut means = Matrix::zeros(n_classes, d);
        for (row, &c) in x.iter_rows().zip(y) {
            counts[c] += 1;
            for (m, v) in means.row_mut(c).iter_mut().zip(row) {
                *m += v;
            }
        }
        for c in 0..n_classes {
            if counts[c] > 0 {
                let n = counts[c] as f64;
                means.row_mut(c).iter_mut().for_each(|m| *m /= n);
            }
        }
        let mut vars = Matrix::zeros(n_classes, d);
        for (row, &c) in x.iter_rows().zip(y) {
            let mean = means.row(c).to_vec();
            for ((s, v), m) in vars.row_mut(c).iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for c in 0..n_classes {
            let n = counts[c].max(1) as f64;
            vars.row_mut(c).iter_mut().for_each(|s| *s = (*s / n).max(var_floor));
        }
        let total = y.len() as f64;
        let log_prior = counts
            .iter()
            .map(|&k| {
                if k == 0 {
                    f64::NEG_INFINITY
                } else {
                    libm::log(k as f64 / total)
                }
            })
            .collect();
        Self {
            n_classes,
            log_prior,
            means,
            vars,
        }
    }
}

impl FittedModel for GaussianNb {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(x.rows(), self.n_classes);
        let ln_2pi = libm::log(core::f64::consts::TAU);
        for i in 0..x.rows() {
            let q = x.row(i);
            let row = out.row_mut(i);
            for c in 0..self.n_classes {
                if self.log_prior[c] == f64::NEG_INFINITY {
                    row[c] = f64::NEG_INFINITY;
                    continue;
                }
                let mut ll = self.log_prior[c];
                for ((v, m), s) in q.iter().zip(self.means.row(c)).zip(self.vars.row(c)) {
                    ll -= 0.5 * (ln_2pi + libm::log(*s) + (v - m) * (v - m) / s);
                }
                row[c] = ll;
            }
            softmax_in_place(row);
        }
        Ok(out)
    }
}
