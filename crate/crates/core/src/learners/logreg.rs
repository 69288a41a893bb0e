//! Multinomial logistic regression by full-batch gradient descent.

use alloc::vec;
use alloc::vec::Vec;

use super::{softmax_in_place, FittedModel};
use crate::clock::Deadline;
use crate::error::Result;
use crate::matrix::Matrix;

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Softmax regression, weights `C x (d + 1)` with the bias in the last column.
#[derive(Clone, Debug)]
pub struct LogisticRegression {
    n_classes: usize,
    d: usize,
    weights: Vec<f64>,
    /// Objective after each accepted step, starting with the initial value.
    loss_trace: Vec<f64>,
}

impl LogisticRegression {
    pub fn fit(
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        l2: f64,
        max_steps: usize,
        tol: f64,
        deadline: Deadline<'_>,
    ) -> Self {
        let d = x.cols();
        let mut w = vec![0.0; n_classes * (d + 1)];
        let mut grad = vec![0.0; w.len()];
        let mut loss = objective(&w, x, y, n_classes, l2, Some(&mut grad));
        let mut trace = vec![loss];
        let mut step = 1.0;
        let mut trial = vec![0.0; w.len()];

        for _ in 0..max_steps {
            if deadline.expired() {
                break;
            }
            let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if gmax < tol {
                break;
            }
            let gsq: f64 = grad.iter().map(|g| g * g).sum();
            // Backtracking from a step twice the last accepted one.
            step *= 2.0;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                for ((t, wi), gi) in trial.iter_mut().zip(&w).zip(&grad) {
                    *t = wi - step * gi;
                }
                let l = objective(&trial, x, y, n_classes, l2, None);
                if l <= loss - ARMIJO * step * gsq {
                    accepted = Some(l);
                    break;
                }
                step *= 0.5;
            }
            let Some(new_loss) = accepted else { break };
            core::mem::swap(&mut w, &mut trial);
            loss = objective(&w, x, y, n_classes, l2, Some(&mut grad));
            debug_assert!((loss - new_loss).abs() <= 1e-9 * (1.0 + loss.abs()));
            trace.push(loss);
        }
        Self {
            n_classes,
            d,
            weights: w,
            loss_trace: trace,
        }
    }

    pub fn loss_trace(&self) -> &[f64] {
        &self.loss_trace
    }
}

/// Mean cross-entropy plus `l2/2 * |W|^2` (bias excluded). Fills `grad` if given.
fn objective(w: &[f64], x: &Matrix, y: &[usize], c: usize, l2: f64, mut grad: Option<&mut Vec<f64>>) -> f64 {
    let d = x.cols();
    let stride = d + 1;
    let n = x.rows() as f64;
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    let mut logits = vec![0.0; c];
    let mut loss = 0.0;
    for (row, &label) in x.iter_rows().zip(y) {
        for (k, z) in logits.iter_mut().enumerate() {
            let wk = &w[k * stride..(k + 1) * stride];
            *z = wk[d] + wk[..d].iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
        }
        softmax_in_place(&mut logits);
        loss -= libm::log(logits[label].max(f64::MIN_POSITIVE));
        if let Some(g) = grad.as_deref_mut() {
            for (k, p) in logits.iter().enumerate() {
                let r = (p - if k == label { 1.0 } else { 0.0 }) / n;
                let gk = &mut g[k * stride..(k + 1) * stride];
                for (gj, xj) in gk[..d].iter_mut().zip(row) {
                    *gj += r * xj;
                }
                gk[d] += r;
            }
        }
    }
    loss /= n;
    let mut penalty = 0.0;
    for k in 0..c {
        for j in 0..d {
            let v = w[k * stride + j];
            penalty += v * v;
            if let Some(g) = grad.as_deref_mut() {
                g[k * stride + j] += l2 * v;
            }
        }
    }
    loss + 0.5 * l2 * penalty
}

impl FittedModel for LogisticRegression {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let stride = self.d + 1;
        let mut out = Matrix::zeros(x.rows(), self.n_classes);
        for i in 0..x.rows() {
            let q = x.row(i);
            let row = out.row_mut(i);
            for (k, z) in row.iter_mut().enumerate() {
                let wk = &self.weights[k * stride..(k + 1) * stride];
                *z = wk[self.d] + wk[..self.d].iter().zip(q).map(|(a, b)| a * b).sum::<f64>();
            }
            softmax_in_place(row);
        }
        Ok(out)
    }
}
