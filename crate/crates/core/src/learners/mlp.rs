//! One-hidden-layer perceptron (ReLU, softmax output) trained with
//! mini-batch SGD and momentum on the cross-entropy loss.

use alloc::vec;
use alloc::vec::Vec;

use super::{softmax_in_place, FittedModel, LearnerSpec};
use crate::clock::Deadline;
use crate::error::Result;
use crate::matrix::Matrix;
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl MlpParams {
    pub fn from_spec(spec: &LearnerSpec) -> Self {
        Self {
            hidden: spec.count_param("hidden", 1),
            learning_rate: spec.param("learning_rate"),
            momentum: spec.param("momentum"),
            batch_size: spec.count_param("batch_size", 1),
            epochs: spec.count_param("epochs", 0),
        }
    }
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: 64,
            learning_rate: 1e-2,
            momentum: 0.9,
            batch_size: 32,
            epochs: 200,
        }
    }
}

/// Weights stored flat as `[W1 (h x d), b1 (h), W2 (C x h), b2 (C)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpNetwork {
    pub inputs: usize,
    pub hidden: usize,
    pub classes: usize,
    pub params: Vec<f64>,
}

impl MlpNetwork {
    pub fn param_count(inputs: usize, hidden: usize, classes: usize) -> usize {
        hidden * inputs + hidden + classes * hidden + classes
    }

    pub fn zeros(inputs: usize, hidden: usize, classes: usize) -> Self {
        Self {
            inputs,
            hidden,
            classes,
            params: vec![0.0; Self::param_count(inputs, hidden, classes)],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random(inputs: usize, hidden: usize, classes: usize, rng: &mut RngStream) -> Self {
        let mut net = Self::zeros(inputs, hidden, classes);
        let a1 = libm::sqrt(6.0 / (inputs + hidden) as f64);
        let a2 = libm::sqrt(6.0 / (hidden + classes) as f64);
        let (w1, w2) = (net.w1_range(), net.w2_range());
        for v in &mut net.params[w1] {
            *v = (rng.uniform() * 2.0 - 1.0) * a1;
        }
        for v in &mut net.params[w2] {
            *v = (rng.uniform() * 2.0 - 1.0) * a2;
        }
        net
    }

    fn w1_range(&self) -> core::ops::Range<usize> {
        0..self.hidden * self.inputs
    }
    fn b1_range(&self) -> core::ops::Range<usize> {
        let s = self.hidden * self.inputs;
        s..s + self.hidden
    }
    fn w2_range(&self) -> core::ops::Range<usize> {
        let s = self.hidden * self.inputs + self.hidden;
        s..s + self.classes * self.hidden
    }
    fn b2_range(&self) -> core::ops::Range<usize> {
        let s = self.hidden * self.inputs + self.hidden + self.classes * self.hidden;
        s..s + self.classes
    }

    /// Post-ReLU hidden activations of one input row.
    fn hidden_into(&self, x: &[f64], out: &mut [f64]) {
        let w1 = &self.params[self.w1_range()];
        let b1 = &self.params[self.b1_range()];
        for (j, h) in out.iter_mut().enumerate() {
            let z = b1[j]
                + w1[j * self.inputs..(j + 1) * self.inputs]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            *h = z.max(0.0);
        }
    }

    fn output_into(&self, hidden: &[f64], out: &mut [f64]) {
        let w2 = &self.params[self.w2_range()];
        let b2 = &self.params[self.b2_range()];
        for (k, o) in out.iter_mut().enumerate() {
            *o = b2[k]
                + w2[k * self.hidden..(k + 1) * self.hidden]
                    .iter()
                    .zip(hidden)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
        }
        softmax_in_place(out);
    }

    /// Mean cross-entropy over `rows` of `x` and its gradient.
    pub fn loss_and_gradient(&self, x: &Matrix, y: &[usize], rows: &[usize]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut h = vec![0.0; self.hidden];
        let mut p = vec![0.0; self.classes];
        let mut dh = vec![0.0; self.hidden];
        let n = rows.len().max(1) as f64;
        let mut loss = 0.0;
        let (w1r, b1r, w2r, b2r) = (self.w1_range(), self.b1_range(), self.w2_range(), self.b2_range());
        let w2 = &self.params[w2r.clone()];
        for &i in rows {
            let xi = x.row(i);
            self.hidden_into(xi, &mut h);
            self.output_into(&h, &mut p);
            loss -= libm::log(p[y[i]].max(f64::MIN_POSITIVE));
            dh.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..self.classes {
                let dz = (p[k] - if k == y[i] { 1.0 } else { 0.0 }) / n;
                grad[b2r.start + k] += dz;
                let gw2 = &mut grad[w2r.start + k * self.hidden..w2r.start + (k + 1) * self.hidden];
                for j in 0..self.hidden {
                    gw2[j] += dz * h[j];
                    dh[j] += dz * w2[k * self.hidden + j];
                }
            }
            for j in 0..self.hidden {
                if h[j] <= 0.0 {
                    continue;
                }
                grad[b1r.start + j] += dh[j];
                let gw1 = &mut grad[w1r.start + j * self.inputs..w1r.start + (j + 1) * self.inputs];
                for (g, v) in gw1.iter_mut().zip(xi) {
                    *g += dh[j] * v;
                }
            }
        }
        (loss / n, grad)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    net: MlpNetwork,
}

impl Mlp {
    pub fn from_network(net: MlpNetwork) -> Self {
        Self { net }
    }

    pub fn network(&self) -> &MlpNetwork {
        &self.net
    }

    /// The deadline is polled before every mini-batch step.
    pub fn fit(
        params: &MlpParams,
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        rng: &mut RngStream,
        deadline: Deadline<'_>,
    ) -> Self {
        let mut net = MlpNetwork::random(x.cols(), params.hidden, n_classes, rng);
        let mut velocity = vec![0.0; net.params.len()];
        let mut order: Vec<usize> = (0..x.rows()).collect();
        'epochs: for _ in 0..params.epochs {
            rng.shuffle(&mut order);
            for batch in order.chunks(params.batch_size) {
                if deadline.expired() {
                    break 'epochs;
                }
                let (_, grad) = net.loss_and_gradient(x, y, batch);
                for ((w, v), g) in net.params.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                    *v = params.momentum * *v - params.learning_rate * g;
                    *w += *v;
                }
            }
        }
        Self { net }
    }
}

impl FittedModel for Mlp {
    fn n_classes(&self) -> usize {
        self.net.classes
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(x.rows(), self.net.classes);
        let mut h = vec![0.0; self.net.hidden];
        for i in 0..x.rows() {
            self.net.hidden_into(x.row(i), &mut h);
            self.net.output_into(&h, out.row_mut(i));
        }
        Ok(out)
    }

    /// Hidden-layer activations.
    fn embed(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(x.rows(), self.net.hidden);
        for i in 0..x.rows() {
            self.net.hidden_into(x.row(i), out.row_mut(i));
        }
        Ok(out)
    }
}
