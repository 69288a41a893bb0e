//! CART trees with Gini splits, and the two forest variants built from them.

use alloc::vec;
use alloc::vec::Vec;

use super::{FittedModel, LearnerSpec};
use crate::clock::Deadline;
use crate::error::Result;
use crate::matrix::Matrix;
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForestKind {
    /// Bootstrap samples, best threshold per candidate feature.
    Random,
    /// Whole training set, one uniformly random threshold per candidate feature.
    Extra,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Candidate features per split; 0 means `floor(sqrt(d))`.
    pub max_features: usize,
    /// 0 means unlimited.
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl ForestParams {
    pub fn from_spec(spec: &LearnerSpec) -> Self {
        Self {
            n_trees: spec.count_param("n_trees", 1),
            max_features: spec.count_param("max_features", 0),
            max_depth: spec.count_param("max_depth", 0),
            min_samples_split: spec.count_param("min_samples_split", 2),
        }
    }
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: 0,
            max_depth: 0,
            min_samples_split: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(dist) => return dist,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t) * (c as f64 / t)).sum::<f64>()
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    n_classes: usize,
    kind: ForestKind,
    max_features: usize,
    max_depth: usize,
    min_samples_split: usize,
}

struct Candidate {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn build(&self, samples: Vec<usize>, rng: &mut RngStream) -> Tree {
        let mut nodes = vec![Node::Leaf(Vec::new())];
        // (node slot, samples, depth)
        let mut stack = vec![(0usize, samples, 0usize)];
        let mut features: Vec<usize> = (0..self.x.cols()).collect();
        while let Some((slot, samples, depth)) = stack.pop() {
            let mut counts = vec![0usize; self.n_classes];
            for &s in &samples {
                counts[self.y[s]] += 1;
            }
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let depth_capped = self.max_depth > 0 && depth >= self.max_depth;
            let split = if pure || depth_capped || samples.len() < self.min_samples_split {
                None
            } else {
                self.best_split(&samples, &counts, &mut features, rng)
            };
            match split {
                None => {
                    let n = samples.len() as f64;
                    nodes[slot] = Node::Leaf(counts.iter().map(|&c| c as f64 / n).collect());
                }
                Some(c) => {
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        samples.iter().partition(|&&s| self.x.get(s, c.feature) <= c.threshold);
                    let left = nodes.len();
                    nodes.push(Node::Leaf(Vec::new()));
                    let right = nodes.len();
                    nodes.push(Node::Leaf(Vec::new()));
                    nodes[slot] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right,
                    };
                    stack.push((right, r, depth + 1));
                    stack.push((left, l, depth + 1));
                }
            }
        }
        Tree { nodes }
    }

    /// Draws features in random order; evaluates `max_features` of them and
    /// keeps drawing past that only while no valid split has been found.
    fn best_split(
        &self,
        samples: &[usize],
        counts: &[usize],
        features: &mut [usize],
        rng: &mut RngStream,
    ) -> Option<Candidate> {
        rng.shuffle(features);
        let mut best: Option<Candidate> = None;
        for (visited, &f) in features.iter().enumerate() {
            if visited >= self.max_features && best.is_some() {
                break;
            }
            let cand = match self.kind {
                ForestKind::Random => self.best_threshold(samples, counts, f),
                ForestKind::Extra => self.random_threshold(samples, counts, f, rng),
            };
            if let Some(c) = cand {
                if best.as_ref().is_none_or(|b| c.score < b.score) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn best_threshold(&self, samples: &[usize], counts: &[usize], f: usize) -> Option<Candidate> {
        let mut order: Vec<(f64, usize)> = samples.iter().map(|&s| (self.x.get(s, f), self.y[s])).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = order.len();
        let mut left = vec![0usize; self.n_classes];
        let mut right = counts.to_vec();
        let mut best: Option<Candidate> = None;
        for i in 0..n - 1 {
            let (v, c) = order[i];
            left[c] += 1;
            right[c] -= 1;
            let next = order[i + 1].0;
            if next <= v {
                continue;
            }
            let nl = i + 1;
            let nr = n - nl;
            let score = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
            if best.as_ref().is_none_or(|b| score < b.score) {
                let mut threshold = v + (next - v) / 2.0;
                if threshold >= next {
                    threshold = v;
                }
                best = Some(Candidate {
                    score,
                    feature: f,
                    threshold,
                });
            }
        }
        best
    }

    fn random_threshold(
        &self,
        samples: &[usize],
        counts: &[usize],
        f: usize,
        rng: &mut RngStream,
    ) -> Option<Candidate> {
        let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            let v = self.x.get(s, f);
            (lo.min(v), hi.max(v))
        });
        if !(hi > lo) {
            return None;
        }
        let mut threshold = lo + rng.uniform() * (hi - lo);
        if threshold >= hi {
            threshold = lo;
        }
        let mut left = vec![0usize; self.n_classes];
        let mut nl = 0;
        for &s in samples {
            if self.x.get(s, f) <= threshold {
                left[self.y[s]] += 1;
                nl += 1;
            }
        }
        let n = samples.len();
        let right: Vec<usize> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
        let nr = n - nl;
        let score = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
        Some(Candidate {
            score,
            feature: f,
            threshold,
        })
    }
}

/// Ensemble of CART trees; predictions average the leaf class distributions.
#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    n_classes: usize,
    trees: Vec<Tree>,
}

impl Forest {
    /// Trees are grown one at a time; the deadline is checked before each.
    pub fn fit(
        kind: ForestKind,
        params: &ForestParams,
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        rng: &mut RngStream,
        deadline: Deadline<'_>,
    ) -> Self {
        let d = x.cols();
        let max_features = if params.max_features == 0 {
            (libm::floor(libm::sqrt(d as f64)) as usize).max(1)
        } else {
            params.max_features.min(d)
        };
        let builder = Builder {
            x,
            y,
            n_classes,
            kind,
            max_features,
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split.max(2),
        };
        let n = x.rows();
        let mut trees = Vec::with_capacity(params.n_trees);
        for _ in 0..params.n_trees {
            if deadline.expired() {
                break;
            }
            let mut tree_rng = rng.fork("tree");
            let samples: Vec<usize> = match kind {
                ForestKind::Random => (0..n).map(|_| tree_rng.below(n)).collect(),
                ForestKind::Extra => (0..n).collect(),
            };
            trees.push(builder.build(samples, &mut tree_rng));
        }
        Self { n_classes, trees }
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    fn average(&self, trees: &[Tree], x: &Matrix) -> Matrix {
        if trees.is_empty() {
            return Matrix::filled(x.rows(), self.n_classes, 1.0 / self.n_classes as f64);
        }
        let mut out = Matrix::zeros(x.rows(), self.n_classes);
        let k = trees.len() as f64;
        for i in 0..x.rows() {
            let q = x.row(i);
            let row = out.row_mut(i);
            for t in trees {
                for (o, p) in row.iter_mut().zip(t.predict_row(q)) {
                    *o += p;
                }
            }
            row.iter_mut().for_each(|v| *v /= k);
        }
        out
    }
}

impl FittedModel for Forest {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.average(&self.trees, x))
    }

    /// Contiguous groups of `len / members` trees; unavailable with fewer
    /// trees than members.
    fn native_committee(&self, x: &Matrix, members: usize) -> Option<Vec<Matrix>> {
        let t = self.trees.len();
        if members == 0 || t < members {
            return None;
        }
        Some(
            (0..members)
                .map(|g| self.average(&self.trees[g * t / members..(g + 1) * t / members], x))
                .collect(),
        )
    }
}
