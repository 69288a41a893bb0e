//! Weighted k-means with k-means++ seeding, plus the selectors built on it.

use alloc::vec;
use alloc::vec::Vec;

use crate::matrix::{squared_distance, Matrix};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansConfig {
    pub max_iterations: usize,
    /// Stop once no centroid moves farther than this.
    pub tolerance: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    pub centroids: Matrix,
    pub assignment: Vec<usize>,
}

fn nearest_centroid(point: &[f64], centroids: &Matrix) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, row) in centroids.iter_rows().enumerate() {
        let d = squared_distance(point, row);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// k-means++ seeding: first centre drawn proportionally to weight, later ones
/// proportionally to `weight * D^2`. When every remaining `D^2` is zero the
/// next centre is drawn by weight among points not yet used as centres.
fn seed(points: &Matrix, weights: &[f64], k: usize, rng: &mut RngStream) -> Vec<usize> {
    let n = points.rows();
    let mut chosen = Vec::with_capacity(k);
    let mut used = vec![false; n];
    let first = rng.choose_weighted(weights).unwrap_or_else(|| rng.below(n));
    chosen.push(first);
    used[first] = true;
    let mut d2: Vec<f64> = (0..n)
        .map(|i| squared_distance(points.row(i), points.row(first)))
        .collect();
    while chosen.len() < k {
        let scores: Vec<f64> = (0..n).map(|i| if used[i] { 0.0 } else { weights[i] * d2[i] }).collect();
        let next = rng
            .choose_weighted(&scores)
            .or_else(|| {
                let fallback: Vec<f64> = (0..n).map(|i| if used[i] { 0.0 } else { weights[i] }).collect();
                rng.choose_weighted(&fallback)
            })
            .unwrap_or_else(|| {
                let free: Vec<usize> = (0..n).filter(|&i| !used[i]).collect();
                free[rng.below(free.len())]
            });
        chosen.push(next);
        used[next] = true;
        for i in 0..n {
            d2[i] = d2[i].min(squared_distance(points.row(i), points.row(next)));
        }
    }
    chosen
}

/// Lloyd iterations from k-means++ seeds. `k` is clipped to the number of
/// points; `weights` default to 1. Empty clusters keep their centroid.
pub fn kmeans(
    points: &Matrix,
    weights: Option<&[f64]>,
    k: usize,
    config: &KMeansConfig,
    rng: &mut RngStream,
) -> Clustering {
    let n = points.rows();
    let d = points.cols();
    let k = k.min(n);
    if k == 0 {
        return Clustering {
            centroids: Matrix::zeros(0, d),
            assignment: Vec::new(),
        };
    }
    let ones;
    let weights = match weights {
        Some(w) => w,
        None => {
            ones = vec![1.0; n];
            &ones
        }
    };
    let seeds = seed(points, weights, k, rng);
    let mut centroids = points.select_rows(&seeds);
    let mut assignment = vec![0usize; n];
    for _ in 0..config.max_iterations {
        for (i, a) in assignment.iter_mut().enumerate() {
            *a = nearest_centroid(points.row(i), &centroids);
        }
        let mut sums = Matrix::zeros(k, d);
        let mut mass = vec![0.0; k];
        for i in 0..n {
            let c = assignment[i];
            mass[c] += weights[i];
            for (s, v) in sums.row_mut(c).iter_mut().zip(points.row(i)) {
                *s += weights[i] * v;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if mass[c] <= 0.0 {
                continue;
            }
            let row = sums.row_mut(c);
            row.iter_mut().for_each(|v| *v /= mass[c]);
            shift = shift.max(squared_distance(row, centroids.row(c)));
            centroids.row_mut(c).copy_from_slice(row);
        }
        if libm::sqrt(shift) <= config.tolerance {
            break;
        }
    }
    for (i, a) in assignment.iter_mut().enumerate() {
        *a = nearest_centroid(points.row(i), &centroids);
    }
    Clustering { centroids, assignment }
}

/// For each centroid in order, the nearest point not already taken (ties by
/// ascending position).
pub fn nearest_unselected(points: &Matrix, centroids: &Matrix) -> Vec<usize> {
    let mut taken = vec![false; points.rows()];
    let mut out = Vec::with_capacity(centroids.rows());
    for c in centroids.iter_rows() {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..points.rows() {
            if taken[i] {
                continue;
            }
            let d = squared_distance(points.row(i), c);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        if let Some((_, i)) = best {
            taken[i] = true;
            out.push(i);
        }
    }
    out
}
