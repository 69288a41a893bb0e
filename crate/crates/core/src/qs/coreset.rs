//! Greedy k-center selection.

use alloc::vec::Vec;

use super::QueryContext;
use crate::matrix::{distance, Matrix};

/// Repeatedly picks the unlabeled instance farthest from everything labeled
/// or already picked, keeping a running minimum-distance table.
pub fn coreset_select(ctx: &mut QueryContext<'_>) -> Vec<usize> {
    greedy_k_center(ctx.embeddings_labeled, ctx.embeddings_unlabeled, ctx.r())
}

pub fn greedy_k_center(labeled: &Matrix, unlabeled: &Matrix, r: usize) -> Vec<usize> {
    let n = unlabeled.rows();
    let mut min_dist: Vec<f64> = (0..n)
        .map(|i| {
            labeled
                .iter_rows()
                .map(|l| distance(unlabeled.row(i), l))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut picked = alloc::vec![false; n];
    let mut out = Vec::with_capacity(r);
    for _ in 0..r.min(n) {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if !picked[i] && best.is_none_or(|b| min_dist[i] > min_dist[b]) {
                best = Some(i);
            }
        }
        let Some(b) = best else { break };
        picked[b] = true;
        out.push(b);
        for i in 0..n {
            if !picked[i] {
                min_dist[i] = min_dist[i].min(distance(unlabeled.row(i), unlabeled.row(b)));
            }
        }
    }
    out
}
