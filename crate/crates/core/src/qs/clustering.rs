//! Clustering-based selectors: plain k-means, typical clustering,
//! cluster-margin and entropy-weighted k-means.

use alloc::vec;
use alloc::vec::Vec;

use super::kmeans::{kmeans, nearest_unselected, KMeansConfig};
use super::scores::{entropy_score, margin_score};
use super::select::{top_k_select, Direction};
use super::QueryContext;
use crate::matrix::distance;

/// k-means with `k = R` on the unlabeled embeddings; one instance per centroid.
pub fn kmeans_select(ctx: &mut QueryContext<'_>, config: &KMeansConfig) -> Vec<usize> {
    let r = ctx.r();
    let clustering = kmeans(ctx.embeddings_unlabeled, None, r, config, &mut ctx.rng);
    nearest_unselected(ctx.embeddings_unlabeled, &clustering.centroids)
}

/// Entropy-weighted k-means (`k = R`); weights enter both seeding and updates.
pub fn clue_select(ctx: &mut QueryContext<'_>, probs: &crate::Matrix, config: &KMeansConfig) -> Vec<usize> {
    let r = ctx.r();
    let mut weights: Vec<f64> = probs.iter_rows().map(|p| entropy_score(p) + 1e-12).collect();
    // Scale-free; normalizing makes equal weights exactly 1 so CLUE then
    // coincides with plain k-means.
    let max = weights.iter().copied().fold(0.0, f64::max);
    weights.iter_mut().for_each(|w| *w /= max);
    let clustering = kmeans(ctx.embeddings_unlabeled, Some(&weights), r, config, &mut ctx.rng);
    nearest_unselected(ctx.embeddings_unlabeled, &clustering.centroids)
}

/// Inverse mean distance from `member` to its `k` nearest other members.
/// A lone point, or one with zero mean distance, is infinitely typical.
fn typicality(points: &crate::Matrix, cluster: &[usize], member: usize, k: usize) -> f64 {
    let k = k.min(cluster.len().saturating_sub(1));
    if k == 0 {
        return f64::INFINITY;
    }
    let mut d: Vec<f64> = cluster
        .iter()
        .filter(|&&j| j != member)
        .map(|&j| distance(points.row(member), points.row(j)))
        .collect();
    d.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
    let mean = d[..k].iter().sum::<f64>() / k as f64;
    if mean > 0.0 {
        1.0 / mean
    } else {
        f64::INFINITY
    }
}

/// Clusters labeled and unlabeled embeddings together into `|L| + R` groups
/// and takes the most typical unlabeled point from clusters without labels
/// first (largest first), then from covered clusters by ascending label
/// count and descending size. Further passes run until `R` are chosen.
pub fn typical_clustering_select(ctx: &mut QueryContext<'_>, config: &KMeansConfig, neighbors: usize) -> Vec<usize> {
    let r = ctx.r();
    let n_lab = ctx.embeddings_labeled.rows();
    let n_unl = ctx.n_unlabeled();
    if r == 0 {
        return Vec::new();
    }
    let all = ctx.embeddings_labeled.vstack(ctx.embeddings_unlabeled);
    let k = (n_lab + r).min(n_lab + n_unl);
    let clustering = kmeans(&all, None, k, config, &mut ctx.rng);
    let k = clustering.centroids.rows();

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut labeled_count = vec![0usize; k];
    for (i, &c) in clustering.assignment.iter().enumerate() {
        members[c].push(i);
        if i < n_lab {
            labeled_count[c] += 1;
        }
    }

    // Unlabeled members of each cluster ordered by typicality (desc), then position.
    let ranked: Vec<Vec<usize>> = members
        .iter()
        .map(|cluster| {
            let mut cands: Vec<(f64, usize)> = cluster
                .iter()
                .filter(|&&i| i >= n_lab)
                .map(|&i| (typicality(&all, cluster, i, neighbors), i - n_lab))
                .collect();
            cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            cands.into_iter().map(|(_, p)| p).collect()
        })
        .collect();

    let mut order: Vec<usize> = (0..k).filter(|&c| !members[c].is_empty()).collect();
    order.sort_by(|&a, &b| {
        let covered = (labeled_count[a] > 0).cmp(&(labeled_count[b] > 0));
        covered
            .then(labeled_count[a].cmp(&labeled_count[b]))
            .then(members[b].len().cmp(&members[a].len()))
            .then(a.cmp(&b))
    });

    let mut out = Vec::with_capacity(r);
    let mut cursor = vec![0usize; k];
    while out.len() < r {
        let before = out.len();
        for &c in &order {
            if out.len() == r {
                break;
            }
            if let Some(&p) = ranked[c].get(cursor[c]) {
                cursor[c] += 1;
                out.push(p);
            }
        }
        if out.len() == before {
            break;
        }
    }
    out
}

/// k-means (`k = R`) on unlabeled embeddings, a buffer of the
/// `candidate_factor * R` lowest-margin instances, then round-robin over
/// clusters (fewest candidates first) taking each one's lowest-margin
/// remaining candidate.
pub fn cluster_margin_select(
    ctx: &mut QueryContext<'_>,
    probs: &crate::Matrix,
    config: &KMeansConfig,
    candidate_factor: usize,
) -> Vec<usize> {
    let r = ctx.r();
    let n = ctx.n_unlabeled();
    if r == 0 {
        return Vec::new();
    }
    let clustering = kmeans(ctx.embeddings_unlabeled, None, r, config, &mut ctx.rng);
    let k = clustering.centroids.rows();
    let margins: Vec<f64> = probs.iter_rows().map(margin_score).collect();
    let candidates = top_k_select(&margins, (candidate_factor * r).min(n), Direction::Min);

    // Candidates come out sorted by margin, so per-cluster queues are too.
    let mut queues: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &p in &candidates {
        queues[clustering.assignment[p]].push(p);
    }
    let mut order: Vec<usize> = (0..k).filter(|&c| !queues[c].is_empty()).collect();
    order.sort_by(|&a, &b| queues[a].len().cmp(&queues[b].len()).then(a.cmp(&b)));

    let mut out = Vec::with_capacity(r);
    let mut cursor = vec![0usize; k];
    while out.len() < r {
        let before = out.len();
        for &c in &order {
            if out.len() == r {
                break;
            }
            if let Some(&p) = queues[c].get(cursor[c]) {
                cursor[c] += 1;
                out.push(p);
            }
        }
        if out.len() == before {
            break;
        }
    }
    out
}
