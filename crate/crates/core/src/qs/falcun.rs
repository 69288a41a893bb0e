//! Relevance sampling mixing margin uncertainty with diversity in
//! probability space.

use alloc::vec;
use alloc::vec::Vec;

use super::scores::margin_score;
use super::{QueryContext, Selection};
use crate::matrix::Matrix;

/// Half the L1 distance between two probability rows, in `[0, 1]`.
fn half_l1(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Draws `R` positions one at a time with probability proportional to
/// `(u + d)^gamma`, where `u = 1 - margin` and `d` is the distance to the
/// nearest already chosen row (initially 1).
pub fn falcun_select(ctx: &mut QueryContext<'_>, probs: &Matrix, gamma: f64) -> Selection {
    let r = ctx.r();
    let n = probs.rows();
    let uncertainty: Vec<f64> = probs.iter_rows().map(|p| 1.0 - margin_score(p)).collect();
    let mut diversity = vec![1.0; n];
    let mut chosen = vec![false; n];
    let mut out = Selection::default();
    for _ in 0..r {
        let relevance: Vec<f64> = (0..n)
            .map(|i| {
                if chosen[i] {
                    0.0
                } else {
                    libm::pow(uncertainty[i] + diversity[i], gamma)
                }
            })
            .collect();
        let pick = match ctx.rng.choose_weighted(&relevance) {
            Some(p) => p,
            None => {
                let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
                out.notes.push("falcun: all relevances zero, sampled uniformly".into());
                free[ctx.rng.below(free.len())]
            }
        };
        chosen[pick] = true;
        out.positions.push(pick);
        let row = probs.row(pick);
        for i in 0..n {
            if !chosen[i] {
                diversity[i] = diversity[i].min(half_l1(probs.row(i), row));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    fn run(probs: &Matrix, r: usize, gamma: f64, seed: u64) -> Selection {
        let x = Matrix::zeros(probs.rows(), 1);
        let lab = Matrix::zeros(1, 1);
        let mut ctx = QueryContext {
            labeled_x: &lab,
            labeled_y: &[0],
            unlabeled_x: &x,
            probs: Some(probs),
            embeddings_labeled: &lab,
            embeddings_unlabeled: &x,
            committee: None,
            batch_size: r,
            rng: derive_stream(seed, "qs", 0),
        };
        falcun_select(&mut ctx, probs, gamma)
    }

    #[test]
    fn sharp_gamma_picks_most_relevant() {
        let probs = Matrix::from_rows(&[[0.9, 0.1], [0.55, 0.45], [0.7, 0.3]], 2);
        let hits = (0..1000).filter(|&s| run(&probs, 1, 50.0, s).positions == [1]).count();
        assert!(hits as f64 / 1000.0 >= 0.99, "{hits}");
    }

    #[test]
    fn identical_rows_lose_diversity() {
        let probs = Matrix::from_rows(&[[0.6, 0.4], [0.6, 0.4], [0.1, 0.9]], 2);
        let s = run(&probs, 2, 1.0, 3);
        assert_eq!(s.positions.len(), 2);
        assert_ne!(s.positions[0], s.positions[1]);
        // Directly check the update rule.
        assert_eq!(half_l1(probs.row(0), probs.row(1)), 0.0);
    }

    #[test]
    fn uniform_probs_uniform_choice() {
        let probs = Matrix::filled(4, 2, 0.5);
        let mut counts = [0usize; 4];
        for s in 0..8000 {
            counts[run(&probs, 1, 1.0, s).positions[0]] += 1;
        }
        for c in counts {
            assert!((c as f64 / 8000.0 - 0.25).abs() < 0.02);
        }
    }

    #[test]
    fn zero_relevance_falls_back() {
        // u = 0 and, after the first pick, d = 0 for the identical rows.
        let probs = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]], 2);
        let s = run(&probs, 3, 1.0, 1);
        assert_eq!(s.positions.len(), 3);
        assert!(!s.notes.is_empty());
    }
}
