//! Selection combinators over per-instance scores.

use alloc::vec::Vec;

use crate::rng::RngStream;

/// Floor applied to scores before taking logs in power sampling.
pub const POWER_EPSILON: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Max,
    Min,
}

/// The `r` best positions by `direction`, ties by ascending position.
pub fn top_k_select(scores: &[f64], r: usize, direction: Direction) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let by_score = match direction {
            Direction::Max => scores[b].total_cmp(&scores[a]),
            Direction::Min => scores[a].total_cmp(&scores[b]),
        };
        by_score.then(a.cmp(&b))
    });
    order.truncate(r.min(scores.len()));
    order
}

/// Samples `r` positions without replacement with probability proportional
/// to `score^beta`, via Gumbel perturbation of `beta * ln(score)`.
///
/// Returns the positions and whether the all-zero fallback (uniform sampling)
/// was taken.
pub fn gumbel_power_select(scores: &[f64], r: usize, beta: f64, rng: &mut RngStream) -> (Vec<usize>, bool) {
    let r = r.min(scores.len());
    if scores.iter().all(|&s| s <= 0.0) {
        return (rng.sample_indices(scores.len(), r), true);
    }
    let perturbed: Vec<f64> = scores
        .iter()
        .map(|&s| beta * libm::log(s.max(POWER_EPSILON)) + rng.gumbel())
        .collect();
    (top_k_select(&perturbed, r, Direction::Max), false)
}
