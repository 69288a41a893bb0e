//! Per-instance uncertainty scores over probability rows.

use alloc::vec;

/// `p(1st) - p(2nd)`; a single-class row has margin 1.
pub fn margin_score(p: &[f64]) -> f64 {
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &v in p {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    if second == f64::NEG_INFINITY {
        return 1.0;
    }
    first - second
}

/// Shannon entropy in nats with `0 ln 0 = 0`.
pub fn entropy_score(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * libm::log(v)).sum::<f64>()
}

pub fn least_confident_score(p: &[f64]) -> f64 {
    1.0 - p.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Entropy of the committee mean.
pub fn maxent_score(members: &[&[f64]]) -> f64 {
    let Some(first) = members.first() else { return 0.0 };
    let mut mean = vec![0.0; first.len()];
    for m in members {
        for (a, v) in mean.iter_mut().zip(m.iter()) {
            *a += v;
        }
    }
    let k = members.len() as f64;
    mean.iter_mut().for_each(|v| *v /= k);
    entropy_score(&mean)
}

/// Mutual information: entropy of the mean minus the mean member entropy.
pub fn bald_score(members: &[&[f64]]) -> f64 {
    if members.is_empty() {
        return 0.0;
    }
    let mean_entropy = members.iter().map(|m| entropy_score(m)).sum::<f64>() / members.len() as f64;
    maxent_score(members) - mean_entropy
}

/// Vote entropy: each member votes its argmax (ties to the lowest class).
pub fn qbc_score(members: &[&[f64]]) -> f64 {
    let Some(first) = members.first() else { return 0.0 };
    let mut votes = vec![0.0; first.len()];
    for m in members {
        votes[crate::matrix::argmax(m)] += 1.0;
    }
    let k = members.len() as f64;
    votes.iter_mut().for_each(|v| *v /= k);
    entropy_score(&votes)
}
