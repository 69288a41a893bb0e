//! Train/test and labeled/unlabeled splitting with class-coverage repair.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::derive_stream;
use crate::setting::{ResolvedSetting, Scenario};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    /// Ascending.
    pub train_indices: Vec<usize>,
    /// Ascending.
    pub test_indices: Vec<usize>,
    /// Nominal initial pool (ascending) followed by any repair instances.
    pub initial_labeled_indices: Vec<usize>,
    /// Number of trailing entries of `initial_labeled_indices` added by repair.
    pub repaired: usize,
}

impl SplitPlan {
    /// Train indices not in the initial pool, ascending.
    pub fn initial_unlabeled(&self, n_rows: usize) -> Vec<usize> {
        let mut labeled = vec![false; n_rows];
        for &i in &self.initial_labeled_indices {
            labeled[i] = true;
        }
        self.train_indices.iter().copied().filter(|&i| !labeled[i]).collect()
    }
}

/// Splits `dataset` for `scenario`; the setting is resolved against the
/// dataset's class count.
pub fn make_splits(dataset: &Dataset, scenario: &Scenario) -> Result<SplitPlan> {
    let setting = scenario.setting.resolve(dataset.n_classes)?;
    split_labels(&dataset.labels, dataset.n_classes, &setting, scenario.split_seed)
}

/// Draws the split from the labels alone. Three streams keyed by
/// `split_seed` are used: "split" for the test set, "initial" for the initial
/// pool and "repair" for class-coverage repair.
pub fn split_labels(
    labels: &[usize],
    n_classes: usize,
    setting: &ResolvedSetting,
    split_seed: u64,
) -> Result<SplitPlan> {
    let n = labels.len();
    let test_size = setting.test_size(n);

    let mut in_test = vec![false; n];
    let mut test_rng = derive_stream(split_seed, "split", 0);
    for i in test_rng.sample_indices(n, test_size) {
        in_test[i] = true;
    }
    let test_indices: Vec<usize> = (0..n).filter(|&i| in_test[i]).collect();
    let train_indices: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();

    let mut train_counts = vec![0usize; n_classes];
    for &i in &train_indices {
        train_counts[labels[i]] += 1;
    }
    if let Some(c) = train_counts.iter().position(|&k| k == 0) {
        return Err(Error::UnsatisfiableSplit(format!(
            "class {c} has no instance in the train split"
        )));
    }
    if setting.initial_labeled >= train_indices.len() {
        return Err(Error::UnsatisfiableSplit(format!(
            "initial pool of {} does not fit a train split of {}",
            setting.initial_labeled,
            train_indices.len()
        )));
    }

    let mut init_rng = derive_stream(split_seed, "initial", 0);
    let mut initial: Vec<usize> = init_rng
        .sample_indices(train_indices.len(), setting.initial_labeled)
        .into_iter()
        .map(|p| train_indices[p])
        .collect();
    initial.sort_unstable();

    let mut labeled = vec![false; n];
    let mut covered = vec![false; n_classes];
    for &i in &initial {
        labeled[i] = true;
        covered[labels[i]] = true;
    }

    let mut repair_rng = derive_stream(split_seed, "repair", 0);
    let mut repaired = 0;
    for class in 0..n_classes {
        if covered[class] {
            continue;
        }
        let candidates: Vec<usize> = train_indices
            .iter()
            .copied()
            .filter(|&i| !labeled[i] && labels[i] == class)
            .collect();
        // train_counts[class] > 0 and nothing of this class is labeled.
        let pick = candidates[repair_rng.below(candidates.len())];
        labeled[pick] = true;
        initial.push(pick);
        repaired += 1;
    }

    Ok(SplitPlan {
        train_indices,
        test_indices,
        initial_labeled_indices: initial,
        repaired,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setting::resolve_setting;

    fn setting(initial: usize) -> ResolvedSetting {
        let mut s = resolve_setting("small", 2).unwrap();
        s.initial_labeled = initial;
        s
    }

    #[test]
    fn sizes_for_99_rows() {
        let labels: Vec<usize> = (0..99).map(|i| i % 3).collect();
        let plan = split_labels(&labels, 3, &setting(10), 4).unwrap();
        assert_eq!(plan.test_indices.len(), 33);
        assert_eq!(plan.train_indices.len(), 66);
        let mut all: Vec<usize> = plan.train_indices.iter().chain(&plan.test_indices).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..99).collect::<Vec<_>>());
    }

    #[test]
    fn deterministic() {
        let labels: Vec<usize> = (0..120).map(|i| i % 4).collect();
        let a = split_labels(&labels, 4, &setting(10), 9).unwrap();
        let b = split_labels(&labels, 4, &setting(10), 9).unwrap();
        assert_eq!(a, b);
        let c = split_labels(&labels, 4, &setting(10), 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn repair_appends_missing_class() {
        // Class 2 is rare: with an initial pool of 1 it is missing for most seeds.
        let mut labels = vec![0usize; 60];
        for (i, l) in labels.iter_mut().enumerate() {
            *l = i % 2;
        }
        labels[5] = 2;
        labels[17] = 2;
        labels[40] = 2;
        labels[41] = 2;
        let mut saw_repair = false;
        for seed in 0..50 {
            let plan = match split_labels(&labels, 3, &setting(1), seed) {
                Ok(p) => p,
                Err(Error::UnsatisfiableSplit(_)) => continue,
                Err(e) => panic!("{e}"),
            };
            let classes: Vec<usize> = plan.initial_labeled_indices.iter().map(|&i| labels[i]).collect();
            for c in 0..3 {
                assert!(classes.contains(&c));
            }
            assert_eq!(plan.initial_labeled_indices.len(), 1 + plan.repaired);
            if plan.repaired > 0 {
                saw_repair = true;
                let tail = &plan.initial_labeled_indices[1..];
                assert!(tail.iter().all(|i| plan.train_indices.contains(i)));
            }
        }
        assert!(saw_repair);
    }

    #[test]
    fn class_only_in_test_is_unsatisfiable() {
        let mut labels: Vec<usize> = (0..30).map(|i| i % 2).collect();
        labels[0] = 2;
        let mut saw = false;
        for seed in 0..100 {
            if let Ok(plan) = split_labels(&labels, 3, &setting(2), seed) {
                assert!(plan.train_indices.contains(&0));
            } else {
                saw = true;
            }
        }
        assert!(saw);
    }
}
