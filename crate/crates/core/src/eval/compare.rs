//! Heatmaps and win matrices over per-seed AUBC samples.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::stats::welch_t_test;

/// Two ALPs differ significantly when Welch's p falls below this.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ResultKey {
    pub learner: String,
    pub strategy: String,
    pub dataset: String,
}

impl ResultKey {
    pub fn new(learner: &str, strategy: &str, dataset: &str) -> Self {
        Self {
            learner: learner.into(),
            strategy: strategy.into(),
            dataset: dataset.into(),
        }
    }
}

/// Per-seed samples (usually AUBC) for each (learner, strategy, dataset).
pub type ResultTable = BTreeMap<ResultKey, Vec<f64>>;

/// Learner × strategy counts over the datasets that could be scored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub learners: Vec<String>,
    pub strategies: Vec<String>,
    /// `counts[learner][strategy]`.
    pub counts: Vec<Vec<usize>>,
    pub datasets_used: Vec<String>,
    /// Datasets left out, with the reason.
    pub skipped: Vec<(String, String)>,
}

impl Heatmap {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

/// Strategy × strategy fractions for one learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinMatrix {
    pub learner: String,
    pub strategies: Vec<String>,
    /// `wins[i][j]`: fraction of datasets on which strategy i beats j.
    pub wins: Vec<Vec<f64>>,
    pub datasets_used: Vec<String>,
    pub skipped: Vec<(String, String)>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Collects, for each dataset, the samples of every `cells` entry, or the
/// reason the dataset cannot be scored.
type Partition<'t> = (Vec<(String, Vec<&'t [f64]>)>, Vec<(String, String)>);

fn per_dataset<'t>(table: &'t ResultTable, cells: &[(String, String)], need_seeds: usize) -> Partition<'t> {
    let datasets: BTreeSet<&String> = table.keys().map(|k| &k.dataset).collect();
    let mut used = Vec::new();
    let mut skipped = Vec::new();
    'datasets: for d in datasets {
        let mut samples = Vec::with_capacity(cells.len());
        for (l, s) in cells {
            let key = ResultKey::new(l, s, d);
            match table.get(&key) {
                Some(v) if v.len() >= need_seeds => samples.push(v.as_slice()),
                Some(v) => {
                    skipped.push((d.clone(), format!("{l}+{s} has {} seed(s), need {need_seeds}", v.len())));
                    continue 'datasets;
                }
                None => {
                    skipped.push((d.clone(), format!("missing cell {l}+{s}")));
                    continue 'datasets;
                }
            }
        }
        used.push((d.clone(), samples));
    }
    (used, skipped)
}

fn build_heatmap(table: &ResultTable, with_significance: bool, best_is_low: bool) -> Heatmap {
    let cells: Vec<(String, String)> = table
        .keys()
        .map(|k| (k.learner.clone(), k.strategy.clone()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let learners: Vec<String> = cells
        .iter()
        .map(|c| c.0.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let strategies: Vec<String> = cells
        .iter()
        .map(|c| c.1.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut counts = vec![vec![0usize; strategies.len()]; learners.len()];
    let idx = |c: &(String, String)| {
        (
            learners.binary_search(&c.0).unwrap_or(0),
            strategies.binary_search(&c.1).unwrap_or(0),
        )
    };
    let need = if with_significance { 2 } else { 1 };
    let (used, skipped) = per_dataset(table, &cells, need);
    for (_, samples) in &used {
        let means: Vec<f64> = samples.iter().map(|s| mean(s)).collect();
        // Cells are in lexicographic order, so strict comparison keeps the
        // first of tied candidates.
        let mut best = 0;
        for (i, &m) in means.iter().enumerate().skip(1) {
            let better = if best_is_low { m < means[best] } else { m > means[best] };
            if better {
                best = i;
            }
        }
        for (i, cell) in cells.iter().enumerate() {
            let counted = if i == best {
                true
            } else if with_significance {
                welch_t_test(samples[i], samples[best]).is_ok_and(|r| r.p >= SIGNIFICANCE_LEVEL)
            } else {
                false
            };
            if counted {
                let (a, b) = idx(cell);
                counts[a][b] += 1;
            }
        }
    }
    Heatmap {
        learners,
        strategies,
        counts,
        datasets_used: used.into_iter().map(|(d, _)| d).collect(),
        skipped,
    }
}

/// Per dataset, counts the best-mean ALP and (with significance) every ALP
/// not significantly different from it.
pub fn heatmap(table: &ResultTable, with_significance: bool) -> Heatmap {
    build_heatmap(table, with_significance, false)
}

/// As [`heatmap`], around the worst-mean ALP of each dataset.
pub fn lose_heatmap(table: &ResultTable, with_significance: bool) -> Heatmap {
    build_heatmap(table, with_significance, true)
}

/// Strategy i beats j on a dataset when its mean is higher and Welch's
/// p is below [`SIGNIFICANCE_LEVEL`]. Entries are win counts over the number
/// of usable datasets.
pub fn win_matrix(table: &ResultTable, learner: &str) -> WinMatrix {
    let strategies: Vec<String> = table
        .keys()
        .filter(|k| k.learner == learner)
        .map(|k| k.strategy.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let cells: Vec<(String, String)> = strategies.iter().map(|s| (learner.into(), s.clone())).collect();
    let sub: ResultTable = table
        .iter()
        .filter(|(k, _)| k.learner == learner)
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let (used, skipped) = per_dataset(&sub, &cells, 2);
    let m = strategies.len();
    let mut wins = vec![vec![0.0; m]; m];
    for (_, samples) in &used {
        let means: Vec<f64> = samples.iter().map(|s| mean(s)).collect();
        for i in 0..m {
            for j in 0..m {
                if i != j && means[i] > means[j] {
                    if let Ok(r) = welch_t_test(samples[i], samples[j]) {
                        if r.p < SIGNIFICANCE_LEVEL {
                            wins[i][j] += 1.0;
                        }
                    }
                }
            }
        }
    }
    if !used.is_empty() {
        let d = used.len() as f64;
        for v in wins.iter_mut().flatten() {
            *v /= d;
        }
    }
    WinMatrix {
        learner: learner.into(),
        strategies,
        wins,
        datasets_used: used.into_iter().map(|(d, _)| d).collect(),
        skipped,
    }
}
