//! Query strategies.
//!
//! Information-based strategies reduce to a score per unlabeled instance plus
//! a selection combinator ([`select`]); representation-based and hybrid
//! strategies work on embeddings through k-means and greedy k-center.
//! Every tie anywhere is broken towards the lower unlabeled position.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngStream;

pub mod clustering;
pub mod coreset;
pub mod falcun;
pub mod kmeans;
pub mod scores;
pub mod select;

pub use scores::{bald_score, entropy_score, least_confident_score, margin_score, maxent_score, qbc_score};
pub use select::{gumbel_power_select, top_k_select, Direction};

/// Everything a strategy may look at. Selections are positions into the
/// unlabeled rows.
pub struct QueryContext<'a> {
    pub labeled_x: &'a Matrix,
    pub labeled_y: &'a [usize],
    pub unlabeled_x: &'a Matrix,
    pub probs: Option<&'a Matrix>,
    pub embeddings_labeled: &'a Matrix,
    pub embeddings_unlabeled: &'a Matrix,
    pub committee: Option<&'a [Matrix]>,
    pub batch_size: usize,
    pub rng: RngStream,
}

impl<'a> QueryContext<'a> {
    pub fn n_unlabeled(&self) -> usize {
        self.unlabeled_x.rows()
    }

    /// Batch size clipped to the pool.
    pub fn r(&self) -> usize {
        self.batch_size.min(self.n_unlabeled())
    }

    fn require_probs(&self, strategy: Strategy) -> Result<&'a Matrix> {
        let p = self
            .probs
            .ok_or_else(|| Error::Context(format!("{} needs predicted probabilities", strategy.name())))?;
        if p.rows() != self.n_unlabeled() {
            return Err(Error::Context(format!(
                "{} probability rows for {} unlabeled instances",
                p.rows(),
                self.n_unlabeled()
            )));
        }
        Ok(p)
    }

    fn require_committee(&self, strategy: Strategy) -> Result<&'a [Matrix]> {
        let c = self
            .committee
            .filter(|c| !c.is_empty())
            .ok_or_else(|| Error::Context(format!("{} needs committee predictions", strategy.name())))?;
        if c.iter().any(|m| m.rows() != self.n_unlabeled()) {
            return Err(Error::Context("committee member row count mismatch".into()));
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Margin,
    Entropy,
    LeastConfident,
    MaxEntropy,
    Bald,
    Qbc,
    PowerMargin,
    PowerBald,
    Kmeans,
    Coreset,
    TypicalClustering,
    ClusterMargin,
    Clue,
    Falcun,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 15] = [
        Strategy::Margin,
        Strategy::Entropy,
        Strategy::LeastConfident,
        Strategy::MaxEntropy,
        Strategy::Bald,
        Strategy::Qbc,
        Strategy::PowerMargin,
        Strategy::PowerBald,
        Strategy::Kmeans,
        Strategy::Coreset,
        Strategy::TypicalClustering,
        Strategy::ClusterMargin,
        Strategy::Clue,
        Strategy::Falcun,
        Strategy::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Margin => "margin",
            Strategy::Entropy => "entropy",
            Strategy::LeastConfident => "least_confident",
            Strategy::MaxEntropy => "max_entropy",
            Strategy::Bald => "bald",
            Strategy::Qbc => "qbc",
            Strategy::PowerMargin => "power_margin",
            Strategy::PowerBald => "power_bald",
            Strategy::Kmeans => "kmeans",
            Strategy::Coreset => "coreset",
            Strategy::TypicalClustering => "typical_clustering",
            Strategy::ClusterMargin => "cluster_margin",
            Strategy::Clue => "clue",
            Strategy::Falcun => "falcun",
            Strategy::Random => "random",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown query strategy `{name}`")))
    }

    pub fn needs_committee(self) -> bool {
        matches!(
            self,
            Strategy::MaxEntropy | Strategy::Bald | Strategy::Qbc | Strategy::PowerBald
        )
    }

    pub fn needs_probs(self) -> bool {
        matches!(
            self,
            Strategy::Margin
                | Strategy::Entropy
                | Strategy::LeastConfident
                | Strategy::PowerMargin
                | Strategy::ClusterMargin
                | Strategy::Clue
                | Strategy::Falcun
        )
    }

    pub fn needs_embeddings(self) -> bool {
        matches!(
            self,
            Strategy::Kmeans
                | Strategy::Coreset
                | Strategy::TypicalClustering
                | Strategy::ClusterMargin
                | Strategy::Clue
        )
    }

    pub fn default_constants(self) -> &'static [(&'static str, f64)] {
        const KMEANS: &[(&str, f64)] = &[("kmeans_max_iterations", 100.0), ("kmeans_tolerance", 1e-4)];
        match self {
            Strategy::PowerMargin | Strategy::PowerBald => &[("beta", 1.0)],
            Strategy::Kmeans | Strategy::Clue => KMEANS,
            Strategy::TypicalClustering => &[
                ("kmeans_max_iterations", 100.0),
                ("kmeans_tolerance", 1e-4),
                ("typicality_neighbors", 20.0),
            ],
            Strategy::ClusterMargin => &[
                ("kmeans_max_iterations", 100.0),
                ("kmeans_tolerance", 1e-4),
                ("candidate_factor", 10.0),
            ],
            Strategy::Falcun => &[("gamma", 1.0)],
            _ => &[],
        }
    }
}

impl core::fmt::Display for Strategy {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// A strategy with constant overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub strategy: Strategy,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
}

impl StrategySpec {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            constants: BTreeMap::new(),
        }
    }

    pub fn with_constant(mut self, key: &str, value: f64) -> Result<Self> {
        self.constants.insert(key.to_string(), value);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let defaults = self.strategy.default_constants();
        for (k, v) in &self.constants {
            if !defaults.iter().any(|(d, _)| d == k) {
                return Err(Error::Config(format!(
                    "unknown constant `{k}` for strategy {}",
                    self.strategy
                )));
            }
            if !v.is_finite() {
                return Err(Error::Config(format!("constant `{k}` is not finite")));
            }
        }
        for key in ["beta", "gamma", "kmeans_tolerance"] {
            if self.constants.get(key).is_some_and(|v| *v < 0.0) {
                return Err(Error::Config(format!("constant `{key}` must be non-negative")));
            }
        }
        Ok(())
    }

    pub fn resolved_constants(&self) -> BTreeMap<String, f64> {
        let mut out: BTreeMap<String, f64> = self
            .strategy
            .default_constants()
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        for (k, v) in &self.constants {
            out.insert(k.clone(), *v);
        }
        out
    }

    fn get(&self, key: &str) -> f64 {
        self.constants.get(key).copied().unwrap_or_else(|| {
            self.strategy
                .default_constants()
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .expect("undocumented constant")
        })
    }

    fn kmeans_config(&self) -> kmeans::KMeansConfig {
        kmeans::KMeansConfig {
            max_iterations: libm::round(self.get("kmeans_max_iterations")).max(1.0) as usize,
            tolerance: self.get("kmeans_tolerance"),
        }
    }
}

/// Positions chosen by a strategy plus notes about fallbacks taken.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Selection {
    pub positions: Vec<usize>,
    pub notes: Vec<String>,
}

impl From<Vec<usize>> for Selection {
    fn from(positions: Vec<usize>) -> Self {
        Self {
            positions,
            notes: Vec::new(),
        }
    }
}

fn per_row<F: Fn(&[f64]) -> f64>(probs: &Matrix, f: F) -> Vec<f64> {
    probs.iter_rows().map(f).collect()
}

fn per_instance<F: Fn(&[&[f64]]) -> f64>(committee: &[Matrix], n: usize, f: F) -> Vec<f64> {
    let mut rows: Vec<&[f64]> = Vec::with_capacity(committee.len());
    (0..n)
        .map(|i| {
            rows.clear();
            rows.extend(committee.iter().map(|m| m.row(i)));
            f(&rows)
        })
        .collect()
}

/// Uniform sample without replacement.
pub fn random_select(ctx: &mut QueryContext<'_>) -> Vec<usize> {
    let r = ctx.r();
    ctx.rng.sample_indices(ctx.n_unlabeled(), r)
}

/// Runs `spec` on `ctx`. Returns exactly `min(R, |unlabeled|)` distinct positions.
pub fn dispatch(spec: &StrategySpec, ctx: &mut QueryContext<'_>) -> Result<Selection> {
    spec.validate()?;
    let r = ctx.r();
    let n = ctx.n_unlabeled();
    let strategy = spec.strategy;
    let selection: Selection = match strategy {
        Strategy::Margin => {
            top_k_select(&per_row(ctx.require_probs(strategy)?, margin_score), r, Direction::Min).into()
        }
        Strategy::Entropy => {
            top_k_select(&per_row(ctx.require_probs(strategy)?, entropy_score), r, Direction::Max).into()
        }
        Strategy::LeastConfident => top_k_select(
            &per_row(ctx.require_probs(strategy)?, least_confident_score),
            r,
            Direction::Max,
        )
        .into(),
        Strategy::MaxEntropy => top_k_select(
            &per_instance(ctx.require_committee(strategy)?, n, maxent_score),
            r,
            Direction::Max,
        )
        .into(),
        Strategy::Bald => top_k_select(
            &per_instance(ctx.require_committee(strategy)?, n, bald_score),
            r,
            Direction::Max,
        )
        .into(),
        Strategy::Qbc => top_k_select(
            &per_instance(ctx.require_committee(strategy)?, n, qbc_score),
            r,
            Direction::Max,
        )
        .into(),
        Strategy::PowerMargin => {
            let scores = per_row(ctx.require_probs(strategy)?, |p| 1.0 - margin_score(p));
            power(scores, r, spec.get("beta"), &mut ctx.rng)
        }
        Strategy::PowerBald => {
            // Round-off can push BALD a hair below zero.
            let scores: Vec<f64> = per_instance(ctx.require_committee(strategy)?, n, bald_score)
                .into_iter()
                .map(|s| s.max(0.0))
                .collect();
            power(scores, r, spec.get("beta"), &mut ctx.rng)
        }
        Strategy::Kmeans => clustering::kmeans_select(ctx, &spec.kmeans_config()).into(),
        Strategy::Coreset => coreset::coreset_select(ctx).into(),
        Strategy::TypicalClustering => {
            let neighbors = libm::round(spec.get("typicality_neighbors")).max(1.0) as usize;
            clustering::typical_clustering_select(ctx, &spec.kmeans_config(), neighbors).into()
        }
        Strategy::ClusterMargin => {
            let factor = libm::round(spec.get("candidate_factor")).max(1.0) as usize;
            let probs = ctx.require_probs(strategy)?;
            clustering::cluster_margin_select(ctx, probs, &spec.kmeans_config(), factor).into()
        }
        Strategy::Clue => {
            let probs = ctx.require_probs(strategy)?;
            clustering::clue_select(ctx, probs, &spec.kmeans_config()).into()
        }
        Strategy::Falcun => {
            let probs = ctx.require_probs(strategy)?;
            falcun::falcun_select(ctx, probs, spec.get("gamma"))
        }
        Strategy::Random => random_select(ctx).into(),
    };
    debug_assert_eq!(selection.positions.len(), r);
    Ok(selection)
}

fn power(scores: Vec<f64>, r: usize, beta: f64, rng: &mut RngStream) -> Selection {
    let (positions, fell_back) = gumbel_power_select(&scores, r, beta, rng);
    let mut s = Selection::from(positions);
    if fell_back {
        s.notes
            .push("power sampling: all scores zero, sampled uniformly".into());
    }
    s
}
