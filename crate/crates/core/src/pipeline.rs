//! The ALP driver: fit, query the simulated oracle, refit, log.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::clock::{Clock, Deadline};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{aubc, BudgetCurve};
use crate::learners::{committee_proba, FittedModel, Fitter, LearnerKind, LearnerSpec};
use crate::matrix::{argmax, Matrix};
use crate::pool::{Oracle, PoolState};
use crate::qs::{dispatch, QueryContext, StrategySpec};
use crate::rng::derive_stream;
use crate::setting::{ResolvedSetting, Scenario};
use crate::split::{make_splits, SplitPlan};

pub const RUN_SCHEMA: &str = "alp-run/1";
pub const DEFAULT_COMMITTEE_SIZE: usize = 10;

/// Tolerance on row sums of every probability matrix the driver consumes.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-6;

fn default_committee_size() -> usize {
    DEFAULT_COMMITTEE_SIZE
}

/// A learner paired with a query strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlpSpec {
    pub learner: LearnerSpec,
    pub strategy: StrategySpec,
    #[serde(default = "default_committee_size")]
    pub committee_size: usize,
}

impl AlpSpec {
    pub fn new(learner: LearnerSpec, strategy: StrategySpec) -> Result<Self> {
        let spec = Self {
            learner,
            strategy,
            committee_size: DEFAULT_COMMITTEE_SIZE,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_committee_size(mut self, members: usize) -> Result<Self> {
        self.committee_size = members;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.learner.validate()?;
        self.strategy.validate()?;
        if self.strategy.strategy.needs_committee() && self.committee_size < 2 {
            return Err(Error::Config(format!(
                "{} needs a committee of at least 2, got {}",
                self.strategy.strategy, self.committee_size
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub labeled_size: usize,
    /// Dataset indices queried in this iteration, in selection order.
    pub queried: Vec<usize>,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub fit_seconds: f64,
    pub query_seconds: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerRecord {
    pub kind: LearnerKind,
    pub label: String,
    pub params: BTreeMap<String, f64>,
    pub fit_time_cap_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyRecord {
    pub name: String,
    pub constants: BTreeMap<String, f64>,
}

/// Everything needed to replay one ALP run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: String,
    pub artifact_version: String,
    pub scenario: Scenario,
    pub dataset_id: String,
    pub n_classes: usize,
    pub setting: ResolvedSetting,
    pub split: SplitPlan,
    pub learner: LearnerRecord,
    pub strategy: StrategyRecord,
    pub committee_size: usize,
    pub iterations: Vec<IterationLog>,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    MacroF1,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::MacroF1 => "macro_f1",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "accuracy" => Ok(Metric::Accuracy),
            "macro_f1" | "macro-f1" | "f1" => Ok(Metric::MacroF1),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }

    pub fn of(self, log: &IterationLog) -> f64 {
        match self {
            Metric::Accuracy => log.accuracy,
            Metric::MacroF1 => log.macro_f1,
        }
    }
}

impl RunRecord {
    /// Metric against labeled-pool size.
    pub fn curve(&self, metric: Metric) -> Result<BudgetCurve> {
        BudgetCurve::new(
            self.iterations
                .iter()
                .map(|l| (l.labeled_size as f64, metric.of(l)))
                .collect(),
        )
    }

    pub fn aubc(&self, metric: Metric) -> Result<f64> {
        Ok(aubc(&self.curve(metric)?))
    }

    pub fn final_value(&self, metric: Metric) -> Option<f64> {
        self.iterations.last().map(|l| metric.of(l))
    }

    /// Copy with every wall time zeroed, for replay comparisons.
    pub fn without_wall_times(&self) -> Self {
        let mut out = self.clone();
        for log in &mut out.iterations {
            log.fit_seconds = 0.0;
            log.query_seconds = 0.0;
        }
        out
    }

    pub fn total_queried(&self) -> usize {
        self.iterations.iter().map(|l| l.queried.len()).sum()
    }
}

/// Accuracy (argmax, ties to the lower class) and macro-F1 over the classes
/// present in `test_y`, with 0/0 counted as 0.
pub fn evaluate_predictions(probs: &Matrix, test_y: &[usize]) -> Result<(f64, f64)> {
    if test_y.is_empty() || probs.rows() != test_y.len() {
        return Err(Error::Protocol(format!(
            "{} prediction rows for {} test labels",
            probs.rows(),
            test_y.len()
        )));
    }
    let c = probs.cols();
    let mut tp = vec![0usize; c];
    let mut predicted = vec![0usize; c];
    let mut actual = vec![0usize; c];
    let mut correct = 0usize;
    for (row, &y) in probs.iter_rows().zip(test_y) {
        let p = argmax(row);
        if y >= c {
            return Err(Error::Protocol(format!("test label {y} out of range for {c} classes")));
        }
        predicted[p] += 1;
        actual[y] += 1;
        if p == y {
            tp[p] += 1;
            correct += 1;
        }
    }
    let mut f1_sum = 0.0;
    let mut present = 0usize;
    for k in 0..c {
        if actual[k] == 0 {
            continue;
        }
        present += 1;
        let denom = predicted[k] + actual[k];
        if denom > 0 {
            f1_sum += 2.0 * tp[k] as f64 / denom as f64;
        }
    }
    Ok((correct as f64 / test_y.len() as f64, f1_sum / present as f64))
}

pub fn evaluate_model(model: &dyn FittedModel, test_x: &Matrix, test_y: &[usize]) -> Result<(f64, f64)> {
    let probs = model.predict_proba(test_x)?;
    check_stochastic(&probs, test_x.rows(), "test predictions")?;
    evaluate_predictions(&probs, test_y)
}

fn check_stochastic(m: &Matrix, rows: usize, what: &str) -> Result<()> {
    if m.rows() != rows {
        return Err(Error::Learner(format!(
            "{what}: expected {rows} rows, got {}",
            m.rows()
        )));
    }
    if !m.is_row_stochastic(STOCHASTIC_TOLERANCE) {
        return Err(Error::Learner(format!("{what}: probability rows are not stochastic")));
    }
    Ok(())
}

/// Runs one ALP on one scenario.
///
/// Configuration and split errors are returned as `Err`; anything failing
/// once the run has started (learner fits, predictions) yields a partial
/// record with status [`RunStatus::Failed`].
pub fn run_alp(
    scenario: &Scenario,
    alp: &AlpSpec,
    dataset: &Dataset,
    fitter: &dyn Fitter,
    clock: &dyn Clock,
) -> Result<RunRecord> {
    alp.validate()?;
    dataset.validate()?;
    let setting = scenario.setting.resolve(dataset.n_classes)?;
    let split = make_splits(dataset, scenario)?;
    let mut record = RunRecord {
        schema: RUN_SCHEMA.to_string(),
        artifact_version: crate::ARTIFACT_VERSION.to_string(),
        scenario: scenario.clone(),
        dataset_id: dataset.source_id.clone(),
        n_classes: dataset.n_classes,
        setting,
        split,
        learner: LearnerRecord {
            kind: alp.learner.kind.clone(),
            label: alp.learner.label(),
            params: alp.learner.resolved_params(),
            fit_time_cap_seconds: alp.learner.fit_time_cap_seconds,
        },
        strategy: StrategyRecord {
            name: alp.strategy.strategy.name().to_string(),
            constants: alp.strategy.resolved_constants(),
        },
        committee_size: alp.committee_size,
        iterations: Vec::new(),
        status: RunStatus::Completed,
        error: None,
    };
    let mut iterations = Vec::new();
    match drive(&record, alp, dataset, fitter, clock, &mut iterations) {
        Ok(()) => {}
        Err(e) => {
            record.status = RunStatus::Failed;
            record.error = Some(e.to_string());
        }
    }
    record.iterations = iterations;
    Ok(record)
}

fn drive(
    record: &RunRecord,
    alp: &AlpSpec,
    dataset: &Dataset,
    fitter: &dyn Fitter,
    clock: &dyn Clock,
    logs: &mut Vec<IterationLog>,
) -> Result<()> {
    let seed = record.scenario.pipeline_seed;
    let setting = &record.setting;
    let c = dataset.n_classes;
    let x = &dataset.features;
    let test_x = x.select_rows(&record.split.test_indices);
    let test_y: Vec<usize> = record.split.test_indices.iter().map(|&i| dataset.labels[i]).collect();

    let mut pool = PoolState::from_plan(&record.split, dataset.n_rows());
    let mut oracle = Oracle::new(&dataset.labels, &record.split);
    let mut labeled_y = pool
        .labeled
        .iter()
        .map(|&i| oracle.initial_label(i))
        .collect::<Result<Vec<_>>>()?;

    let fit = |t: usize, lx: &Matrix, ly: &[usize]| -> Result<(alloc::boxed::Box<dyn FittedModel>, f64)> {
        let mut rng = derive_stream(seed, "fit", t as u64);
        let start = clock.now();
        let model = fitter.fit(
            &alp.learner,
            lx,
            ly,
            c,
            &mut rng,
            Deadline::after(clock, alp.learner.fit_time_cap_seconds),
        )?;
        Ok((model, clock.now() - start))
    };

    let mut labeled_x = x.select_rows(&pool.labeled);
    let (mut model, fit_seconds) = fit(0, &labeled_x, &labeled_y)?;
    let (accuracy, macro_f1) = evaluate_model(model.as_ref(), &test_x, &test_y)?;
    logs.push(IterationLog {
        iteration: 0,
        labeled_size: pool.labeled.len(),
        queried: Vec::new(),
        accuracy,
        macro_f1,
        fit_seconds,
        query_seconds: 0.0,
        notes: Vec::new(),
    });

    let strategy = alp.strategy.strategy;
    for t in 1..=setting.max_iterations {
        if pool.unlabeled.is_empty() || pool.spent_budget >= setting.total_budget {
            break;
        }
        let batch = setting
            .batch_size
            .min(pool.unlabeled.len())
            .min(setting.total_budget - pool.spent_budget);
        let mut notes = Vec::new();
        let query_start = clock.now();
        let unlabeled_x = x.select_rows(&pool.unlabeled);
        let probs = if strategy.needs_probs() {
            let p = model.predict_proba(&unlabeled_x)?;
            check_stochastic(&p, unlabeled_x.rows(), "pool predictions")?;
            Some(p)
        } else {
            None
        };
        let (emb_l, emb_u) = if strategy.needs_embeddings() {
            (model.embed(&labeled_x)?, model.embed(&unlabeled_x)?)
        } else {
            (Matrix::zeros(0, 0), Matrix::zeros(0, 0))
        };
        let committee = if strategy.needs_committee() {
            let mut rng = derive_stream(seed, "committee", t as u64);
            let com = committee_proba(
                fitter,
                &alp.learner,
                model.as_ref(),
                &labeled_x,
                &labeled_y,
                &unlabeled_x,
                alp.committee_size,
                &mut rng,
                clock,
            )?;
            for m in &com.members {
                check_stochastic(m, unlabeled_x.rows(), "committee predictions")?;
            }
            if com.degenerate {
                notes.push("degenerate single-member committee".to_string());
            }
            Some(com.members)
        } else {
            None
        };
        let mut ctx = QueryContext {
            labeled_x: &labeled_x,
            labeled_y: &labeled_y,
            unlabeled_x: &unlabeled_x,
            probs: probs.as_ref(),
            embeddings_labeled: &emb_l,
            embeddings_unlabeled: &emb_u,
            committee: committee.as_deref(),
            batch_size: batch,
            rng: derive_stream(seed, "qs", t as u64),
        };
        let selection = dispatch(&alp.strategy, &mut ctx)?;
        let query_seconds = clock.now() - query_start;
        notes.extend(selection.notes);

        let queried = pool.take_positions(&selection.positions)?;
        for &i in &queried {
            labeled_y.push(oracle.label(t, i)?);
        }
        labeled_x = x.select_rows(&pool.labeled);
        let (next, fit_seconds) = fit(t, &labeled_x, &labeled_y)?;
        model = next;
        let (accuracy, macro_f1) = evaluate_model(model.as_ref(), &test_x, &test_y)?;
        logs.push(IterationLog {
            iteration: t,
            labeled_size: pool.labeled.len(),
            queried,
            accuracy,
            macro_f1,
            fit_seconds,
            query_seconds,
            notes,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::FrozenClock;
    use crate::dataset::{gaussian_classes, GaussianSpec};
    use crate::learners::NativeFitter;
    use crate::qs::Strategy;
    use crate::setting::SettingChoice;

    fn data(n: usize, c: usize) -> Dataset {
        gaussian_classes(&GaussianSpec {
            n,
            n_classes: c,
            dims: 2,
            separation: 3.0,
            seed: 5,
        })
        .unwrap()
    }

    fn scenario(setting: SettingChoice) -> Scenario {
        Scenario {
            dataset_ref: "synthetic".into(),
            setting,
            split_seed: 1,
            pipeline_seed: 1,
        }
    }

    #[test]
    fn metrics_oracle() {
        let probs = Matrix::from_rows(&[[0.9, 0.1], [0.8, 0.2], [0.6, 0.4], [0.7, 0.3]], 2);
        let (acc, f1) = evaluate_predictions(&probs, &[0, 0, 1, 1]).unwrap();
        assert_eq!(acc, 0.5);
        assert!((f1 - 1.0 / 3.0).abs() < 1e-15);
        let perfect = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], 3);
        assert_eq!(evaluate_predictions(&perfect, &[0, 2]).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn small_dynamic_two_classes() {
        let ds = data(900, 2);
        let alp = AlpSpec::new(LearnerSpec::new(LearnerKind::Gnb), StrategySpec::new(Strategy::Margin)).unwrap();
        let rec = run_alp(
            &scenario(SettingChoice::Template("small-dynamic".into())),
            &alp,
            &ds,
            &NativeFitter,
            &FrozenClock,
        )
        .unwrap();
        assert_eq!(rec.status, RunStatus::Completed);
        assert_eq!(rec.iterations.len(), 21);
        assert!(rec.iterations[1..].iter().all(|l| l.queried.len() == 10));
        assert_eq!(
            rec.iterations.last().unwrap().labeled_size,
            rec.split.initial_labeled_indices.len() + 200
        );
    }

    #[test]
    fn small_pool_is_exhausted_in_one_query() {
        let ds = data(15, 2);
        let setting = ResolvedSetting {
            name: "tiny".into(),
            initial_labeled: 3,
            total_budget: 100,
            batch_size: 10,
            max_iterations: 5,
            test_fraction: 1.0 / 3.0,
        };
        let alp = AlpSpec::new(LearnerSpec::new(LearnerKind::Knn), StrategySpec::new(Strategy::Random)).unwrap();
        let rec = run_alp(
            &scenario(SettingChoice::Custom(setting)),
            &alp,
            &ds,
            &NativeFitter,
            &FrozenClock,
        )
        .unwrap();
        let pool = rec.split.train_indices.len() - rec.split.initial_labeled_indices.len();
        assert!(pool < 10);
        assert_eq!(rec.iterations.len(), 2);
        assert_eq!(rec.iterations[1].queried.len(), pool);
    }

    #[test]
    fn zero_committee_rejected_for_committee_strategies() {
        let alp = AlpSpec::new(LearnerSpec::new(LearnerKind::Gnb), StrategySpec::new(Strategy::Bald)).unwrap();
        assert!(alp.with_committee_size(1).is_err());
    }
}
