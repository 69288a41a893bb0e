//! Native probabilistic classifiers behind a common contract.
//!
//! A [`Fitter`] turns a [`LearnerSpec`] plus labeled data into a
//! [`FittedModel`]. The class count always comes from the dataset, so
//! probability matrices keep `n_classes` columns even when some classes are
//! still missing from the labeled pool.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::clock::{Clock, Deadline};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngStream;

mod constant;
mod gnb;
mod knn;
pub mod logreg;
pub mod mlp;
pub mod tree;

pub use constant::ConstantModel;
pub use gnb::GaussianNb;
pub use knn::Knn;
pub use logreg::LogisticRegression;
pub use mlp::{Mlp, MlpNetwork};
pub use tree::{Forest, ForestKind};

/// Default fit cap in seconds.
pub const DEFAULT_FIT_TIME_CAP: f64 = 180.0;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Knn,
    Logreg,
    Gnb,
    RandomForest,
    ExtraTrees,
    Mlp,
    /// A third-party estimator hosted by an adapter process.
    External {
        command: Vec<String>,
    },
}

impl LearnerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerKind::Knn => "knn",
            LearnerKind::Logreg => "logreg",
            LearnerKind::Gnb => "gnb",
            LearnerKind::RandomForest => "random_forest",
            LearnerKind::ExtraTrees => "extra_trees",
            LearnerKind::Mlp => "mlp",
            LearnerKind::External { .. } => "external",
        }
    }

    /// Parses a native kind name.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "knn" => LearnerKind::Knn,
            "logreg" => LearnerKind::Logreg,
            "gnb" => LearnerKind::Gnb,
            "random_forest" | "rf" => LearnerKind::RandomForest,
            "extra_trees" => LearnerKind::ExtraTrees,
            "mlp" => LearnerKind::Mlp,
            other => return Err(Error::Config(format!("unknown learner `{other}`"))),
        })
    }

    /// Documented hyperparameters and their defaults.
    pub fn default_params(&self) -> &'static [(&'static str, f64)] {
        match self {
            LearnerKind::Knn => &[("k", 5.0)],
            LearnerKind::Logreg => &[("l2", 1e-4), ("max_steps", 5000.0), ("tol", 1e-6)],
            LearnerKind::Gnb => &[("var_floor", 1e-9)],
            LearnerKind::RandomForest | LearnerKind::ExtraTrees => &[
                ("n_trees", 100.0),
                ("max_features", 0.0),
                ("max_depth", 0.0),
                ("min_samples_split", 2.0),
            ],
            LearnerKind::Mlp => &[
                ("hidden", 64.0),
                ("learning_rate", 1e-2),
                ("momentum", 0.9),
                ("batch_size", 32.0),
                ("epochs", 200.0),
            ],
            LearnerKind::External { .. } => &[],
        }
    }
}

/// Learner kind, hyperparameter overrides and fit cap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default = "default_cap")]
    pub fit_time_cap_seconds: f64,
    /// Name used in store keys and reports; defaults to the kind name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

fn default_cap() -> f64 {
    DEFAULT_FIT_TIME_CAP
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        Self {
            kind,
            params: BTreeMap::new(),
            fit_time_cap_seconds: DEFAULT_FIT_TIME_CAP,
            label: None,
        }
    }

    /// Adds an override, rejecting keys the kind does not document.
    pub fn with_param(mut self, key: &str, value: f64) -> Result<Self> {
        self.params.insert(key.to_string(), value);
        self.validate()?;
        Ok(self)
    }

    pub fn with_time_cap(mut self, seconds: f64) -> Self {
        self.fit_time_cap_seconds = seconds;
        self
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.name().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        let defaults = self.kind.default_params();
        for (key, value) in &self.params {
            if !defaults.iter().any(|(k, _)| k == key) {
                return Err(Error::Config(format!(
                    "unknown hyperparameter `{key}` for learner {}",
                    self.kind.name()
                )));
            }
            if !value.is_finite() {
                return Err(Error::Config(format!("hyperparameter `{key}` is not finite")));
            }
        }
        if let LearnerKind::External { command } = &self.kind {
            if command.is_empty() {
                return Err(Error::Config("external learner needs a command line".into()));
            }
        }
        if self.fit_time_cap_seconds.is_nan() || self.fit_time_cap_seconds < 0.0 {
            return Err(Error::Config("fit time cap must be non-negative".into()));
        }
        Ok(())
    }

    /// Defaults merged with overrides; this is what gets recorded.
    pub fn resolved_params(&self) -> BTreeMap<String, f64> {
        let mut out: BTreeMap<String, f64> = self
            .kind
            .default_params()
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        for (k, v) in &self.params {
            out.insert(k.clone(), *v);
        }
        out
    }

    pub(crate) fn param(&self, key: &str) -> f64 {
        self.params.get(key).copied().unwrap_or_else(|| {
            self.kind
                .default_params()
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .expect("undocumented hyperparameter")
        })
    }

    /// Positive integer parameter; values are rounded and clamped to >= `min`.
    pub(crate) fn count_param(&self, key: &str, min: usize) -> usize {
        let v = libm::round(self.param(key));
        if v < min as f64 {
            min
        } else {
            v as usize
        }
    }
}

/// A trained learner.
pub trait FittedModel: Send + Sync {
    fn n_classes(&self) -> usize;

    /// Row-stochastic `rows(x) x n_classes` matrix.
    fn predict_proba(&self, x: &Matrix) -> Result<Matrix>;

    /// Representation used by geometric query strategies. Defaults to the
    /// input features.
    fn embed(&self, x: &Matrix) -> Result<Matrix> {
        Ok(x.clone())
    }

    /// Committee predictions the model can produce without refitting, if any.
    fn native_committee(&self, _x: &Matrix, _members: usize) -> Option<Vec<Matrix>> {
        None
    }
}

/// Builds fitted models from specs.
pub trait Fitter: Send + Sync {
    fn fit(
        &self,
        spec: &LearnerSpec,
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        rng: &mut RngStream,
        deadline: Deadline<'_>,
    ) -> Result<Box<dyn FittedModel>>;
}

/// Fits the native kinds; rejects `External`.
#[derive(Clone, Copy, Debug, Default)]
pub struct NativeFitter;

impl Fitter for NativeFitter {
    fn fit(
        &self,
        spec: &LearnerSpec,
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        rng: &mut RngStream,
        deadline: Deadline<'_>,
    ) -> Result<Box<dyn FittedModel>> {
        check_training_data(x, y, n_classes)?;
        spec.validate()?;
        if let LearnerKind::External { .. } = spec.kind {
            return Err(Error::Learner(
                "external learners are served by the bridge client, not the native fitter".into(),
            ));
        }
        if let Some(class) = single_class(y) {
            return Ok(Box::new(ConstantModel::single_class(class, y.len(), n_classes)));
        }
        let model: Box<dyn FittedModel> = match spec.kind {
            LearnerKind::Knn => Box::new(Knn::fit(x, y, n_classes, spec.count_param("k", 1))),
            LearnerKind::Logreg => Box::new(LogisticRegression::fit(
                x,
                y,
                n_classes,
                spec.param("l2"),
                spec.count_param("max_steps", 0),
                spec.param("tol"),
                deadline,
            )),
            LearnerKind::Gnb => Box::new(GaussianNb::fit(x, y, n_classes, spec.param("var_floor"))),
            LearnerKind::RandomForest => Box::new(Forest::fit(
                ForestKind::Random,
                &tree::ForestParams::from_spec(spec),
                x,
                y,
                n_classes,
                rng,
                deadline,
            )),
            LearnerKind::ExtraTrees => Box::new(Forest::fit(
                ForestKind::Extra,
                &tree::ForestParams::from_spec(spec),
                x,
                y,
                n_classes,
                rng,
                deadline,
            )),
            LearnerKind::Mlp => Box::new(Mlp::fit(
                &mlp::MlpParams::from_spec(spec),
                x,
                y,
                n_classes,
                rng,
                deadline,
            )),
            LearnerKind::External { .. } => unreachable!(),
        };
        Ok(model)
    }
}

/// Fits `spec` with the native fitter and no deadline beyond the spec's cap
/// measured on `clock`.
pub fn fit(
    spec: &LearnerSpec,
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    rng: &mut RngStream,
    clock: &dyn Clock,
) -> Result<Box<dyn FittedModel>> {
    NativeFitter.fit(
        spec,
        x,
        y,
        n_classes,
        rng,
        Deadline::after(clock, spec.fit_time_cap_seconds),
    )
}

pub(crate) fn check_training_data(x: &Matrix, y: &[usize], n_classes: usize) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::Fit("empty training set".into()));
    }
    if x.rows() != y.len() {
        return Err(Error::Fit(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    if n_classes < 1 {
        return Err(Error::Fit("class count must be positive".into()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::Fit(format!("label {bad} out of range for {n_classes} classes")));
    }
    if !x.all_finite() {
        return Err(Error::Fit("non-finite feature value".into()));
    }
    Ok(())
}

fn single_class(y: &[usize]) -> Option<usize> {
    let first = *y.first()?;
    y.iter().all(|&c| c == first).then_some(first)
}

/// Committee predictions on a query matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Committee {
    pub members: Vec<Matrix>,
    /// Set when the training set was too small for a real committee.
    pub degenerate: bool,
}

/// Committee of `members` predictors evaluated on `query`.
///
/// Forests split their trees into groups; every other model is refitted on
/// bootstrap replicas of the training set, each under `cap / members`.
#[allow(clippy::too_many_arguments)]
pub fn committee_proba(
    fitter: &dyn Fitter,
    spec: &LearnerSpec,
    model: &dyn FittedModel,
    train_x: &Matrix,
    train_y: &[usize],
    query: &Matrix,
    members: usize,
    rng: &mut RngStream,
    clock: &dyn Clock,
) -> Result<Committee> {
    if members < 2 {
        return Err(Error::Config(format!(
            "committee needs at least 2 members, got {members}"
        )));
    }
    if train_x.rows() < 2 {
        return Ok(Committee {
            members: vec![model.predict_proba(query)?],
            degenerate: true,
        });
    }
    if let Some(native) = model.native_committee(query, members) {
        return Ok(Committee {
            members: native,
            degenerate: false,
        });
    }
    let n = train_x.rows();
    let per_member = spec.fit_time_cap_seconds / members as f64;
    let mut out = Vec::with_capacity(members);
    for _ in 0..members {
        let mut member_rng = rng.fork("committee-member");
        let sample: Vec<usize> = (0..n).map(|_| member_rng.below(n)).collect();
        let bx = train_x.select_rows(&sample);
        let by: Vec<usize> = sample.iter().map(|&i| train_y[i]).collect();
        let fitted = fitter.fit(
            spec,
            &bx,
            &by,
            model.n_classes(),
            &mut member_rng,
            Deadline::after(clock, per_member),
        )?;
        out.push(fitted.predict_proba(query)?);
    }
    Ok(Committee {
        members: out,
        degenerate: false,
    })
}

/// Softmax of `logits` in place, numerically stable.
pub(crate) fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    for v in logits.iter_mut() {
        *v /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::FrozenClock;
    use crate::rng::derive_stream;

    fn blobs() -> (Matrix, Vec<usize>) {
        let mut rng = derive_stream(1, "blobs", 0);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..60 {
            let c = i % 3;
            rows.push([
                c as f64 * 3.0 + 0.3 * rng.gaussian(),
                -(c as f64) + 0.3 * rng.gaussian(),
            ]);
            y.push(c);
        }
        (Matrix::from_rows(&rows, 2), y)
    }

    fn all_kinds() -> Vec<LearnerSpec> {
        [
            LearnerKind::Knn,
            LearnerKind::Logreg,
            LearnerKind::Gnb,
            LearnerKind::RandomForest,
            LearnerKind::ExtraTrees,
            LearnerKind::Mlp,
        ]
        .into_iter()
        .map(|k| {
            let s = LearnerSpec::new(k.clone());
            match k {
                LearnerKind::RandomForest | LearnerKind::ExtraTrees => s.with_param("n_trees", 20.0).unwrap(),
                LearnerKind::Mlp => s.with_param("epochs", 30.0).unwrap(),
                _ => s,
            }
        })
        .collect()
    }

    #[test]
    fn unknown_param_rejected() {
        assert!(LearnerSpec::new(LearnerKind::Knn).with_param("depth", 3.0).is_err());
    }

    #[test]
    fn resolved_params_merge_defaults() {
        let s = LearnerSpec::new(LearnerKind::Knn).with_param("k", 3.0).unwrap();
        assert_eq!(s.resolved_params().get("k"), Some(&3.0));
        let f = LearnerSpec::new(LearnerKind::RandomForest);
        assert_eq!(f.resolved_params().get("n_trees"), Some(&100.0));
    }

    #[test]
    fn every_kind_is_row_stochastic_and_learns() {
        let (x, y) = blobs();
        for spec in all_kinds() {
            let mut rng = derive_stream(2, "fit", 0);
            let m = fit(&spec, &x, &y, 4, &mut rng, &FrozenClock).unwrap();
            let p = m.predict_proba(&x).unwrap();
            assert_eq!((p.rows(), p.cols()), (60, 4), "{:?}", spec.kind);
            assert!(p.is_row_stochastic(1e-9), "{:?}", spec.kind);
            let correct = (0..60).filter(|&i| crate::matrix::argmax(p.row(i)) == y[i]).count();
            assert!(correct >= 54, "{:?} got {correct}/60", spec.kind);
            assert_eq!(m.embed(&x).unwrap().rows(), 60);
        }
    }

    #[test]
    fn single_class_gives_smoothed_constant() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]], 1);
        let y = vec![1, 1, 1];
        for spec in all_kinds() {
            let mut rng = derive_stream(2, "fit", 0);
            let m = fit(&spec, &x, &y, 3, &mut rng, &FrozenClock).unwrap();
            let p = m.predict_proba(&x).unwrap();
            let expect_major = (3.0 + 1.0 / 3.0) / 4.0;
            assert!((p.get(0, 1) - expect_major).abs() < 1e-12);
            assert!((p.get(0, 0) - (1.0 / 3.0) / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_features_rejected() {
        let x = Matrix::from_rows(&[[0.0], [f64::INFINITY]], 1);
        let mut rng = derive_stream(2, "fit", 0);
        let r = fit(
            &LearnerSpec::new(LearnerKind::Knn),
            &x,
            &[0, 1],
            2,
            &mut rng,
            &FrozenClock,
        );
        assert!(matches!(r, Err(Error::Fit(_))));
    }

    #[test]
    fn bootstrap_committee_is_deterministic() {
        let (x, y) = blobs();
        let spec = LearnerSpec::new(LearnerKind::Knn);
        let mut rng = derive_stream(3, "fit", 0);
        let model = fit(&spec, &x, &y, 3, &mut rng, &FrozenClock).unwrap();
        let run = || {
            let mut r = derive_stream(9, "committee", 1);
            committee_proba(
                &NativeFitter,
                &spec,
                model.as_ref(),
                &x,
                &y,
                &x,
                2,
                &mut r,
                &FrozenClock,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert_eq!(a.members.len(), 2);
        assert!(!a.degenerate);
    }

    #[test]
    fn forest_committee_groups_trees() {
        let (x, y) = blobs();
        let spec = LearnerSpec::new(LearnerKind::RandomForest);
        let mut rng = derive_stream(3, "fit", 0);
        let model = fit(&spec, &x, &y, 3, &mut rng, &FrozenClock).unwrap();
        let mut r = derive_stream(9, "committee", 1);
        let c = committee_proba(
            &NativeFitter,
            &spec,
            model.as_ref(),
            &x,
            &y,
            &x,
            10,
            &mut r,
            &FrozenClock,
        )
        .unwrap();
        assert_eq!(c.members.len(), 10);
        // Group means average back to the forest prediction.
        let full = model.predict_proba(&x).unwrap();
        for i in 0..x.rows() {
            for k in 0..3 {
                let mean: f64 = c.members.iter().map(|m| m.get(i, k)).sum::<f64>() / 10.0;
                assert!((mean - full.get(i, k)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tiny_training_set_gives_degenerate_committee() {
        let x = Matrix::from_rows(&[[0.0]], 1);
        let spec = LearnerSpec::new(LearnerKind::Gnb);
        let mut rng = derive_stream(3, "fit", 0);
        let model = fit(&spec, &x, &[0], 2, &mut rng, &FrozenClock).unwrap();
        let c = committee_proba(
            &NativeFitter,
            &spec,
            model.as_ref(),
            &x,
            &[0],
            &x,
            5,
            &mut rng,
            &FrozenClock,
        )
        .unwrap();
        assert!(c.degenerate);
        assert_eq!(c.members.len(), 1);
    }

    #[test]
    fn separable_committee_agrees() {
        // Pure leaves on separable data without bootstrap: every tree votes alike.
        let x = Matrix::from_rows(&[[0.0], [0.1], [100.0], [100.1]], 1);
        let y = vec![0, 0, 1, 1];
        let spec = LearnerSpec::new(LearnerKind::ExtraTrees)
            .with_param("n_trees", 10.0)
            .unwrap();
        let mut rng = derive_stream(3, "fit", 0);
        let model = fit(&spec, &x, &y, 2, &mut rng, &FrozenClock).unwrap();
        let mut r = derive_stream(4, "c", 0);
        let q = Matrix::from_rows(&[[0.05], [100.05]], 1);
        let c = committee_proba(
            &NativeFitter,
            &spec,
            model.as_ref(),
            &x,
            &y,
            &q,
            2,
            &mut r,
            &FrozenClock,
        )
        .unwrap();
        assert_eq!(c.members[0], c.members[1]);
    }
}
