use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::derive_stream;

/// Preprocessed features together with the hidden labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub source_id: String,
    pub feature_names: Vec<String>,
}

impl Dataset {
    /// Validates the invariants and builds the dataset.
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        n_classes: usize,
        source_id: impl Into<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let ds = Self {
            features,
            labels,
            n_classes,
            source_id: source_id.into(),
            feature_names,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.features.rows();
        if n < 2 || self.features.cols() == 0 {
            return Err(Error::Dataset(format!(
                "need at least 2 rows and 1 column, got {}x{}",
                n,
                self.features.cols()
            )));
        }
        if self.labels.len() != n {
            return Err(Error::Dataset(format!("{} labels for {} rows", self.labels.len(), n)));
        }
        if self.feature_names.len() != self.features.cols() {
            return Err(Error::Dataset("feature name count does not match columns".into()));
        }
        if !self.features.all_finite() {
            return Err(Error::Dataset("non-finite feature value".into()));
        }
        let mut seen = vec![false; self.n_classes];
        for &y in &self.labels {
            if y >= self.n_classes {
                return Err(Error::Dataset(format!(
                    "label {y} out of range for {} classes",
                    self.n_classes
                )));
            }
            seen[y] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Dataset(format!("class {missing} never occurs")));
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.features.rows()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

/// Parameters of the isotropic Gaussian class generator.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSpec {
    pub n: usize,
    pub n_classes: usize,
    pub dims: usize,
    /// Distance of each class mean from the origin, in units of the class stddev.
    pub separation: f64,
    pub seed: u64,
}

/// Synthetic dataset: class means equally spaced on a circle in the first two
/// dimensions (on a line for `dims == 1`), unit-variance noise everywhere.
/// Rows are assigned to classes round-robin so every class occurs.
pub fn gaussian_classes(spec: &GaussianSpec) -> Result<Dataset> {
    if spec.n_classes < 2 || spec.dims == 0 || spec.n < spec.n_classes.max(2) {
        return Err(Error::Config(format!("invalid synthetic spec {spec:?}")));
    }
    let mut rng = derive_stream(spec.seed, "synthetic", 0);
    let mut data = Vec::with_capacity(spec.n * spec.dims);
    let mut labels = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let class = i % spec.n_classes;
        let angle = core::f64::consts::TAU * class as f64 / spec.n_classes as f64;
        let mut mean = vec![0.0; spec.dims];
        if spec.dims == 1 {
            mean[0] = if spec.n_classes == 2 {
                if class == 0 {
                    -spec.separation
                } else {
                    spec.separation
                }
            } else {
                spec.separation * class as f64
            };
        } else {
            mean[0] = spec.separation * libm::cos(angle);
            mean[1] = spec.separation * libm::sin(angle);
        }
        for m in mean {
            data.push(m + rng.gaussian());
        }
        labels.push(class);
    }
    let names = (0..spec.dims).map(|d| format!("x{d}")).collect();
    Dataset::new(
        Matrix::from_vec(spec.n, spec.dims, data),
        labels,
        spec.n_classes,
        format!(
            "synthetic:gauss:n={},c={},d={},sep={},seed={}",
            spec.n, spec.n_classes, spec.dims, spec.separation, spec.seed
        ),
        names,
    )
}
