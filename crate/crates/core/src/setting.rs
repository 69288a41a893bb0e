//! Active learning settings and scenarios.

use alloc::format;
use alloc::string::{String, ToString};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed number of AL rounds for the class-count-dependent templates.
pub const DYNAMIC_ITERATIONS: usize = 20;

/// Names accepted by [`resolve_setting`].
pub const TEMPLATE_NAMES: &[&str] = &[
    "small",
    "medium",
    "large",
    "small-dynamic",
    "large-dynamic",
    "small-dynamic-text",
    "large-dynamic-text",
];

/// Concrete parameters of an AL problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSetting {
    pub name: String,
    pub initial_labeled: usize,
    pub total_budget: usize,
    pub batch_size: usize,
    pub max_iterations: usize,
    pub test_fraction: f64,
}

impl ResolvedSetting {
    pub fn validate(&self) -> Result<()> {
        if self.initial_labeled == 0 {
            return Err(Error::Config("initial_labeled must be at least 1".into()));
        }
        if self.batch_size == 0 || self.batch_size > self.total_budget {
            return Err(Error::Config(format!(
                "batch_size {} must be in 1..={}",
                self.batch_size, self.total_budget
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction {} outside (0, 1)",
                self.test_fraction
            )));
        }
        Ok(())
    }

    /// Number of test rows for a dataset of `n` rows.
    pub fn test_size(&self, n: usize) -> usize {
        // The epsilon keeps e.g. 99 * (1/3) from flooring to 32.
        libm::floor(n as f64 * self.test_fraction + 1e-9) as usize
    }
}

fn fixed(name: &str, initial: usize, budget: usize, batch: usize) -> ResolvedSetting {
    ResolvedSetting {
        name: name.to_string(),
        initial_labeled: initial,
        total_budget: budget,
        batch_size: batch,
        max_iterations: budget.div_ceil(batch),
        test_fraction: 1.0 / 3.0,
    }
}

fn dynamic(name: &str, initial: usize, budget: usize, batch: usize) -> ResolvedSetting {
    ResolvedSetting {
        name: name.to_string(),
        initial_labeled: initial,
        total_budget: budget,
        batch_size: batch,
        max_iterations: DYNAMIC_ITERATIONS,
        test_fraction: 1.0 / 3.0,
    }
}

/// Resolves a named template for a task with `n_classes` classes.
///
/// The `*-text` templates size the initial pool like the per-iteration batch
/// (`5·C` and `20·C`), the alternative reading of the dynamic settings.
pub fn resolve_setting(template_name: &str, n_classes: usize) -> Result<ResolvedSetting> {
    if n_classes < 2 {
        return Err(Error::Config(format!(
            "settings need at least 2 classes, got {n_classes}"
        )));
    }
    let c = n_classes;
    let s = match template_name {
        "small" => fixed("small", 30, 200, 10),
        "medium" => fixed("medium", 100, 1000, 50),
        "large" => fixed("large", 300, 10_000, 200),
        "small-dynamic" => dynamic("small-dynamic", 10, 100 * c, 5 * c),
        "large-dynamic" => dynamic("large-dynamic", 10, 400 * c, 20 * c),
        "small-dynamic-text" => dynamic("small-dynamic-text", 5 * c, 100 * c, 5 * c),
        "large-dynamic-text" => dynamic("large-dynamic-text", 20 * c, 400 * c, 20 * c),
        other => {
            return Err(Error::Config(format!(
                "unknown setting template `{other}` (expected one of {})",
                TEMPLATE_NAMES.join(", ")
            )))
        }
    };
    Ok(s)
}

/// Either a template name resolved per dataset or explicit parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SettingChoice {
    Template(String),
    Custom(ResolvedSetting),
}

impl SettingChoice {
    pub fn resolve(&self, n_classes: usize) -> Result<ResolvedSetting> {
        match self {
            SettingChoice::Template(name) => resolve_setting(name, n_classes),
            SettingChoice::Custom(s) => {
                s.validate()?;
                Ok(s.clone())
            }
        }
    }

    pub fn label(&self) -> &str {
        match self {
            SettingChoice::Template(name) => name,
            SettingChoice::Custom(s) => &s.name,
        }
    }
}

/// A setting bound to a dataset and the two seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub dataset_ref: String,
    pub setting: SettingChoice,
    pub split_seed: u64,
    pub pipeline_seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_rows() {
        let s = resolve_setting("small", 7).unwrap();
        assert_eq!((s.initial_labeled, s.total_budget, s.batch_size), (30, 200, 10));
        assert_eq!(s.max_iterations, 20);
        let m = resolve_setting("medium", 2).unwrap();
        assert_eq!((m.initial_labeled, m.total_budget, m.batch_size), (100, 1000, 50));
        let l = resolve_setting("large", 2).unwrap();
        assert_eq!((l.initial_labeled, l.total_budget, l.batch_size), (300, 10_000, 200));
        assert_eq!(l.max_iterations, 50);
    }

    #[test]
    fn dynamic_rows() {
        let s = resolve_setting("small-dynamic", 3).unwrap();
        assert_eq!((s.initial_labeled, s.total_budget, s.batch_size), (10, 300, 15));
        assert_eq!(s.max_iterations, 20);
        let l = resolve_setting("large-dynamic", 2).unwrap();
        assert_eq!((l.initial_labeled, l.total_budget, l.batch_size), (10, 800, 40));
        let t = resolve_setting("small-dynamic-text", 4).unwrap();
        assert_eq!((t.initial_labeled, t.batch_size), (20, 20));
    }

    #[test]
    fn unknown_template_and_too_few_classes() {
        assert!(matches!(resolve_setting("tiny", 2), Err(Error::Config(_))));
        assert!(matches!(resolve_setting("small", 1), Err(Error::Config(_))));
    }

    #[test]
    fn test_size_floors() {
        let s = resolve_setting("small", 2).unwrap();
        assert_eq!(s.test_size(99), 33);
        assert_eq!(s.test_size(100), 33);
        assert_eq!(s.test_size(2), 0);
    }

    #[test]
    fn custom_setting_validated() {
        let mut s = resolve_setting("small", 2).unwrap();
        s.batch_size = 500;
        assert!(SettingChoice::Custom(s).resolve(2).is_err());
    }
}
