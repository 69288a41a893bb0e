//! Learner/strategy name parsing and the TOML scenario and grid files.

use std::path::{Path, PathBuf};

use alp_core::learners::{LearnerKind, LearnerSpec};
use alp_core::qs::{Strategy, StrategySpec};
use alp_core::setting::SettingChoice;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::store::GridSpec;

/// A native kind name (`rf` and `et` are accepted as short forms) or
/// `external:<command line>` for a bridged learner.
pub fn parse_learner(s: &str) -> Result<LearnerSpec> {
    let s = s.trim();
    if let Some(cmd) = s.strip_prefix("external:") {
        let command: Vec<String> = cmd.split_whitespace().map(String::from).collect();
        let spec = LearnerSpec::new(LearnerKind::External { command });
        spec.validate()?;
        return Ok(spec);
    }
    let name = match s {
        "et" => "extra_trees",
        other => other,
    };
    Ok(LearnerSpec::new(LearnerKind::from_name(name)?))
}

pub fn parse_strategy(s: &str) -> Result<StrategySpec> {
    Ok(StrategySpec::new(Strategy::from_name(s.trim())?))
}

/// `key=value` with a numeric value.
pub fn parse_assignment(s: &str) -> Result<(String, f64)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("expected key=value, got `{s}`")))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| Error::Usage(format!("value of `{k}` is not a number")))?;
    Ok((k.trim().to_string(), v))
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum LearnerEntry {
    Name(String),
    Spec(LearnerSpec),
}

impl LearnerEntry {
    pub fn resolve(&self) -> Result<LearnerSpec> {
        match self {
            LearnerEntry::Name(n) => parse_learner(n),
            LearnerEntry::Spec(s) => {
                s.validate()?;
                Ok(s.clone())
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum StrategyEntry {
    Name(String),
    Spec(StrategySpec),
}

impl StrategyEntry {
    pub fn resolve(&self) -> Result<StrategySpec> {
        match self {
            StrategyEntry::Name(n) => parse_strategy(n),
            StrategyEntry::Spec(s) => {
                s.validate()?;
                Ok(s.clone())
            }
        }
    }
}

/// Scenario file for `alp run`; every key is optional and overrides the
/// corresponding flag.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub dataset: Option<String>,
    pub setting: Option<SettingChoice>,
    pub split_seed: Option<u64>,
    pub pipeline_seed: Option<u64>,
    pub learner: Option<LearnerEntry>,
    pub strategy: Option<StrategyEntry>,
    pub committee_size: Option<usize>,
    pub time_cap: Option<f64>,
    pub store: Option<PathBuf>,
    pub cache: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub datasets: Vec<String>,
    pub settings: Vec<SettingChoice>,
    pub learners: Vec<LearnerEntry>,
    pub strategies: Vec<StrategyEntry>,
    pub seeds: Vec<u64>,
    pub committee_size: Option<usize>,
    /// Applied to every learner that does not set its own cap.
    pub time_cap: Option<f64>,
}

impl GridFile {
    pub fn into_spec(self) -> Result<GridSpec> {
        let learners = self
            .learners
            .iter()
            .map(|l| {
                let mut spec = l.resolve()?;
                if let (Some(cap), LearnerEntry::Name(_)) = (self.time_cap, l) {
                    spec.fit_time_cap_seconds = cap;
                }
                Ok(spec)
            })
            .collect::<Result<Vec<_>>>()?;
        let grid = GridSpec {
            datasets: self.datasets,
            settings: self.settings,
            learners,
            strategies: self
                .strategies
                .iter()
                .map(StrategyEntry::resolve)
                .collect::<Result<_>>()?,
            seeds: self.seeds,
            committee_size: self
                .committee_size
                .unwrap_or(alp_core::pipeline::DEFAULT_COMMITTEE_SIZE),
        };
        grid.validate()?;
        Ok(grid)
    }
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).at(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioFile> {
    read_toml(path)
}

pub fn load_grid_file(path: &Path) -> Result<GridSpec> {
    read_toml::<GridFile>(path)?.into_spec()
}

/// TOML rendering used to echo effective configurations.
pub fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string(value).unwrap_or_else(|e| format!("# unrenderable configuration: {e}\n"))
}
