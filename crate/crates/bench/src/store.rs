//! File-backed run store and cooperative grid claiming.
//!
//! Runs live at `<root>/<dataset>/<setting>/<learner>/<strategy>/<seed>.run`
//! as pretty-printed JSON whose first field is the schema version. A worker
//! claims a cell by atomically creating `<seed>.claim` next to the run file;
//! a run that cannot start (bad dataset, unsatisfiable split) leaves
//! `<seed>.failed` with the reason so the grid moves on.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime};

use alp_core::learners::LearnerSpec;
use alp_core::pipeline::{AlpSpec, RunRecord, RUN_SCHEMA};
use alp_core::qs::StrategySpec;
use alp_core::setting::{Scenario, SettingChoice};
use serde::{Deserialize, Serialize};

use crate::data::load::store_key;
use crate::error::{Error, IoContext, Result};
use crate::fsutil::{atomic_write, temp_sibling};

pub const RUN_EXT: &str = "run";
pub const CLAIM_EXT: &str = "claim";
pub const FAILED_EXT: &str = "failed";

/// Default claim lease before a claim counts as abandoned.
pub const DEFAULT_LEASE: Duration = Duration::from_secs(6 * 3600);

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RunKey {
    pub dataset: String,
    pub setting: String,
    pub learner: String,
    pub strategy: String,
    pub seed: String,
}

fn component(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '=' | '_') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// `split` when both seeds agree, else `split-pipeline`.
pub fn seed_label(split_seed: u64, pipeline_seed: u64) -> String {
    if split_seed == pipeline_seed {
        split_seed.to_string()
    } else {
        format!("{split_seed}-{pipeline_seed}")
    }
}

impl RunKey {
    pub fn new(scenario: &Scenario, learner_label: &str, strategy: &str) -> Self {
        Self {
            dataset: store_key(&scenario.dataset_ref),
            setting: component(scenario.setting.label()),
            learner: component(learner_label),
            strategy: component(strategy),
            seed: seed_label(scenario.split_seed, scenario.pipeline_seed),
        }
    }

    pub fn of_record(record: &RunRecord) -> Self {
        Self::new(&record.scenario, &record.learner.label, &record.strategy.name)
    }

    fn dir(&self, root: &Path) -> PathBuf {
        root.join(&self.dataset)
            .join(&self.setting)
            .join(&self.learner)
            .join(&self.strategy)
    }

    pub fn path(&self, root: &Path, ext: &str) -> PathBuf {
        self.dir(root).join(format!("{}.{ext}", self.seed))
    }
}

impl std::fmt::Display for RunKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}/{}/{}/{}/{}",
            self.dataset, self.setting, self.learner, self.strategy, self.seed
        )
    }
}

pub fn encode_record(record: &RunRecord) -> String {
    let mut s = serde_json::to_string_pretty(record).expect("run records serialize");
    s.push('\n');
    s
}

pub fn decode_record(text: &str) -> std::result::Result<RunRecord, String> {
    #[derive(Deserialize)]
    struct Header {
        schema: String,
    }
    let header: Header = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if header.schema != RUN_SCHEMA {
        return Err(format!(
            "unsupported schema `{}` (expected `{RUN_SCHEMA}`)",
            header.schema
        ));
    }
    serde_json::from_str(text).map_err(|e| e.to_string())
}

/// Stores `record` atomically. Re-saving a record equal up to wall times is a
/// no-op that keeps the stored file.
pub fn save_run(record: &RunRecord, root: &Path) -> Result<PathBuf> {
    let path = RunKey::of_record(record).path(root, RUN_EXT);
    if path.exists() {
        let text = fs::read_to_string(&path).at(&path)?;
        return match decode_record(&text) {
            Ok(existing) if existing.without_wall_times() == record.without_wall_times() => Ok(path),
            _ => Err(Error::Conflict(path)),
        };
    }
    atomic_write(&path, encode_record(record).as_bytes())?;
    Ok(path)
}

/// Partial key; `None` matches anything.
#[derive(Clone, Debug, Default)]
pub struct RunFilter {
    pub dataset: Option<String>,
    pub setting: Option<String>,
    pub learner: Option<String>,
    pub strategy: Option<String>,
}

impl RunFilter {
    fn matches(&self, parts: &[&str]) -> bool {
        [&self.dataset, &self.setting, &self.learner, &self.strategy]
            .iter()
            .zip(parts)
            .all(|(f, p)| f.as_ref().is_none_or(|f| component(f) == *p))
    }
}

#[derive(Debug, Default)]
pub struct LoadReport {
    pub records: Vec<(RunKey, RunRecord)>,
    pub errors: Vec<(PathBuf, String)>,
}

fn collect_runs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir).at(dir)?.collect::<std::io::Result<_>>().at(dir)?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            collect_runs(&path, out)?;
        } else if path.extension().is_some_and(|x| x == RUN_EXT) {
            out.push(path);
        }
    }
    Ok(())
}

/// All records under `root` matching `filter`, ordered by key. Unreadable
/// files are reported, not fatal.
pub fn load_runs(root: &Path, filter: &RunFilter) -> Result<LoadReport> {
    let mut paths = Vec::new();
    if root.exists() {
        collect_runs(root, &mut paths)?;
    }
    let mut report = LoadReport::default();
    for path in paths {
        let rel: Vec<String> = path
            .strip_prefix(root)
            .unwrap_or(&path)
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect();
        if rel.len() != 5 {
            report.errors.push((
                path,
                "not at <dataset>/<setting>/<learner>/<strategy>/<seed>.run".into(),
            ));
            continue;
        }
        let parts: Vec<&str> = rel.iter().map(String::as_str).collect();
        if !filter.matches(&parts) {
            continue;
        }
        match fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|t| decode_record(&t))
        {
            Ok(record) => report.records.push((RunKey::of_record(&record), record)),
            Err(message) => report.errors.push((path, message)),
        }
    }
    report.records.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(report)
}

/// Cross-product experiment definition. Every seed is used as both the
/// split seed and the pipeline seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub datasets: Vec<String>,
    pub settings: Vec<SettingChoice>,
    pub learners: Vec<LearnerSpec>,
    pub strategies: Vec<StrategySpec>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_committee")]
    pub committee_size: usize,
}

fn default_committee() -> usize {
    alp_core::pipeline::DEFAULT_COMMITTEE_SIZE
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridCell {
    pub scenario: Scenario,
    pub alp: AlpSpec,
    pub key: RunKey,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty()
            || self.settings.is_empty()
            || self.learners.is_empty()
            || self.strategies.is_empty()
            || self.seeds.is_empty()
        {
            return Err(Error::Config("every grid axis needs at least one entry".into()));
        }
        for cell in self.expand()? {
            cell.alp.validate()?;
        }
        Ok(())
    }

    /// Datasets × settings × learners × strategies × seeds, in that nesting order.
    pub fn expand(&self) -> Result<Vec<GridCell>> {
        let mut out = Vec::new();
        for d in &self.datasets {
            for s in &self.settings {
                for l in &self.learners {
                    for q in &self.strategies {
                        let alp = AlpSpec {
                            learner: l.clone(),
                            strategy: q.clone(),
                            committee_size: self.committee_size,
                        };
                        alp.validate()?;
                        for &seed in &self.seeds {
                            let scenario = Scenario {
                                dataset_ref: d.clone(),
                                setting: s.clone(),
                                split_seed: seed,
                                pipeline_seed: seed,
                            };
                            let key = RunKey::new(&scenario, &l.label(), q.strategy.name());
                            out.push(GridCell {
                                scenario,
                                alp: alp.clone(),
                                key,
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// A held claim; dropping it without [`Claim::release`] leaves the marker
/// for the lease to expire.
#[derive(Debug)]
pub struct Claim {
    pub cell: GridCell,
    path: PathBuf,
}

impl Claim {
    pub fn release(self) -> Result<()> {
        match fs::remove_file(&self.path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(e).at(&self.path),
        }
    }

    pub fn claim_path(&self) -> &Path {
        &self.path
    }
}

fn done(key: &RunKey, root: &Path) -> bool {
    key.path(root, RUN_EXT).exists() || key.path(root, FAILED_EXT).exists()
}

fn is_stale(path: &Path, lease: Duration) -> bool {
    fs::metadata(path)
        .and_then(|m| m.modified())
        .ok()
        .and_then(|t| SystemTime::now().duration_since(t).ok())
        .is_some_and(|age| age > lease)
}

fn try_create(path: &Path) -> Result<bool> {
    match OpenOptions::new().write(true).create_new(true).open(path) {
        Ok(mut f) => {
            let _ = writeln!(f, "pid {}", std::process::id());
            Ok(true)
        }
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Ok(false),
        Err(e) => Err(e).at(path),
    }
}

/// Moves a stale claim out of the way; only one contender's rename succeeds.
/// If what was moved turns out to be fresh, it is put back.
fn reclaim(path: &Path, lease: Duration) -> bool {
    let aside = temp_sibling(path);
    if fs::rename(path, &aside).is_err() {
        return false;
    }
    if is_stale(&aside, lease) {
        let _ = fs::remove_file(&aside);
        true
    } else {
        let _ = fs::hard_link(&aside, path);
        let _ = fs::remove_file(&aside);
        false
    }
}

/// Claims the first cell in grid order with no run file, no failure marker
/// and no live claim.
pub fn expand_and_claim(grid: &GridSpec, root: &Path, lease: Duration) -> Result<Option<Claim>> {
    for cell in grid.expand()? {
        if done(&cell.key, root) {
            continue;
        }
        let path = cell.key.path(root, CLAIM_EXT);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).at(parent)?;
        }
        let mut claimed = try_create(&path)?;
        if !claimed && is_stale(&path, lease) && reclaim(&path, lease) {
            claimed = try_create(&path)?;
        }
        if !claimed {
            continue;
        }
        // The cell may have finished between the check and the claim.
        if done(&cell.key, root) {
            let _ = fs::remove_file(&path);
            continue;
        }
        return Ok(Some(Claim { cell, path }));
    }
    Ok(None)
}

/// Records that a cell could not be run.
pub fn mark_failed(key: &RunKey, root: &Path, reason: &str) -> Result<PathBuf> {
    let path = key.path(root, FAILED_EXT);
    atomic_write(&path, format!("{reason}\n").as_bytes())?;
    Ok(path)
}
