//! Executes scenarios and grids.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use alp_core::clock::Clock;
use alp_core::learners::Fitter;
use alp_core::pipeline::{run_alp, AlpSpec, RunRecord, RunStatus};
use alp_core::setting::Scenario;

use crate::data::{prepare_dataset, DatasetRef, DatasetSource, LoadedTable};
use crate::error::{Error, Result};
use crate::store::{expand_and_claim, mark_failed, save_run, GridSpec, RunKey};

/// Seconds since construction, from a monotonic clock.
#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

type Slot = Arc<Mutex<Option<Arc<LoadedTable>>>>;

/// Loads each dataset reference at most once and shares it between workers.
pub struct TableCache {
    source: DatasetSource,
    tables: Mutex<HashMap<String, Slot>>,
}

impl TableCache {
    pub fn new(source: DatasetSource) -> Self {
        Self {
            source,
            tables: Mutex::new(HashMap::new()),
        }
    }

    pub fn get(&self, reference: &str) -> Result<Arc<LoadedTable>> {
        let slot = {
            let mut map = self.tables.lock().unwrap_or_else(|e| e.into_inner());
            Arc::clone(map.entry(reference.to_string()).or_default())
        };
        let mut slot = slot.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = slot.as_ref() {
            return Ok(Arc::clone(t));
        }
        let loaded = Arc::new(self.source.load(&DatasetRef::parse(reference)?)?);
        *slot = Some(Arc::clone(&loaded));
        Ok(loaded)
    }
}

/// Loads and prepares the scenario's dataset and runs the ALP.
pub fn run_scenario(
    tables: &TableCache,
    scenario: &Scenario,
    alp: &AlpSpec,
    fitter: &dyn Fitter,
    clock: &dyn Clock,
) -> Result<RunRecord> {
    let loaded = tables.get(&scenario.dataset_ref)?;
    let dataset = prepare_dataset(&loaded, scenario)?;
    Ok(run_alp(scenario, alp, &dataset, fitter, clock)?)
}

#[derive(Clone, Debug)]
pub enum CellOutcome {
    Completed(RunKey),
    /// The run started but a learner failed; the partial record is stored.
    Failed(RunKey, String),
    /// The run could not start; a failure marker is stored.
    Skipped(RunKey, String),
}

#[derive(Clone, Debug, Default)]
pub struct GridSummary {
    pub outcomes: Vec<CellOutcome>,
}

impl GridSummary {
    pub fn count(&self, f: impl Fn(&CellOutcome) -> bool) -> usize {
        self.outcomes.iter().filter(|o| f(o)).count()
    }
}

pub struct GridOptions<'a> {
    pub workers: usize,
    pub lease: Duration,
    pub fitter: &'a dyn Fitter,
    pub clock: &'a dyn Clock,
    pub progress: &'a (dyn Fn(&CellOutcome) + Sync),
}

/// Runs every unclaimed, unfinished cell with `workers` threads. Store
/// errors abort the worker that hit them; run errors are recorded and the
/// grid continues.
pub fn run_grid(grid: &GridSpec, root: &Path, tables: &TableCache, opts: &GridOptions<'_>) -> Result<GridSummary> {
    grid.validate()?;
    let outcomes = Mutex::new(Vec::new());
    let first_error: Mutex<Option<Error>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..opts.workers.max(1) {
            scope.spawn(|| {
                if let Err(e) = worker(grid, root, tables, opts, &outcomes) {
                    first_error.lock().unwrap_or_else(|p| p.into_inner()).get_or_insert(e);
                }
            });
        }
    });
    if let Some(e) = first_error.into_inner().unwrap_or_else(|p| p.into_inner()) {
        return Err(e);
    }
    let mut outcomes = outcomes.into_inner().unwrap_or_else(|p| p.into_inner());
    outcomes.sort_by(|a, b| key_of(a).cmp(key_of(b)));
    Ok(GridSummary { outcomes })
}

fn key_of(o: &CellOutcome) -> &RunKey {
    match o {
        CellOutcome::Completed(k) | CellOutcome::Failed(k, _) | CellOutcome::Skipped(k, _) => k,
    }
}

fn worker(
    grid: &GridSpec,
    root: &Path,
    tables: &TableCache,
    opts: &GridOptions<'_>,
    outcomes: &Mutex<Vec<CellOutcome>>,
) -> Result<()> {
    while let Some(claim) = expand_and_claim(grid, root, opts.lease)? {
        let cell = &claim.cell;
        let outcome = match run_scenario(tables, &cell.scenario, &cell.alp, opts.fitter, opts.clock) {
            Ok(record) => {
                save_run(&record, root)?;
                match record.status {
                    RunStatus::Completed => CellOutcome::Completed(cell.key.clone()),
                    RunStatus::Failed => CellOutcome::Failed(cell.key.clone(), record.error.unwrap_or_default()),
                }
            }
            Err(e) => {
                mark_failed(&cell.key, root, &e.to_string())?;
                CellOutcome::Skipped(cell.key.clone(), e.to_string())
            }
        };
        (opts.progress)(&outcome);
        outcomes.lock().unwrap_or_else(|p| p.into_inner()).push(outcome);
        claim.release()?;
    }
    Ok(())
}
