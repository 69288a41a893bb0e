use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use alp_bench::bridge::ExternalFitter;
use alp_bench::config::{self, parse_assignment, ScenarioFile};
use alp_bench::data::openml::{OpenMlClient, CACHE_ENV, DEFAULT_BASE_URL};
use alp_bench::data::DatasetSource;
use alp_bench::report::{render_report, ClassFilter, ReportOptions, Statistic};
use alp_bench::runner::{run_grid, run_scenario, CellOutcome, GridOptions, SystemClock, TableCache};
use alp_bench::store::{load_runs, save_run, RunFilter};
use alp_bench::{Error, Result};
use alp_core::clock::FrozenClock;
use alp_core::dataset::{gaussian_classes, GaussianSpec};
use alp_core::learners::{LearnerKind, LearnerSpec, NativeFitter};
use alp_core::pipeline::{run_alp, AlpSpec, Metric, RunStatus};
use alp_core::qs::{Strategy, StrategySpec};
use alp_core::setting::{Scenario, SettingChoice};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "alp", version, about = "Active learning pipeline benchmark")]
struct Cli {
    /// Dataset cache directory.
    #[arg(long, global = true, env = CACHE_ENV, default_value = "alp-cache")]
    cache: PathBuf,
    /// Never touch the network; serve datasets from the cache only.
    #[arg(long, global = true)]
    offline: bool,
    /// OpenML server.
    #[arg(long, global = true, default_value = DEFAULT_BASE_URL)]
    openml_url: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download and cache OpenML datasets.
    Fetch {
        /// OpenML dataset ids.
        ids: Vec<i64>,
    },
    /// Run one ALP on one scenario and store the record.
    Run(RunArgs),
    /// Run a cross-product grid with cooperating workers.
    Grid(GridArgs),
    /// Render budget curves, heatmaps and win matrices from a store.
    Report(ReportArgs),
    /// Quick end-to-end check on synthetic data.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// OpenML id, .arff/.csv path, or synthetic:gauss:... spec.
    #[arg(long, default_value = "synthetic:gauss:n=600,c=2,d=2,sep=1,seed=0")]
    dataset: String,
    #[arg(long, default_value = "small-dynamic")]
    setting: String,
    /// knn, logreg, gnb, random_forest (rf), extra_trees (et), mlp, or external:<command>.
    #[arg(long, default_value = "random_forest")]
    learner: String,
    /// Query strategy name.
    #[arg(long, default_value = "margin")]
    qs: String,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long, default_value_t = 0)]
    pipeline_seed: u64,
    #[arg(long, default_value = "alp-store")]
    store: PathBuf,
    /// Fit time cap in seconds.
    #[arg(long, default_value_t = 180.0)]
    time_cap: f64,
    #[arg(long, default_value_t = 10)]
    committee_size: usize,
    /// Learner hyperparameter override, key=value (repeatable).
    #[arg(long = "param")]
    params: Vec<String>,
    /// Strategy constant override, key=value (repeatable).
    #[arg(long = "qs-constant")]
    constants: Vec<String>,
    /// TOML scenario file; its keys override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// TOML grid file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value = "alp-store")]
    store: PathBuf,
    /// Seconds after which another worker may take over a claimed cell.
    #[arg(long, default_value_t = 21_600)]
    lease: u64,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, default_value = "alp-store")]
    store: PathBuf,
    #[arg(long, default_value = "alp-report")]
    out: PathBuf,
    /// all, binary or multiclass.
    #[arg(long, default_value = "all")]
    classes: String,
    /// accuracy or macro_f1.
    #[arg(long, default_value = "accuracy")]
    metric: String,
    /// Per-seed statistic compared across pipelines: aubc or final.
    #[arg(long, default_value = "aubc")]
    statistic: String,
}

#[derive(Serialize)]
struct EffectiveRun<'a> {
    dataset: &'a str,
    setting: &'a str,
    split_seed: u64,
    pipeline_seed: u64,
    store: String,
    cache: String,
    alp: &'a AlpSpec,
}

fn source(cli: &Cli, cache: PathBuf) -> DatasetSource {
    DatasetSource::new(
        OpenMlClient::new(cache)
            .with_base_url(&cli.openml_url)
            .offline(cli.offline),
    )
}

fn cmd_fetch(cli: &Cli, ids: &[i64]) -> Result<bool> {
    if ids.is_empty() {
        return Err(Error::Usage("give at least one dataset id".into()));
    }
    eprintln!("cache = {:?}\noffline = {}", cli.cache, cli.offline);
    let client = OpenMlClient::new(&cli.cache)
        .with_base_url(&cli.openml_url)
        .offline(cli.offline);
    let mut all_ok = true;
    for &id in ids {
        match client.fetch(id).and_then(|t| {
            let (_, rows, classes) = alp_bench::data::load::encode_labels(&t)?;
            Ok((t, rows.len(), classes.len()))
        }) {
            Ok((t, rows, classes)) => println!(
                "{id}: ok {} rows, {} columns, {classes} classes ({})",
                rows,
                t.columns.len(),
                t.relation
            ),
            Err(e) => {
                all_ok = false;
                println!("{id}: FAILED {e}");
            }
        }
    }
    Ok(all_ok)
}

fn cmd_run(cli: &Cli, args: &RunArgs) -> Result<bool> {
    let file = match &args.config {
        Some(p) => config::load_scenario_file(p)?,
        None => ScenarioFile::default(),
    };
    let time_cap = file.time_cap.unwrap_or(args.time_cap);
    let mut learner = match &file.learner {
        Some(entry) => entry.resolve()?,
        None => {
            let mut spec = config::parse_learner(&args.learner)?;
            for p in &args.params {
                let (k, v) = parse_assignment(p)?;
                spec = spec.with_param(&k, v)?;
            }
            spec
        }
    };
    // A fully specified learner table keeps its own cap unless the file sets one.
    if !matches!(file.learner, Some(config::LearnerEntry::Spec(_))) || file.time_cap.is_some() {
        learner.fit_time_cap_seconds = time_cap;
    }
    let strategy = match &file.strategy {
        Some(entry) => entry.resolve()?,
        None => {
            let mut spec = config::parse_strategy(&args.qs)?;
            for c in &args.constants {
                let (k, v) = parse_assignment(c)?;
                spec = spec.with_constant(&k, v)?;
            }
            spec
        }
    };
    let alp = AlpSpec::new(learner, strategy)?
        .with_committee_size(file.committee_size.unwrap_or(args.committee_size))
        .map_err(|e| Error::Usage(e.to_string()))?;
    let scenario = Scenario {
        dataset_ref: file.dataset.clone().unwrap_or_else(|| args.dataset.clone()),
        setting: file
            .setting
            .clone()
            .unwrap_or_else(|| SettingChoice::Template(args.setting.clone())),
        split_seed: file.split_seed.unwrap_or(args.split_seed),
        pipeline_seed: file.pipeline_seed.unwrap_or(args.pipeline_seed),
    };
    let store = file.store.clone().unwrap_or_else(|| args.store.clone());
    let cache = file.cache.clone().unwrap_or_else(|| cli.cache.clone());
    eprint!(
        "{}",
        config::to_toml(&EffectiveRun {
            dataset: &scenario.dataset_ref,
            setting: scenario.setting.label(),
            split_seed: scenario.split_seed,
            pipeline_seed: scenario.pipeline_seed,
            store: store.display().to_string(),
            cache: cache.display().to_string(),
            alp: &alp,
        })
    );
    let tables = TableCache::new(source(cli, cache));
    let record = run_scenario(&tables, &scenario, &alp, &ExternalFitter, &SystemClock::default())?;
    let path = save_run(&record, &store)?;
    println!("stored {}", path.display());
    match record.status {
        RunStatus::Completed => {
            println!(
                "final accuracy {:.4}, AUBC {:.4} over {} iterations",
                record.final_value(Metric::Accuracy).unwrap_or(f64::NAN),
                record.aubc(Metric::Accuracy)?,
                record.iterations.len()
            );
            Ok(true)
        }
        RunStatus::Failed => {
            println!("run FAILED: {}", record.error.unwrap_or_default());
            Ok(false)
        }
    }
}

fn cmd_grid(cli: &Cli, args: &GridArgs) -> Result<bool> {
    let grid = config::load_grid_file(&args.config)?;
    if args.workers == 0 {
        return Err(Error::Usage("--workers must be at least 1".into()));
    }
    eprintln!(
        "{}workers = {}\nstore = {:?}\ncache = {:?}\nlease_seconds = {}",
        config::to_toml(&grid),
        args.workers,
        args.store,
        cli.cache,
        args.lease
    );
    let tables = TableCache::new(source(cli, cli.cache.clone()));
    let progress = |o: &CellOutcome| match o {
        CellOutcome::Completed(k) => println!("done    {k}"),
        CellOutcome::Failed(k, why) => println!("failed  {k}: {why}"),
        CellOutcome::Skipped(k, why) => println!("skipped {k}: {why}"),
    };
    let clock = SystemClock::default();
    let summary = run_grid(
        &grid,
        &args.store,
        &tables,
        &GridOptions {
            workers: args.workers,
            lease: Duration::from_secs(args.lease),
            fitter: &ExternalFitter,
            clock: &clock,
            progress: &progress,
        },
    )?;
    let completed = summary.count(|o| matches!(o, CellOutcome::Completed(_)));
    println!("{completed} of {} executed cells completed", summary.outcomes.len());
    Ok(completed == summary.outcomes.len())
}

fn cmd_report(args: &ReportArgs) -> Result<bool> {
    let opts = ReportOptions {
        metric: Metric::from_name(&args.metric).map_err(|e| Error::Usage(e.to_string()))?,
        statistic: Statistic::from_name(&args.statistic)?,
        classes: ClassFilter::from_name(&args.classes)?,
    };
    eprintln!(
        "store = {:?}\nout = {:?}\nclasses = {:?}\nmetric = {:?}\nstatistic = {:?}",
        args.store, args.out, args.classes, args.metric, args.statistic
    );
    let loaded = load_runs(&args.store, &RunFilter::default())?;
    for (path, why) in &loaded.errors {
        eprintln!("unreadable {}: {why}", path.display());
    }
    if loaded.records.is_empty() {
        return Err(Error::Usage(format!("no runs in {}", args.store.display())));
    }
    let records: Vec<_> = loaded.records.into_iter().map(|(_, r)| r).collect();
    let written = render_report(&records, &args.out, &opts)?;
    println!("wrote {} files to {}", written.len(), args.out.display());
    Ok(loaded.errors.is_empty())
}

fn cmd_selftest() -> Result<bool> {
    let ds = gaussian_classes(&GaussianSpec {
        n: 300,
        n_classes: 3,
        dims: 2,
        separation: 2.0,
        seed: 0,
    })?;
    let scenario = Scenario {
        dataset_ref: ds.source_id.clone(),
        setting: SettingChoice::Template("small-dynamic".into()),
        split_seed: 0,
        pipeline_seed: 0,
    };
    let mut ok = true;
    for (kind, strategy) in [
        (LearnerKind::Gnb, Strategy::Margin),
        (LearnerKind::Knn, Strategy::Coreset),
        (LearnerKind::Logreg, Strategy::Entropy),
        (LearnerKind::RandomForest, Strategy::Random),
    ] {
        let alp = AlpSpec::new(LearnerSpec::new(kind.clone()), StrategySpec::new(strategy))?;
        let a = run_alp(&scenario, &alp, &ds, &NativeFitter, &FrozenClock)?;
        let b = run_alp(&scenario, &alp, &ds, &NativeFitter, &FrozenClock)?;
        let pass = a.status == RunStatus::Completed && a == b && a.total_queried() > 0;
        ok &= pass;
        println!(
            "{} {} + {}: final accuracy {:.3}",
            if pass { "ok  " } else { "FAIL" },
            kind.name(),
            strategy,
            a.final_value(Metric::Accuracy).unwrap_or(f64::NAN)
        );
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Fetch { ids } => cmd_fetch(&cli, ids),
        Command::Run(args) => cmd_run(&cli, args),
        Command::Grid(args) => cmd_grid(&cli, args),
        Command::Report(args) => cmd_report(args),
        Command::Selftest => cmd_selftest(),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e @ Error::Usage(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
