//! The `sleepcast` command line.
//!
//! Settings come from built-in defaults, then `--config <file.toml>`, then flags.
//! Exit codes: 0 success, 1 internal error (including training divergence),
//! 2 user or input error (bad flags, config, CSV schema, missing files).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use sleepcast_kernel::Rng;

use crate::config::RunConfig;
use crate::data::{generate_synthetic, parse_csv, preprocess, write_csv, SubjectDataset};
use crate::error::{Error, Result};
use crate::experiment::{
    random_search, run_grid, run_loso, FoldPlan, GridResults, ResultsFile, Timings, TrainResults, TrainSummary, TrialResult,
    RESULTS_VERSION,
};
use crate::model::{HyperParams, ModelKind, SearchSpace};
use crate::report::svg::with_desc;
use crate::report::{build_report, line_svgs, radar_data, radar_svg, write_grid_csv, write_radar_csv, write_series_csv};
use crate::window::WindowConfig;

#[derive(Debug, Parser)]
#[command(name = "sleepcast", version, about = "Forecast daily sleep scores from wearable data")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for fold-level parallelism.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Only print warnings and errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic cohort as CSV.
    Generate(GenerateArgs),
    /// Leave-one-subject-out training for one (model, W, H) configuration.
    Train(TrainArgs),
    /// Evaluate a grid of windows and horizons.
    Grid(GridArgs),
    /// Summarize results files.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub subjects: Option<usize>,
    #[arg(long)]
    pub days: Option<usize>,
    /// Between-subject shift in [0, 1].
    #[arg(long)]
    pub shift: Option<f64>,
    #[arg(long)]
    pub missing_rate: Option<f64>,
    #[arg(long)]
    pub anomaly_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Input CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Domain-loss weight.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Random-search trials before the final run; 0 trains the configured hyperparameters.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    /// Train without the domain-classification term.
    #[arg(long)]
    pub no_domain_loss: bool,
    /// Skip writing per-fold checkpoints.
    #[arg(long)]
    pub no_checkpoints: bool,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Comma-separated window lengths.
    #[arg(long, value_delimiter = ',')]
    pub windows: Option<Vec<usize>>,
    /// Comma-separated horizons.
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<usize>>,
    /// Comma-separated models.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<ModelKind>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `train.json` or `grid.json` files.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl Cli {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        set(&mut c.seed, self.seed);
        set(&mut c.jobs, self.jobs);
        set(&mut c.out, self.out.clone());
        match &self.command {
            Command::Generate(a) => {
                set(&mut c.generate.n_subjects, a.subjects);
                set(&mut c.generate.n_days, a.days);
                set(&mut c.generate.shift_strength, a.shift);
                set(&mut c.generate.missing_rate, a.missing_rate);
                set(&mut c.generate.anomaly_rate, a.anomaly_rate);
            }
            Command::Train(a) => {
                if a.input.is_some() {
                    c.input = a.input.clone();
                }
                set(&mut c.train.model, a.model);
                set(&mut c.train.window, a.window);
                set(&mut c.train.horizon, a.horizon);
                set(&mut c.train.epochs, a.epochs);
                set(&mut c.train.patience, a.patience);
                set(&mut c.train.lr, a.lr);
                set(&mut c.hyperparams.alpha, a.alpha);
                set(&mut c.search.n_trials, a.trials);
                if a.timeout_secs.is_some() {
                    c.search.timeout_secs = a.timeout_secs;
                }
                if a.no_domain_loss {
                    c.train.domain_loss = false;
                }
                if a.no_checkpoints {
                    c.train.checkpoints = false;
                }
            }
            Command::Grid(a) => {
                if a.input.is_some() {
                    c.input = a.input.clone();
                }
                set(&mut c.grid.windows, a.windows.clone());
                set(&mut c.grid.horizons, a.horizons.clone());
                set(&mut c.grid.models, a.models.clone());
                set(&mut c.train.epochs, a.epochs);
                set(&mut c.train.patience, a.patience);
                set(&mut c.hyperparams.alpha, a.alpha);
            }
            Command::Report(_) => {}
        }
        c.validate()?;
        Ok(c)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn open_file(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

/// Seed and config, as embedded in SVG files.
fn provenance(cfg: &RunConfig) -> String {
    format!("sleepcast seed={} config={}", cfg.seed, cfg.to_json())
}

fn load_input(cfg: &RunConfig) -> Result<Vec<SubjectDataset>> {
    let path = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("no input CSV; pass --input or set `input`".into()))?;
    let pre = preprocess(&parse_csv(path)?, &cfg.drop_features)?;
    for w in &pre.warnings {
        log::warn!("subject {}: feature {} has no observed values, imputed as 0", w.subject, w.feature);
    }
    Ok(pre.datasets)
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<PathBuf> {
    let data = generate_synthetic(&cfg.generate, cfg.seed)?;
    create_dir(&cfg.out)?;
    let csv = cfg.out.join("synthetic.csv");
    write_csv(&csv, &data)?;
    let sidecar = serde_json::json!({ "command": "generate", "seed": cfg.seed, "config": cfg.to_json() });
    write_file(
        &cfg.out.join("synthetic.config.json"),
        serde_json::to_string_pretty(&sidecar)? + "\n",
    )?;
    log::info!("wrote {} subjects to {}", data.len(), csv.display());
    Ok(csv)
}

fn train_plan(cfg: &RunConfig, hyperparams: HyperParams, keep_series: bool) -> Result<FoldPlan> {
    Ok(FoldPlan {
        model: cfg.train.model,
        hyperparams,
        window: WindowConfig::new(cfg.train.window, cfg.train.horizon)?,
        train: cfg.train.train_config(),
        master_seed: cfg.seed,
        keep_series,
    })
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainResults> {
    let data = load_input(cfg)?;
    create_dir(&cfg.out)?;
    let mut timings = Timings::default();

    let search = if cfg.search.n_trials > 0 {
        let started = Instant::now();
        // Stream 1 of the master seed is reserved for the search draws.
        let mut rng = Rng::derive(cfg.seed, &[1]);
        let result = random_search(
            &SearchSpace::default(),
            cfg.search.n_trials,
            &mut rng,
            cfg.search.timeout_secs.map(Duration::from_secs),
            |i, hp| {
                log::info!("search trial {i}: {hp:?}");
                let plan = train_plan(cfg, hp.clone(), false)?;
                Ok(run_loso(&data, &plan)?.into_iter().map(|(r, _)| r).collect())
            },
        )?;
        timings.push("search", started.elapsed());
        Some(result)
    } else {
        None
    };
    let hyperparams = match &search {
        Some(s) => s
            .best_hyperparams()
            .cloned()
            .ok_or_else(|| Error::InvalidParameter("every search trial failed".into()))?,
        None => cfg.hyperparams.clone(),
    };

    let started = Instant::now();
    let folds = run_loso(&data, &train_plan(cfg, hyperparams, true)?)?;
    timings.push("loso", started.elapsed());
    for (r, _) in &folds {
        timings.push(format!("fold {}", r.fold.test), r.wall_time);
    }
    if cfg.train.checkpoints {
        let dir = cfg.out.join("checkpoints");
        create_dir(&dir)?;
        for (r, model) in &folds {
            let mut ck = model.to_checkpoint();
            ck.provenance = Some(serde_json::json!({
                "seed": cfg.seed,
                "fold_seed": r.seed,
                "fold": r.fold,
                "config": cfg.to_json(),
            }));
            ck.save(dir.join(format!("fold_{}.json", r.fold.test)))?;
        }
    }
    let trials: Vec<TrialResult> = folds.into_iter().map(|(r, _)| r).collect();
    let results = TrainResults {
        version: RESULTS_VERSION,
        seed: cfg.seed,
        config: cfg.to_json(),
        search,
        summary: TrainSummary::from_trials(&trials),
        trials,
    };
    ResultsFile::Train(results.clone()).write(cfg.out.join("train.json"))?;
    timings.write(cfg.out.join("timings.json"))?;
    if let Some(s) = &results.summary {
        println!(
            "mean test RMSE {:.4} (subject-mean baseline {:.4}); beats baseline on {} of {} folds",
            s.mean_test_rmse, s.mean_subject_mean_rmse, s.folds_beating_subject_mean, s.folds
        );
    }
    Ok(results)
}

pub fn cmd_grid(cfg: &RunConfig) -> Result<GridResults> {
    let data = load_input(cfg)?;
    create_dir(&cfg.out)?;
    let mut timings = Timings::default();
    let started = Instant::now();
    let grid = run_grid(&data, &cfg.grid_spec())?;
    timings.push("grid", started.elapsed());

    let desc = provenance(cfg);
    write_grid_csv(open_file(&cfg.out.join("grid.csv"))?, &grid)?;
    let focus = if grid.models().contains(&ModelKind::AdaSt) {
        ModelKind::AdaSt
    } else {
        grid.models().first().copied().unwrap_or(ModelKind::AdaSt)
    };
    if let Some(radar) = radar_data(&grid, focus) {
        write_radar_csv(open_file(&cfg.out.join("radar.csv"))?, &radar)?;
        write_file(&cfg.out.join("radar.svg"), with_desc(&radar_svg(&radar), &desc))?;
    }
    for (model, svg) in line_svgs(&grid) {
        write_file(&cfg.out.join(format!("lines_{model}.svg")), with_desc(&svg, &desc))?;
    }
    let results = GridResults {
        version: RESULTS_VERSION,
        seed: cfg.seed,
        config: cfg.to_json(),
        grid,
    };
    ResultsFile::Grid(results.clone()).write(cfg.out.join("grid.json"))?;
    timings.write(cfg.out.join("timings.json"))?;
    println!("{} cells, {} empty", results.grid.cells.len(), results.grid.empty.len());
    Ok(results)
}

pub fn cmd_report(cfg: &RunConfig, files: &[PathBuf]) -> Result<String> {
    let parsed = files.iter().map(ResultsFile::read).collect::<Result<Vec<_>>>()?;
    let report = build_report(&parsed)?;
    let dir = cfg.out.join("series");
    create_dir(&dir)?;
    for (kind, series) in [("test", &report.test_series), ("val", &report.val_series)] {
        for (subject, points) in series {
            write_series_csv(open_file(&dir.join(format!("{kind}_subject_{subject}.csv")))?, points)?;
        }
    }
    write_file(&cfg.out.join("report.txt"), &report.text)?;
    print!("{}", report.text);
    Ok(report.text)
}

/// Run an already parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Generate(_) => cmd_generate(&cfg).map(|_| ()),
        Command::Train(_) => cmd_train(&cfg).map(|_| ()),
        Command::Grid(_) => cmd_grid(&cfg).map(|_| ()),
        Command::Report(a) => cmd_report(&cfg, &a.files).map(|_| ()),
    })
}

pub fn exit_code(err: &Error) -> u8 {
    if err.is_user_error() {
        2
    } else {
        1
    }
}

/// Parse `args` (including the program name), run, and map the outcome to an exit code.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn main() -> ExitCode {
    main_with(std::env::args_os())
}
