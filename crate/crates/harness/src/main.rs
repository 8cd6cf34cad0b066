use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use spotflow_core::cloud::oob::{estimate_for_catalog, DEFAULT_GRID_POINTS, DEFAULT_STEP, DEFAULT_WINDOW};
use spotflow_core::cloud::{load_catalog, load_spot_trace};
use spotflow_core::workflow::generate::{generate_file, Family};
use spotflow_core::workflow::parse_workflow;
use spotflow_harness::experiment::{default_workers, load_catalog_or_default, read_records, run_experiment};
use spotflow_harness::report::{summarize, write_report};
use spotflow_harness::{ExperimentConfig, Pooling};

#[derive(Parser)]
#[command(name = "spotflow", version, about = "Spot-aware workflow autoscaling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every strategy, configuration and seed of an experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, env = "SPOTFLOW_WORKERS")]
        workers: Option<usize>,
    },
    /// Summarize persisted records into report tables.
    Report {
        /// One or more records files; workflows are kept apart.
        #[arg(long, required = true, num_args = 1..)]
        records: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = PoolingArg::PerSpotRatio)]
        pooling: PoolingArg,
    },
    /// Write a synthetic workflow file.
    GenWorkflow {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        tasks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Standard output when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train an out-of-bid probability model on a trace prefix.
    EstimateOob {
        #[arg(long)]
        trace: PathBuf,
        /// Only data strictly before this timestamp is used.
        #[arg(long)]
        until: f64,
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: f64,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
        #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
        grid_points: usize,
        /// Standard output when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check input files without running anything.
    Validate {
        #[arg(long)]
        workflow: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum PoolingArg {
    PerSpotRatio,
    PerConfig,
}

impl From<PoolingArg> for Pooling {
    fn from(p: PoolingArg) -> Self {
        match p {
            PoolingArg::PerSpotRatio => Pooling::PerSpotRatio,
            PoolingArg::PerConfig => Pooling::PerConfig,
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, output, workers } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = output {
                cfg.output_dir = dir;
            }
            let workers = workers.filter(|&n| n > 0).unwrap_or_else(default_workers);
            let records = run_experiment(&cfg, workers)?;
            let failed = records.iter().filter(|r| r.error.is_some()).count();
            println!(
                "{} runs ({} failed), records in {}",
                records.len(),
                failed,
                cfg.output_dir.display()
            );
            if records.len() - failed >= 2 {
                let report = summarize(&records, cfg.alpha, cfg.pooling)?;
                write_report(&cfg.output_dir, &report, &records)?;
            }
        }
        Command::Report { records, output, alpha, pooling } => {
            let mut all = Vec::new();
            for path in &records {
                all.extend(read_records(path)?);
            }
            let report = summarize(&all, alpha, pooling.into())?;
            write_report(&output, &report, &all)?;
            for c in &report.comparisons {
                println!(
                    "{} cmi vs {}: p={:.3e} {} ({})",
                    c.workflow,
                    c.against,
                    c.p,
                    c.verdict.as_str(),
                    c.improvement_percent.map_or("n/a".into(), |v| format!("{v:+.1}%")),
                );
            }
        }
        Command::GenWorkflow { family, tasks, seed, output } => {
            let file = generate_file(family, tasks, seed)?;
            let text = serde_json::to_string_pretty(&file)? + "\n";
            emit(output.as_deref(), &text)?;
        }
        Command::EstimateOob {
            trace,
            until,
            catalog,
            window,
            step,
            grid_points,
            output,
        } => {
            let trace = load_spot_trace(&read(&trace)?)?;
            let catalog = load_catalog_or_default(catalog.as_deref())?;
            let model = estimate_for_catalog(&trace, until, &catalog, window, step, grid_points)?;
            emit(output.as_deref(), &(model.to_json() + "\n"))?;
        }
        Command::Validate {
            workflow,
            trace,
            catalog,
            config,
        } => {
            if workflow.is_none() && trace.is_none() && catalog.is_none() && config.is_none() {
                bail!("nothing to validate: pass --workflow, --trace, --catalog or --config");
            }
            if let Some(p) = workflow {
                let w = parse_workflow(&read(&p)?)?;
                println!("workflow `{}`: {} tasks, {} edges", w.name(), w.len(), w.edges().len());
            }
            if let Some(p) = trace {
                let t = load_spot_trace(&read(&p)?)?;
                println!("trace: {} types over [{}, {}]", t.types().count(), t.start(), t.end());
            }
            if let Some(p) = catalog {
                let c = load_catalog(&read(&p)?)?;
                println!("catalog: {} types", c.len());
            }
            if let Some(p) = config {
                let cfg = ExperimentConfig::load(&p)?;
                cfg.validate()?;
                println!("config: ok");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
