use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use segsur::pipeline::{self, PipelineConfig, PipelineError};

/// Schelling segregation surrogate workbench.
#[derive(Parser)]
#[command(name = "segsur", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the nested Latin hypercube design (design.csv).
    Doe(Common),
    /// Run every design point and repetition (runs.csv).
    Simulate(Common),
    /// Fit and rank the surrogate roster (evaluation.csv, evaluation.md).
    Fit(Common),
    /// Explain one surrogate (shap.csv, importance.csv, pdp_ice_*.csv).
    Explain(Common),
    /// Screening statistics of the runs (summary.json).
    Stats(Common),
}

#[derive(Args)]
struct Common {
    /// JSON pipeline configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the simulation worker count.
    #[arg(long)]
    workers: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(workers) = self.workers {
            cfg.workers = workers;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        Ok(cfg)
    }
}

fn run(command: Command) -> Result<Vec<PathBuf>, PipelineError> {
    match command {
        Command::Doe(c) => Ok(vec![pipeline::cmd_doe(&c.load()?)?]),
        Command::Simulate(c) => {
            let cfg = c.load()?;
            let report = pipeline::cmd_simulate(&cfg)?;
            log::info!(
                "{} runs: {} skipped, {} completed, {} failed",
                report.total, report.skipped, report.completed, report.failed
            );
            Ok(vec![cfg.runs_path()])
        }
        Command::Fit(c) => {
            let cfg = c.load()?;
            let report = pipeline::cmd_fit_evaluate(&cfg);
            if let Ok(r) = &report {
                eprint!("{}", r.to_markdown());
            }
            report?;
            Ok(vec![cfg.path("evaluation.csv"), cfg.path("evaluation.md")])
        }
        Command::Explain(c) => Ok(pipeline::cmd_explain(&c.load()?)?.files),
        Command::Stats(c) => {
            let cfg = c.load()?;
            pipeline::cmd_stats(&cfg)?;
            Ok(vec![cfg.path("summary.json")])
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
